"""Constraint priors as NUV nodes.

Each prior is a Gaussian whose variance(s) are optimized in closed form.
Alternating between the variance update (given the current estimate) and a
Gaussian estimation step recovers the MAP estimate under the effective
non-Gaussian prior.  The effective priors and their exact cost functions:

==============  =======================================  =========================
prior           effective -log density (up to constant)  feasible set (cost == 0)
==============  =======================================  =========================
Laplace(a)      gamma * |x - a|                          {a}
Box(a, b)       gamma * (|x-a| + |x-b| - |b-a|)          [a, b]
HalfSpace >= a  gamma * (|x-a| - (x-a))                  [a, inf)
HalfSpace <= a  gamma * (|x-a| + (x-a))                  (-inf, a]
Binary{a, b}    (no closed form; saturating log pull)    {a, b} attractors
==============  =======================================  =========================

All scale-factor arithmetic is done in the log domain so that slopes up to
gamma ~ 1e4 survive without overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from nuvbox.errors import NotApplicable
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, log_gaussian_density, multiply


class Side(enum.Enum):
    """Orientation of a half-space constraint on a scalar."""

    RIGHT_OF = "ge"  # x >= a
    LEFT_OF = "le"   # x <= a


@dataclass(frozen=True)
class LaplaceSpec:
    """Sparsifying prior centered at ``a`` with slope ``gamma``."""

    a: float
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")


@dataclass(frozen=True)
class BoxSpec:
    """Interval constraint a <= x <= b with side-lobe slope ``gamma``."""

    a: float
    b: float
    gamma: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError(f"box bounds inverted: a={self.a!r} > b={self.b!r}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")


@dataclass(frozen=True)
class HalfSpaceSpec:
    """One-sided constraint x >= a (RIGHT_OF) or x <= a (LEFT_OF)."""

    a: float
    side: Side
    gamma: float

    def __post_init__(self):
        if not isinstance(self.side, Side):
            raise ValueError(f"side must be a Side, got {self.side!r}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")


@dataclass(frozen=True)
class BinarySpec:
    """Two-level discretizing prior with levels ``a < b``.

    The update rule here is a plain alternating-maximization choice
    (variance = squared distance to each level); it is an extension kept
    deliberately simple, not part of the box/half-space machinery, and it
    has no closed-form cost function in this package.
    """

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"levels must satisfy a < b, got {self.a!r}, {self.b!r}")


ConstraintPrior = Union[LaplaceSpec, BoxSpec, HalfSpaceSpec, BinarySpec]


@dataclass(frozen=True)
class NuvState:
    """Optimized variances of a NUV node; unused slots stay at zero."""

    sigma_a_sq: float
    sigma_b_sq: float = 0.0

    def __post_init__(self):
        if self.sigma_a_sq < 0.0 or self.sigma_b_sq < 0.0:
            raise ValueError("NUV variances must be non-negative")


def laplace_update(x_hat: float, spec: LaplaceSpec) -> NuvState:
    """Closed-form maximizing variance |x_hat - a| / gamma."""
    return NuvState(abs(x_hat - spec.a) / spec.gamma)


def laplace_message(state: NuvState, spec: LaplaceSpec) -> GaussianMsg:
    return GaussianMsg(spec.a, state.sigma_a_sq).floored()


def box_update(x_hat: float, spec: BoxSpec) -> NuvState:
    """Closed-form maximizing variances (|x-a|/gamma, |x-b|/gamma)."""
    return NuvState(abs(x_hat - spec.a) / spec.gamma, abs(x_hat - spec.b) / spec.gamma)


def box_message(state: NuvState, spec: BoxSpec) -> GaussianMsg:
    """Product Gaussian of the two box branches, variance-floored.

    The mean is the precision-weighted combination of the bounds and always
    lies inside [a, b]; at a boundary the message degenerates to a near-Dirac
    there, which is the correct fixed point.
    """
    return multiply(
        GaussianMsg(spec.a, state.sigma_a_sq).floored(),
        GaussianMsg(spec.b, state.sigma_b_sq).floored(),
    )


def halfspace_update(x_hat: float, spec: HalfSpaceSpec) -> GaussianMsg:
    """Limit message of a box whose far bound is pushed to infinity.

    RIGHT_OF emits N(|x-a| + a, |x-a|/gamma), i.e. the estimate reflected
    into the feasible half-line; LEFT_OF mirrors the mean.  The variance is
    floored so the boundary point stays well-posed.
    """
    d = abs(x_hat - spec.a)
    variance = max(d / spec.gamma, VARIANCE_FLOOR)
    if spec.side is Side.RIGHT_OF:
        return GaussianMsg(d + spec.a, variance)
    return GaussianMsg(-d + spec.a, variance)


def binary_update(x_hat: float, spec: BinarySpec) -> NuvState:
    """Alternating-maximization variances: squared distance to each level."""
    return NuvState((x_hat - spec.a) ** 2, (x_hat - spec.b) ** 2)


def binary_message(state: NuvState, spec: BinarySpec) -> GaussianMsg:
    """Product of the two level branches; pulls toward the nearest level."""
    return multiply(
        GaussianMsg(spec.a, state.sigma_a_sq).floored(),
        GaussianMsg(spec.b, state.sigma_b_sq).floored(),
    )


def prior_message(x_hat: float, prior: ConstraintPrior) -> GaussianMsg:
    """Gaussian message emitted by ``prior`` after its variance update at ``x_hat``."""
    if isinstance(prior, LaplaceSpec):
        return laplace_message(laplace_update(x_hat, prior), prior)
    if isinstance(prior, BoxSpec):
        return box_message(box_update(x_hat, prior), prior)
    if isinstance(prior, HalfSpaceSpec):
        return halfspace_update(x_hat, prior)
    if isinstance(prior, BinarySpec):
        return binary_message(binary_update(x_hat, prior), prior)
    raise TypeError(f"unknown prior type {type(prior).__name__}")


def cost(x: float, prior: ConstraintPrior) -> float:
    """Exact closed-form cost of ``prior`` at ``x``; zero on the feasible set."""
    if isinstance(prior, LaplaceSpec):
        return prior.gamma * abs(x - prior.a)
    if isinstance(prior, BoxSpec):
        return prior.gamma * (abs(x - prior.a) + abs(x - prior.b) - abs(prior.b - prior.a))
    if isinstance(prior, HalfSpaceSpec):
        d = x - prior.a
        if prior.side is Side.RIGHT_OF:
            return prior.gamma * (abs(d) - d)
        return prior.gamma * (abs(d) + d)
    if isinstance(prior, BinarySpec):
        raise NotApplicable("binary priors have no closed-form cost here")
    raise TypeError(f"unknown prior type {type(prior).__name__}")


def log_variance_weight(sigma_sq: float, gamma: float) -> float:
    """log of the weight sqrt(2 pi sigma^2) * exp(-gamma^2 sigma^2 / 2)."""
    if not sigma_sq > 0.0:
        raise ValueError("sigma_sq must be positive")
    return 0.5 * math.log(2.0 * math.pi * sigma_sq) - 0.5 * gamma * gamma * sigma_sq


def box_log_scale(state: NuvState, spec: BoxSpec) -> float:
    """log of the x-independent scale factor of the box node.

    Combines the zero-mean Gaussian overlap of the two branches, their
    variance weights, and the correction term gamma * |b - a| that zeroes
    the cost inside the box.  Everything stays in the log domain; together
    with the log density of :func:`box_message` this reproduces the exact
    negative box cost.
    """
    va, vb = max(state.sigma_a_sq, VARIANCE_FLOOR), max(state.sigma_b_sq, VARIANCE_FLOOR)
    return (
        log_gaussian_density(0.0, spec.a - spec.b, va + vb)
        + log_variance_weight(va, spec.gamma)
        + log_variance_weight(vb, spec.gamma)
        + spec.gamma * abs(spec.b - spec.a)
    )

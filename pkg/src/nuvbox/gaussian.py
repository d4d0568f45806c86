"""Scalar and small-dimension vector Gaussian message algebra.

Messages are carried in moment form (mean, variance) with an exact dual
precision form (W = 1/variance, weighted mean = W * mean).  Flat messages
are encoded with ``variance = inf`` (precision exactly 0) so that identity
laws hold without magic large numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nuvbox.errors import InconsistentDirac

#: Variances are floored to this value before any inversion.  Closed-form NUV
#: updates produce exactly zero variance at constraint boundaries; the floor
#: keeps the Gaussian step well-posed while preserving the boundary fixed point.
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianMsg:
    """Scalar Gaussian message N(mean, variance), variance >= 0 (inf = flat)."""

    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean) and math.isfinite(self.variance):
            raise ValueError(f"non-finite mean {self.mean!r} with finite variance")
        if math.isnan(self.variance) or self.variance < 0.0:
            raise ValueError(f"variance must be >= 0, got {self.variance!r}")

    @property
    def precision(self) -> float:
        if math.isinf(self.variance):
            return 0.0
        return 1.0 / max(self.variance, VARIANCE_FLOOR)

    @property
    def weighted_mean(self) -> float:
        if math.isinf(self.variance):
            return 0.0
        return self.mean * self.precision

    @staticmethod
    def flat() -> "GaussianMsg":
        return GaussianMsg(0.0, math.inf)

    @staticmethod
    def from_precision(precision: float, weighted_mean: float) -> "GaussianMsg":
        if precision == 0.0:
            return GaussianMsg.flat()
        return GaussianMsg(weighted_mean / precision, 1.0 / precision)

    def floored(self) -> "GaussianMsg":
        if self.variance < VARIANCE_FLOOR:
            return GaussianMsg(self.mean, VARIANCE_FLOOR)
        return self


@dataclass(frozen=True)
class GaussianVecMsg:
    """Vector Gaussian message N(mean, covariance) with a symmetric PSD covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"bad shapes: mean {mean.shape}, covariance {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) < -1e-10 * scale:
            raise ValueError("covariance has a significantly negative eigenvalue")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size


def multiply(m1: GaussianMsg, m2: GaussianMsg) -> GaussianMsg:
    """Normalized product of two scalar Gaussian messages.

    Precisions add, weighted means add.  The product mean is a convex
    combination of the operand means and the product variance never exceeds
    either operand variance.
    """
    v1, v2 = m1.variance, m2.variance
    if v1 == 0.0 and v2 == 0.0:
        if m1.mean == m2.mean:
            return GaussianMsg(m1.mean, 0.0)
        raise InconsistentDirac(
            f"product of two Dirac messages with unequal means {m1.mean} != {m2.mean}"
        )
    if math.isinf(v1):
        return m2
    if math.isinf(v2):
        return m1
    f1, f2 = max(v1, VARIANCE_FLOOR), max(v2, VARIANCE_FLOOR)
    w = 1.0 / f1 + 1.0 / f2
    mean = (m1.mean / f1 + m2.mean / f2) / w
    return GaussianMsg(mean, 1.0 / w)


def scale_factor(m1: GaussianMsg, m2: GaussianMsg) -> float:
    """Gaussian density N(0; m1.mean - m2.mean, m1.variance + m2.variance).

    This is the mean-independent factor split off by the two-Gaussian
    product rule; it is what makes exact objective accounting possible.
    """
    v = m1.variance + m2.variance
    if not v > 0.0:
        raise ValueError("sum of variances must be positive")
    if math.isinf(v):
        return 0.0
    d = m1.mean - m2.mean
    return math.exp(-0.5 * d * d / v) / math.sqrt(2.0 * math.pi * v)


def log_gaussian_density(x: float, mean: float, variance: float) -> float:
    """log N(x; mean, variance) for a strictly positive variance."""
    if not variance > 0.0:
        raise ValueError("variance must be positive")
    d = x - mean
    return -0.5 * (math.log(2.0 * math.pi * variance) + d * d / variance)

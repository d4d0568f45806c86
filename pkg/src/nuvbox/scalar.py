"""Single-variable joint MAP testbed.

One Gaussian likelihood N(x; mu, s^2) combined with one constraint prior.
The solver alternates a closed-form variance update of the prior with the
(scalar) Gaussian estimation step; a dense grid search over the exact
objective serves as the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from nuvbox.errors import InvalidProblem, NotApplicable
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, log_gaussian_density, multiply
from nuvbox.priors import (
    BinarySpec,
    BoxSpec,
    ConstraintPrior,
    HalfSpaceSpec,
    LaplaceSpec,
    Side,
    binary_update,
    cost,
    prior_message,
)


@dataclass(frozen=True)
class ScalarProblem:
    """Likelihood N(x; mu, s_sq) paired with one constraint prior."""

    mu: float
    s_sq: float
    prior: ConstraintPrior

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.s_sq)):
            raise InvalidProblem(f"non-finite problem data: mu={self.mu!r}, s_sq={self.s_sq!r}")
        if not self.s_sq > 0.0:
            raise InvalidProblem(f"s_sq must be > 0, got {self.s_sq!r}")


@dataclass
class SolveReport:
    """Iteration trace of one coordinate-ascent solve."""

    x_hat: float
    iterations: int
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False


def _objective(x: float, p: ScalarProblem) -> float:
    """Exact negative log of the joint objective at the optimized variances.

    Uses the closed-form cost for priors that have one; the binary prior has
    no closed form, so its term is evaluated directly from the (floored)
    variance update.
    """
    quad = -log_gaussian_density(x, p.mu, p.s_sq)
    if isinstance(p.prior, BinarySpec):
        st = binary_update(x, p.prior)
        va = max(st.sigma_a_sq, VARIANCE_FLOOR)
        vb = max(st.sigma_b_sq, VARIANCE_FLOOR)
        return quad - log_gaussian_density(x, p.prior.a, va) - log_gaussian_density(x, p.prior.b, vb)
    return quad + cost(x, p.prior)


def scalar_map_solve(
    p: ScalarProblem,
    x_init: float | None = None,
    tol: float = 1e-9,
    max_iter: int = 500,
) -> SolveReport:
    """Joint MAP of estimate and prior variances by coordinate ascent.

    Each iteration refreshes the prior's variances at the current estimate,
    then combines the emitted Gaussian message with the likelihood.  Stops
    once the estimate moves by less than ``tol``.  The likelihood mean is
    the default starting point: it sits inside the zero-cost region whenever
    the mean is feasible, which makes the feasible case an immediate fixed
    point.
    """
    if not tol > 0.0 or max_iter < 1:
        raise InvalidProblem(f"bad solver settings: tol={tol!r}, max_iter={max_iter!r}")
    x = p.mu if x_init is None else float(x_init)
    if not math.isfinite(x):
        raise InvalidProblem(f"non-finite x_init {x_init!r}")
    likelihood = GaussianMsg(p.mu, p.s_sq)
    trace = [_objective(x, p)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x_new = multiply(likelihood, prior_message(x, p.prior)).mean
        trace.append(_objective(x_new, p))
        if abs(x_new - x) < tol:
            x = x_new
            converged = True
            break
        x = x_new
    return SolveReport(x_hat=x, iterations=iterations, objective_trace=trace, converged=converged)


def feasibility_threshold(mu: float, prior: ConstraintPrior) -> float:
    """Minimal likelihood variance for which the MAP estimate is feasible.

    Zero when ``mu`` is already in the feasible set; otherwise the distance
    to the (nearest) boundary divided by 2*gamma.  Only defined for box and
    half-space priors.
    """
    if isinstance(prior, BoxSpec):
        if prior.a <= mu <= prior.b:
            return 0.0
        return min(abs(prior.a - mu), abs(prior.b - mu)) / (2.0 * prior.gamma)
    if isinstance(prior, HalfSpaceSpec):
        feasible = mu >= prior.a if prior.side is Side.RIGHT_OF else mu <= prior.a
        if feasible:
            return 0.0
        return abs(prior.a - mu) / (2.0 * prior.gamma)
    raise NotApplicable(f"no feasibility threshold for {type(prior).__name__}")


def _cost_grid(xs: np.ndarray, prior: ConstraintPrior) -> np.ndarray:
    if isinstance(prior, LaplaceSpec):
        return prior.gamma * np.abs(xs - prior.a)
    if isinstance(prior, BoxSpec):
        return prior.gamma * (np.abs(xs - prior.a) + np.abs(xs - prior.b) - abs(prior.b - prior.a))
    if isinstance(prior, HalfSpaceSpec):
        d = xs - prior.a
        if prior.side is Side.RIGHT_OF:
            return prior.gamma * (np.abs(d) - d)
        return prior.gamma * (np.abs(d) + d)
    raise NotApplicable(f"no closed-form cost for {type(prior).__name__}")


def brute_force_map(p: ScalarProblem, lo: float, hi: float, step: float) -> float:
    """Grid-search argmin of the exact objective; ties break to the smallest x."""
    if not (lo < hi and step > 0.0):
        raise InvalidProblem(f"bad grid: lo={lo!r}, hi={hi!r}, step={step!r}")
    n = int(math.floor((hi - lo) / step)) + 1
    xs = lo + step * np.arange(n)
    obj = (xs - p.mu) ** 2 / (2.0 * p.s_sq) + _cost_grid(xs, p.prior)
    return float(xs[int(np.argmin(obj))])


def _oracle_range(p: ScalarProblem) -> Tuple[float, float]:
    anchors = [p.mu]
    if isinstance(p.prior, (LaplaceSpec, HalfSpaceSpec)):
        anchors.append(p.prior.a)
    elif isinstance(p.prior, BoxSpec):
        anchors.extend([p.prior.a, p.prior.b])
    return min(anchors) - 1.0, max(anchors) + 1.0


def characteristic_sweep(
    prior: ConstraintPrior,
    mu_grid: Sequence[float],
    s_sq_list: Sequence[float],
    tol: float = 1e-9,
    max_iter: int = 5000,
    oracle_step: float = 1e-4,
) -> Tuple[List[dict], dict]:
    """Solve the scalar problem over a grid of likelihood means and variances.

    Returns CSV-ready rows (mu, s_sq, x_hat, oracle_x_hat, feasible_flag)
    and a summary dict with convergence counts and per-mean thresholds.
    The iteration budget is raised here because coordinate ascent slows down
    near the feasibility threshold.
    """
    if len(mu_grid) == 0 or len(s_sq_list) == 0:
        raise InvalidProblem("mu_grid and s_sq_list must be non-empty")
    rows = []
    nonconverged = 0
    for s_sq in s_sq_list:
        for mu in mu_grid:
            problem = ScalarProblem(float(mu), float(s_sq), prior)
            report = scalar_map_solve(problem, tol=tol, max_iter=max_iter)
            if not report.converged:
                nonconverged += 1
            lo, hi = _oracle_range(problem)
            try:
                threshold = feasibility_threshold(float(mu), prior)
                flag = int(float(s_sq) >= threshold)
            except NotApplicable:
                flag = -1
            rows.append(
                {
                    "mu": float(mu),
                    "s_sq": float(s_sq),
                    "x_hat": report.x_hat,
                    "oracle_x_hat": brute_force_map(problem, lo, hi, oracle_step),
                    "feasible_flag": flag,
                }
            )
    summary = {
        "rows": len(rows),
        "nonconverged": nonconverged,
        "all_converged": nonconverged == 0,
    }
    return rows, summary

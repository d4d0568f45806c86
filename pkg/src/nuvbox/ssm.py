"""Linear state-space backbone and exact Gaussian smoother.

The model is the deterministic chain

    x_k = A x_{k-1} + B u_k,    y_k = C x_k,    k = 1..K,

with a Gaussian prior on x_0.  All softness enters through Gaussian factors
attached to scalar input channels, scalar output projections, or whole
output vectors.  :func:`smooth` computes the exact joint Gaussian posterior
by a backward information filter followed by a forward moment pass; this
form stays well-behaved when factors are near-Dirac (floored NUV variances
give precisions around 1e12).  :func:`dense_solve` is the O(K^3) reference
that stacks everything into one normal-equations system.

Factors are accumulated in precision form (per-index precision and
precision-weighted mean), so registering a flat factor is an exact no-op
and repeated factors on one channel combine by plain addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

from nuvbox.errors import DimensionMismatch, UnderdeterminedModel
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, GaussianVecMsg

# Absolute precision below which a direction counts as unconstrained.
_SINGULAR_EIG = 1e-13


def _as_matrix(a, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionMismatch(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionMismatch(f"{name} must have {cols} columns, got {m.shape[1]}")
    return m


@dataclass(frozen=True)
class LinearSSM:
    """Time-invariant linear system with horizon K and Gaussian initial state."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: int
    x0: Optional[GaussianVecMsg] = None

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        _as_matrix(self.A, n, n, "A")
        B = _as_matrix(self.B, n, None, "B")
        C = _as_matrix(self.C, None, n, "C")
        if self.K < 1:
            raise DimensionMismatch(f"horizon K must be >= 1, got {self.K}")
        x0 = self.x0
        if x0 is None:
            x0 = GaussianVecMsg(np.zeros(n), 1e6 * np.eye(n))
        if x0.dim != n:
            raise DimensionMismatch(f"x0 has dim {x0.dim}, state dim is {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


class FactorSet:
    """Per-index Gaussian factors feeding the smoother.

    Input factors attach to scalar input channels u_{k,j}; output factors
    attach to scalar channels y_{k,i} or, more generally, to projections
    w . y_k (used by polyhedron constraints); vector observations attach to
    whole output vectors.  Time indices k run from 1 to K.
    """

    def __init__(self, model: LinearSSM):
        self.model = model
        K, m, p = model.K, model.m, model.p
        self.in_prec = np.zeros((K, m))
        self.in_wmean = np.zeros((K, m))
        self.out_prec = np.zeros((K, p))
        self.out_wmean = np.zeros((K, p))
        self.output_dirs: List[Tuple[int, np.ndarray, GaussianMsg]] = []
        self.output_obs: Dict[int, GaussianVecMsg] = {}

    def _check_k(self, k: int):
        if not 1 <= k <= self.model.K:
            raise DimensionMismatch(f"time index {k} outside 1..{self.model.K}")

    def add_input(self, k: int, j: int, msg: GaussianMsg) -> None:
        self._check_k(k)
        if not 0 <= j < self.model.m:
            raise DimensionMismatch(f"input channel {j} outside 0..{self.model.m - 1}")
        self.in_prec[k - 1, j] += msg.precision
        self.in_wmean[k - 1, j] += msg.weighted_mean

    def add_output(self, k: int, i: int, msg: GaussianMsg) -> None:
        self._check_k(k)
        if not 0 <= i < self.model.p:
            raise DimensionMismatch(f"output channel {i} outside 0..{self.model.p - 1}")
        self.out_prec[k - 1, i] += msg.precision
        self.out_wmean[k - 1, i] += msg.weighted_mean

    def bulk_input(self, j: int, k_lo: int, prec: np.ndarray, wmean: np.ndarray) -> None:
        """Accumulate precision-form factors on channel j for k_lo, k_lo+1, ..."""
        self._check_k(k_lo)
        self._check_k(k_lo + len(prec) - 1)
        self.in_prec[k_lo - 1 : k_lo - 1 + len(prec), j] += prec
        self.in_wmean[k_lo - 1 : k_lo - 1 + len(prec), j] += wmean

    def bulk_output(self, i: int, k_lo: int, prec: np.ndarray, wmean: np.ndarray) -> None:
        self._check_k(k_lo)
        self._check_k(k_lo + len(prec) - 1)
        self.out_prec[k_lo - 1 : k_lo - 1 + len(prec), i] += prec
        self.out_wmean[k_lo - 1 : k_lo - 1 + len(prec), i] += wmean

    def add_output_dir(self, k: int, w: np.ndarray, msg: GaussianMsg) -> None:
        self._check_k(k)
        w = np.asarray(w, dtype=float)
        if w.shape != (self.model.p,):
            raise DimensionMismatch(f"direction shape {w.shape}, expected ({self.model.p},)")
        self.output_dirs.append((k, w, msg))

    def add_output_obs(self, k: int, obs: GaussianVecMsg) -> None:
        self._check_k(k)
        if obs.dim != self.model.p:
            raise DimensionMismatch(f"observation dim {obs.dim}, expected {self.model.p}")
        self.output_obs[k] = obs

    def has_finite_factor(self) -> bool:
        if np.any(self.in_prec > 0.0) or np.any(self.out_prec > 0.0):
            return True
        if any(m.precision > 0.0 for _, _, m in self.output_dirs):
            return True
        return bool(self.output_obs)

    def state_quadratics(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-step output information pulled back to the state: Q[k-1], q[k-1]."""
        K, n, C = self.model.K, self.model.n, self.model.C
        outers = np.einsum("pi,pj->pij", C, C)
        Q = np.tensordot(self.out_prec, outers, axes=([1], [0]))
        q = self.out_wmean @ C
        for k, w, msg in self.output_dirs:
            prec = msg.precision
            if prec == 0.0:
                continue
            row = w @ C
            Q[k - 1] += prec * np.outer(row, row)
            q[k - 1] += msg.weighted_mean * row
        for k, obs in self.output_obs.items():
            lam = np.linalg.inv(_floor_spd(obs.covariance))
            Q[k - 1] += C.T @ lam @ C
            q[k - 1] += C.T @ (lam @ obs.mean)
        return Q, q


@dataclass
class Posterior:
    """Means and variances of all inputs, states, and outputs.

    ``x_mean[0]`` is the initial state; time index k maps to row k for
    states and row k-1 for inputs and outputs.  Full per-step covariances
    are kept so that projection variances can be recovered exactly.
    """

    u_mean: np.ndarray
    u_var: np.ndarray
    x_mean: np.ndarray
    x_var: np.ndarray
    y_mean: np.ndarray
    y_var: np.ndarray
    state_cov: np.ndarray = field(repr=False, default=None)
    input_cov: np.ndarray = field(repr=False, default=None)
    _C: np.ndarray = field(repr=False, default=None)

    def output_dir_moments(self, k: int, w: np.ndarray) -> Tuple[float, float]:
        """Mean and variance of the projection w . y_k."""
        row = np.asarray(w, dtype=float) @ self._C
        mean = float(row @ self.x_mean[k])
        var = float(row @ self.state_cov[k] @ row)
        return mean, max(var, 0.0)

    def input_moments(self, k: int, j: int) -> Tuple[float, float]:
        return float(self.u_mean[k - 1, j]), float(self.u_var[k - 1, j])


def _floor_spd(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    vals = np.maximum(vals, VARIANCE_FLOOR)
    return (vecs * vals) @ vecs.T


def _prior_precision(x0: GaussianVecMsg) -> Tuple[np.ndarray, np.ndarray]:
    cov = _floor_spd(x0.covariance)
    W0 = np.linalg.inv(cov)
    return W0, W0 @ x0.mean


def _smoother_core(A, B, Rd, rd, Q, q, W0, xi0):
    """Backward information pass + forward moment pass.

    Returns (x_mean, state_cov, u_mean, input_cov, err) where err >= 0 flags
    the time index whose input block carries no information (-1: ok,
    -2: initial state undetermined).
    """
    K = Rd.shape[0]
    n = A.shape[0]
    m = B.shape[1]
    At = A.T.copy()
    Bt = B.T.copy()
    eye_m = np.eye(m)

    x_mean = np.zeros((K + 1, n))
    state_cov = np.zeros((K + 1, n, n))
    u_mean = np.zeros((K, m))
    input_cov = np.zeros((K, m, m))
    Pis = np.zeros((K, m, m))
    Gains = np.zeros((K, m, n))
    Pisv = np.zeros((K, m))

    Jk = Q[K - 1].copy()
    ek = q[K - 1].copy()
    for k in range(K, 0, -1):
        JB = Jk @ B
        P = Bt @ JB
        for j in range(m):
            P[j, j] += Rd[k - 1, j]
            if P[j, j] <= 1e-13:
                return x_mean, state_cov, u_mean, input_cov, k
        Pik = np.linalg.inv(P)
        big = np.max(np.abs(P)) * np.max(np.abs(Pik))
        resid = np.max(np.abs(P @ Pik - eye_m))
        if not np.isfinite(resid) or resid > 1e-8 * max(1.0, big):
            return x_mean, state_cov, u_mean, input_cov, k
        s = ek @ B + rd[k - 1]
        PiJBt = Pik @ JB.T
        Jmid = Jk - JB @ PiJBt
        Pis_k = Pik @ s
        emid = ek - JB @ Pis_k
        Jk = At @ Jmid @ A
        ek = emid @ A
        if k >= 2:
            Jk = Jk + Q[k - 2]
            ek = ek + q[k - 2]
        Jk = 0.5 * (Jk + Jk.T)
        Pis[k - 1] = Pik
        Gains[k - 1] = PiJBt @ A
        Pisv[k - 1] = Pis_k

    W = W0 + Jk
    W = 0.5 * (W + W.T)
    Sigma = np.linalg.inv(W)
    bigW = np.max(np.abs(W)) * np.max(np.abs(Sigma))
    residW = np.max(np.abs(W @ Sigma - np.eye(n)))
    if not np.isfinite(residW) or residW > 1e-8 * max(1.0, bigW):
        return x_mean, state_cov, u_mean, input_cov, -2
    mean = Sigma @ (xi0 + ek)

    x_mean[0] = mean
    state_cov[0] = Sigma
    for k in range(K):
        F = -Gains[k]
        Pik = Pis[k]
        ubar = Pisv[k] + F @ mean
        FS = F @ Sigma
        input_cov[k] = Pik + FS @ F.T
        G = A + B @ F
        mean = A @ mean + B @ ubar
        Sigma = G @ Sigma @ G.T + (B @ Pik) @ Bt
        Sigma = 0.5 * (Sigma + Sigma.T)
        u_mean[k] = ubar
        x_mean[k + 1] = mean
        state_cov[k + 1] = Sigma
    return x_mean, state_cov, u_mean, input_cov, -1


if numba is not None:
    _smoother_core_fast = numba.njit(cache=True, fastmath=False)(_smoother_core)
else:  # pragma: no cover
    _smoother_core_fast = _smoother_core


def smooth(model: LinearSSM, factors: FactorSet) -> Posterior:
    """Exact Gaussian posterior of all u_k, x_k, y_k given the factor set.

    Backward pass: cost-to-go information matrices eliminating each input
    against its own factors and the future.  Forward pass: moment-form
    marginals, recovering input and state posteriors.  Linear in K.  Raises
    :class:`UnderdeterminedModel` when some direction carries no
    information at all.
    """
    if factors.model is not model:
        _check_same_dims(model, factors.model)
    if not factors.has_finite_factor():
        raise UnderdeterminedModel("factor set contains no finite-variance factor")
    C, K = model.C, model.K
    Q, q = factors.state_quadratics()
    W0, xi0 = _prior_precision(model.x0)
    x_mean, state_cov, u_mean, input_cov, err = _smoother_core_fast(
        np.ascontiguousarray(model.A),
        np.ascontiguousarray(model.B),
        factors.in_prec,
        factors.in_wmean,
        Q,
        q,
        W0,
        xi0,
    )
    if err == -2:
        raise UnderdeterminedModel("initial state has an unconstrained direction")
    if err >= 0:
        raise UnderdeterminedModel(f"input u_{err} has an unconstrained direction")

    x_var = state_cov.diagonal(axis1=1, axis2=2)
    u_var = input_cov.diagonal(axis1=1, axis2=2)
    y_mean = x_mean[1:] @ C.T
    y_var = np.einsum("pi,kij,pj->kp", C, state_cov[1:], C)
    return Posterior(
        u_mean=u_mean,
        u_var=np.maximum(u_var, 0.0),
        x_mean=x_mean,
        x_var=np.maximum(x_var, 0.0),
        y_mean=y_mean,
        y_var=np.maximum(y_var, 0.0),
        state_cov=state_cov,
        input_cov=input_cov,
        _C=C,
    )


def _check_same_dims(a: LinearSSM, b: LinearSSM) -> None:
    if (a.n, a.m, a.p, a.K) != (b.n, b.m, b.p, b.K):
        raise DimensionMismatch("factor set was built for a model of different dimensions")


def dense_solve(model: LinearSSM, factors: FactorSet) -> Posterior:
    """Reference solver: one stacked normal-equations system over (x_0, u_1..u_K)."""
    if factors.model is not model:
        _check_same_dims(model, factors.model)
    if not factors.has_finite_factor():
        raise UnderdeterminedModel("factor set contains no finite-variance factor")
    A, B, C, K = model.A, model.B, model.C, model.K
    n, m = model.n, model.m
    N = n + K * m

    # Propagation rows: x_k = T[k] z with z = (x_0, u_1, ..., u_K).
    T = np.zeros((K + 1, n, N))
    T[0, :, :n] = np.eye(n)
    for k in range(1, K + 1):
        T[k] = A @ T[k - 1]
        T[k][:, n + (k - 1) * m : n + k * m] += B

    H = np.zeros((N, N))
    rhs = np.zeros(N)
    W0, xi0 = _prior_precision(model.x0)
    H[:n, :n] += W0
    rhs[:n] += xi0
    for k in range(1, K + 1):
        for j in range(m):
            prec = factors.in_prec[k - 1, j]
            if prec == 0.0:
                continue
            idx = n + (k - 1) * m + j
            H[idx, idx] += prec
            rhs[idx] += factors.in_wmean[k - 1, j]
        for i in range(model.p):
            prec = factors.out_prec[k - 1, i]
            if prec == 0.0:
                continue
            row = C[i] @ T[k]
            H += prec * np.outer(row, row)
            rhs += factors.out_wmean[k - 1, i] * row
    for k, w, msg in factors.output_dirs:
        prec = msg.precision
        if prec == 0.0:
            continue
        row = (w @ C) @ T[k]
        H += prec * np.outer(row, row)
        rhs += msg.weighted_mean * row
    for k, obs in factors.output_obs.items():
        lam = np.linalg.inv(_floor_spd(obs.covariance))
        rows = C @ T[k]
        H += rows.T @ lam @ rows
        rhs += rows.T @ (lam @ obs.mean)

    H = 0.5 * (H + H.T)
    eigs = np.linalg.eigvalsh(H)
    if eigs[0] <= _SINGULAR_EIG:
        raise UnderdeterminedModel(f"stacked system has an unconstrained direction (min eig {eigs[0]:.3e})")
    cov = np.linalg.inv(H)
    z = cov @ rhs

    x_mean = np.einsum("kij,j->ki", T, z)
    state_cov = np.einsum("kis,st,kjt->kij", T, cov, T)
    x_var = state_cov.diagonal(axis1=1, axis2=2)
    u_mean = z[n:].reshape(K, m)
    input_cov = np.stack(
        [cov[n + i * m : n + (i + 1) * m, n + i * m : n + (i + 1) * m] for i in range(K)]
    )
    u_var = input_cov.diagonal(axis1=1, axis2=2)
    y_mean = x_mean[1:] @ C.T
    y_var = np.einsum("pi,kij,pj->kp", C, state_cov[1:], C)
    return Posterior(
        u_mean=u_mean,
        u_var=np.maximum(u_var, 0.0),
        x_mean=x_mean,
        x_var=np.maximum(x_var, 0.0),
        y_mean=y_mean,
        y_var=np.maximum(y_var, 0.0),
        state_cov=state_cov,
        input_cov=input_cov,
        _C=C,
    )


def simulate(model: LinearSSM, u: np.ndarray) -> np.ndarray:
    """Deterministic rollout from the initial-state mean; returns y_1..y_K."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != (model.K, model.m):
        raise DimensionMismatch(f"input sequence shape {u.shape}, expected ({model.K}, {model.m})")
    x = model.x0.mean.copy()
    y = np.zeros((model.K, model.p))
    for k in range(model.K):
        x = model.A @ x + model.B @ u[k]
        y[k] = model.C @ x
    return y


def lowpass_model(K: int, omega0: float = 2.0 * math.pi * 0.05, x0: Optional[GaussianVecMsg] = None) -> LinearSSM:
    """Default third-order low-pass plant: continuous triple pole at -omega0.

    Discretized exactly (matrix exponential, zero-order hold, unit sample
    time) with unity DC gain; its step response is monotone, which makes
    corridor and tracking examples well-behaved.
    """
    Ac = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-omega0**3, -3.0 * omega0**2, -3.0 * omega0],
        ]
    )
    Bc = np.array([[0.0], [0.0], [1.0]])
    aug = np.zeros((4, 4))
    aug[:3, :3] = Ac
    aug[:3, 3:] = Bc
    M = scipy.linalg.expm(aug)
    Ad = M[:3, :3]
    Bd = M[:3, 3:]
    C = np.array([[omega0**3, 0.0, 0.0]])
    return LinearSSM(A=Ad, B=Bd, C=C, K=K, x0=x0)

"""Convex polyhedron constraints on vector outputs.

A polyhedron is an intersection of half-spaces applied to projections of
the output onto unit normal vectors.  Each face behaves exactly like the
scalar half-space prior; the smoother consumes the per-face messages
through projection rows attached as scalar output channels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from nuvbox.errors import DimensionMismatch
from nuvbox.gaussian import GaussianMsg
from nuvbox.priors import HalfSpaceSpec, Side, cost, halfspace_update


@dataclass(frozen=True)
class PolyhedronSpec:
    """L half-space faces: normals (L x d), offsets (L,), one side flag per face."""

    normals: np.ndarray
    offsets: np.ndarray
    sides: Sequence[Side]
    gamma: float

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        if normals.ndim != 2:
            raise DimensionMismatch(f"normals must be L x d, got shape {normals.shape}")
        L = normals.shape[0]
        if offsets.shape != (L,) or len(self.sides) != L:
            raise DimensionMismatch("normals, offsets, and sides must agree on the face count L")
        if not all(isinstance(s, Side) for s in self.sides):
            raise ValueError("sides must be Side values")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero-length normal vector")
        if np.any(np.abs(norms - 1.0) > 1e-6):
            warnings.warn("normal vectors renormalized to unit length", stacklevel=2)
        object.__setattr__(self, "normals", normals / norms[:, None])
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "sides", tuple(self.sides))

    @property
    def n_faces(self) -> int:
        return self.normals.shape[0]

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def face(self, ell: int) -> HalfSpaceSpec:
        return HalfSpaceSpec(a=float(self.offsets[ell]), side=self.sides[ell], gamma=self.gamma)

    def violations(self, y: np.ndarray) -> np.ndarray:
        """Per-face constraint violation (positive where infeasible)."""
        proj = self._project(y)
        out = np.empty(self.n_faces)
        for ell, side in enumerate(self.sides):
            d = proj[ell] - self.offsets[ell]
            out[ell] = max(-d, 0.0) if side is Side.RIGHT_OF else max(d, 0.0)
        return out

    def contains(self, y: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.violations(y) <= tol))

    def _project(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise DimensionMismatch(f"point shape {y.shape}, expected ({self.dim},)")
        return self.normals @ y


def polyhedron_cost(y: np.ndarray, spec: PolyhedronSpec) -> float:
    """Sum of per-face half-space costs of the projections; zero inside."""
    proj = spec._project(y)
    return float(sum(cost(proj[ell], spec.face(ell)) for ell in range(spec.n_faces)))


def polyhedron_update(y_hat: np.ndarray, spec: PolyhedronSpec) -> List[GaussianMsg]:
    """One half-space message per face, evaluated at the projected estimate."""
    proj = spec._project(y_hat)
    return [halfspace_update(proj[ell], spec.face(ell)) for ell in range(spec.n_faces)]


def triangle_spec(gamma: float = 1.0) -> PolyhedronSpec:
    """Example triangle used by the cost-surface and waypoint demos."""
    s13, s5 = np.sqrt(13.0), np.sqrt(5.0)
    return PolyhedronSpec(
        normals=np.array([[2.0, 3.0], [-1.0, 2.0], [0.0, 1.0]]) / np.array([s13, s5, 1.0])[:, None],
        offsets=np.array([s13, s5, 5.0]),
        sides=(Side.RIGHT_OF, Side.RIGHT_OF, Side.LEFT_OF),
        gamma=gamma,
    )

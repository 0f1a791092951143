"""Symmetric positive definite matrices with the affine-invariant metric.

d(A, B) = || log(A^{-1/2} B A^{-1/2}) ||_F.  Matrix functions go through the
cyclic Jacobi kernel; orders above 16 are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ValidationError
from .base import DEFAULT_TOL, GeodesicRay, Point, Space, _frozen

SYMMETRY_TOL = 1e-12
MAX_ORDER = 16


@dataclass(frozen=True)
class Congruence:
    """X -> G^T X G with G invertible."""

    matrix: np.ndarray


def sym_funm(A, fn):
    """Apply a scalar function to a symmetric matrix through its eigenvalues."""
    w, V = kernels.jacobi_eigh(A)
    M = (V * fn(w)) @ V.T
    return 0.5 * (M + M.T)


class SPDSpace(Space):
    kind = "spd"
    has_tangent = True

    def __init__(self, dimension: int, tol: float = DEFAULT_TOL):
        super().__init__(tol)
        dimension = int(dimension)
        if not 1 <= dimension <= MAX_ORDER:
            raise ValidationError(f"SPD order must be in [1, {MAX_ORDER}]")
        self.dimension = dimension

    @property
    def id(self) -> str:
        return f"spd:{self.dimension}"

    def descriptor(self) -> dict:
        return {"kind": "spd", "dimension": self.dimension}

    @property
    def identity(self) -> Point:
        return self._wrap(np.eye(self.dimension))

    def validate_payload(self, payload):
        n = self.dimension
        A = np.array(payload, dtype=float)
        if A.ndim == 1 and A.shape[0] == n * n:
            A = A.reshape(n, n)
        if A.shape != (n, n):
            raise ValidationError(f"SPD point must be {n}x{n}, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValidationError("SPD point has non-finite entries")
        if np.max(np.abs(A - A.T)) > SYMMETRY_TOL:
            raise ValidationError("SPD point is not symmetric")
        A = 0.5 * (A + A.T)
        w, _ = kernels.jacobi_eigh(A)
        if not w[0] > 0.0:
            raise ValidationError("SPD point is not positive definite")
        A.setflags(write=False)
        return A

    def payload_to_json(self, p):
        return [[float(v) for v in row] for row in p.payload]

    def payload_from_json(self, obj):
        return self.point(obj)

    def random_point(self, rng, center=None, scale=1.0):
        n = self.dimension
        G = rng.standard_normal((n, n))
        S = 0.5 * (G + G.T)
        S *= scale * rng.random() / max(float(np.linalg.norm(S)), 1e-300)
        if center is None:
            return self._wrap(sym_funm(S, np.exp))
        L = np.linalg.cholesky(center.payload)
        return self.exp(center, L @ S @ L.T)

    def _distance(self, p, q):
        if p is q or p.payload.tobytes() == q.payload.tobytes():
            return 0.0  # the eigen-route leaves ~1e-16 for equal inputs
        return kernels.spd_dist(p.payload, q.payload)

    def _geodesic(self, a, b, t):
        return self._wrap(kernels.spd_geodesic(a.payload, b.payload, t))

    def log(self, p, q):
        return kernels.spd_log(p.payload, q.payload)

    def exp(self, p, v):
        return self._wrap(kernels.spd_exp(p.payload, np.asarray(v, dtype=float)))

    def inner(self, p, u, v):
        return kernels.spd_inner(p.payload, np.asarray(u, dtype=float), np.asarray(v, dtype=float))

    # rays (no Busemann closed form is provided for this space)
    def make_ray(self, origin, direction) -> GeodesicRay:
        self.check(origin)
        V = np.array(direction, dtype=float)
        if V.shape != (self.dimension, self.dimension):
            raise ValidationError("ray direction has the wrong shape")
        if np.max(np.abs(V - V.T)) > SYMMETRY_TOL:
            raise ValidationError("ray direction must be symmetric")
        n2 = self.inner(origin, V, V)
        if not (n2 > 0.0) or not math.isfinite(n2):
            raise ValidationError("ray direction is not normalizable")
        return GeodesicRay(self.id, origin, _frozen(V / math.sqrt(n2)))

    def ray_point(self, ray, t):
        return self.exp(ray.origin, t * np.asarray(ray.direction))

    # isometries
    def make_isometry(self, descriptor) -> Congruence:
        G = np.array(descriptor["congruence"], dtype=float)
        if G.shape != (self.dimension, self.dimension):
            raise ValidationError("congruence has the wrong shape")
        if abs(np.linalg.det(G)) < 1e-12:
            raise ValidationError("congruence matrix is not invertible")
        return Congruence(_frozen(G))

    def apply_isometry(self, iso, x):
        G = iso.matrix
        Y = G.T @ np.asarray(x.payload) @ G
        return self._wrap(0.5 * (Y + Y.T))

    def isometry_to_json(self, iso):
        return {"congruence": iso.matrix.tolist()}

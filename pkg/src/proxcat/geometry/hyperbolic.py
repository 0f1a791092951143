"""Hyperbolic space H^n in the hyperboloid model.

Points are vectors (t, x_1, ..., x_n) with Minkowski square -1 and t > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ValidationError
from .base import DEFAULT_TOL, GeodesicRay, Point, Space, _frozen

SHEET_TOL = 1e-10


def mdot(u, v) -> float:
    """Minkowski bilinear form -u0 v0 + sum_i ui vi."""
    u = np.asarray(u)
    v = np.asarray(v)
    return float(-u[0] * v[0] + np.dot(u[1:], v[1:]))


def _to_sheet(y):
    y = np.asarray(y, dtype=float)
    return y / math.sqrt(-mdot(y, y))


@dataclass(frozen=True)
class LorentzIsometry:
    """x -> M x with M preserving the Minkowski form and the upper sheet."""

    matrix: np.ndarray


class HyperbolicSpace(Space):
    kind = "hyperbolic"
    has_tangent = True

    def __init__(self, dimension: int, tol: float = DEFAULT_TOL):
        super().__init__(tol)
        dimension = int(dimension)
        if dimension < 1:
            raise ValidationError("dimension must be >= 1")
        self.dimension = dimension
        self.J = np.diag([-1.0] + [1.0] * dimension)

    @property
    def id(self) -> str:
        return f"hyperbolic:{self.dimension}"

    def descriptor(self) -> dict:
        return {"kind": "hyperbolic", "dimension": self.dimension}

    @property
    def origin(self) -> Point:
        e = np.zeros(self.dimension + 1)
        e[0] = 1.0
        return self._wrap(e)

    def validate_payload(self, payload):
        p = np.array(payload, dtype=float)
        if p.ndim != 1 or p.shape[0] != self.dimension + 1:
            raise ValidationError(
                f"hyperboloid point must have length {self.dimension + 1}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("hyperboloid point has non-finite entries")
        if not p[0] > 0.0:
            raise ValidationError("hyperboloid point must lie on the upper sheet (t > 0)")
        # absolute tolerance, scaled for points far from the origin
        if abs(mdot(p, p) + 1.0) > SHEET_TOL * max(1.0, p[0] * p[0]):
            raise ValidationError("hyperboloid point violates <p,p>_M = -1")
        p.setflags(write=False)
        return p

    def lift(self, x) -> Point:
        """Point of the sheet above the spatial coordinates ``x``."""
        x = np.asarray(x, dtype=float)
        return self._wrap(np.concatenate([[math.sqrt(1.0 + float(np.dot(x, x)))], x]))

    def payload_to_json(self, p):
        return [float(v) for v in p.payload]

    def payload_from_json(self, obj):
        return self.point(obj)

    def random_point(self, rng, center=None, scale=1.0):
        c = self.origin if center is None else center
        v = self.tangent_projection(c, rng.standard_normal(self.dimension + 1))
        n = self.norm(c, v)
        if n == 0.0:
            return c
        r = scale * rng.random()
        return self.exp(c, v * (r / n))

    def _distance(self, p, q):
        return kernels.hyp_dist(p.payload, q.payload)

    def _geodesic(self, a, b, t):
        return self._wrap(kernels.hyp_geodesic(a.payload, b.payload, t))

    # tangent structure
    def tangent_projection(self, p, v):
        p = np.asarray(p.payload)
        v = np.asarray(v, dtype=float)
        return v + mdot(v, p) * p

    def log(self, p, q):
        d = self._distance(p, q)
        if d == 0.0:
            return np.zeros(self.dimension + 1)
        pp = np.asarray(p.payload)
        # q + <p,q> p rewritten through v = q - p to avoid cancellation
        v = np.asarray(q.payload) - pp
        u = v - (0.5 * mdot(v, v)) * pp
        u = u + mdot(u, pp) * pp
        nu = math.sqrt(max(mdot(u, u), 0.0))
        if nu == 0.0:
            return np.zeros(self.dimension + 1)
        return u * (d / nu)

    def exp(self, p, v):
        v = np.asarray(v, dtype=float)
        r = math.sqrt(max(mdot(v, v), 0.0))
        pp = np.asarray(p.payload)
        if r == 0.0:
            return p
        return self._wrap(_to_sheet(math.cosh(r) * pp + (math.sinh(r) / r) * v))

    def inner(self, p, u, v):
        return mdot(u, v)

    def project_segment(self, a, b, x):
        L = self._distance(a, b)
        if L == 0.0:
            return a
        v = self.log(a, b) / L
        alpha = -mdot(x.payload, a.payload)
        beta = -mdot(x.payload, v)
        ratio = min(max(-beta / alpha, -1.0), 1.0)
        if ratio <= 0.0:
            return a
        s = math.atanh(ratio) if ratio < 1.0 else math.inf
        if s >= L:
            return b
        return self._geodesic(a, b, s / L)

    # rays and Busemann functions
    def make_ray(self, origin, direction) -> GeodesicRay:
        self.check(origin)
        d = np.array(direction, dtype=float)
        if d.shape != (self.dimension + 1,):
            raise ValidationError("ray direction has the wrong shape")
        u = self.tangent_projection(origin, d)
        n2 = mdot(u, u)
        if not (n2 > 0.0) or not math.isfinite(n2):
            raise ValidationError("ray direction is not normalizable")
        return GeodesicRay(self.id, origin, _frozen(u / math.sqrt(n2)))

    def ray_point(self, ray, t):
        p = np.asarray(ray.origin.payload)
        return self._wrap(_to_sheet(math.cosh(t) * p + math.sinh(t) * np.asarray(ray.direction)))

    def _ideal(self, ray):
        return np.asarray(ray.origin.payload) + np.asarray(ray.direction)

    def busemann(self, ray, x):
        return math.log(-mdot(x.payload, self._ideal(ray)))

    def busemann_step(self, ray, x, s):
        n = self._ideal(ray)
        xp = np.asarray(x.payload)
        c = mdot(xp, n)
        v = (n + c * xp) / abs(c)
        return self._wrap(_to_sheet(math.cosh(s) * xp + math.sinh(s) * v))

    # isometries
    def make_isometry(self, descriptor) -> LorentzIsometry:
        M = np.array(descriptor["matrix"], dtype=float)
        k = self.dimension + 1
        if M.shape != (k, k):
            raise ValidationError("isometry has the wrong shape")
        if not np.allclose(M.T @ self.J @ M, self.J, atol=1e-9):
            raise ValidationError("matrix does not preserve the Minkowski form")
        if not M[0, 0] > 0.0:
            raise ValidationError("matrix does not preserve the upper sheet")
        return LorentzIsometry(_frozen(M))

    def apply_isometry(self, iso, x):
        return self._wrap(_to_sheet(iso.matrix @ np.asarray(x.payload)))

    def isometry_to_json(self, iso):
        return {"matrix": iso.matrix.tolist()}

    @staticmethod
    def boost(dimension: int, axis: int, rapidity: float) -> np.ndarray:
        """Lorentz boost along spatial ``axis`` (1-based)."""
        M = np.eye(dimension + 1)
        c, s = math.cosh(rapidity), math.sinh(rapidity)
        M[0, 0] = c
        M[0, axis] = s
        M[axis, 0] = s
        M[axis, axis] = c
        return M

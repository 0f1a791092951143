"""Euclidean space R^n."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ValidationError
from .base import DEFAULT_TOL, GeodesicRay, Point, Space, _frozen


@dataclass(frozen=True)
class EuclideanIsometry:
    """x -> Q x + b with Q orthogonal."""

    orthogonal: np.ndarray
    translation: np.ndarray


class EuclideanSpace(Space):
    kind = "euclidean"
    has_tangent = True

    def __init__(self, dimension: int, tol: float = DEFAULT_TOL):
        super().__init__(tol)
        dimension = int(dimension)
        if dimension < 1:
            raise ValidationError("dimension must be >= 1")
        self.dimension = dimension

    @property
    def id(self) -> str:
        return f"euclidean:{self.dimension}"

    def descriptor(self) -> dict:
        return {"kind": "euclidean", "dimension": self.dimension}

    def validate_payload(self, payload):
        a = np.array(payload, dtype=float)
        if a.ndim != 1 or a.shape[0] != self.dimension:
            raise ValidationError(
                f"Euclidean point must have length {self.dimension}, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("Euclidean point has non-finite entries")
        a.setflags(write=False)
        return a

    def payload_to_json(self, p: Point):
        return [float(v) for v in p.payload]

    def payload_from_json(self, obj) -> Point:
        return self.point(obj)

    def random_point(self, rng, center=None, scale=1.0) -> Point:
        v = scale * rng.standard_normal(self.dimension)
        if center is not None:
            v = v + center.payload
        return self._wrap(v)

    def _distance(self, p, q):
        return kernels.euclid_dist(p.payload, q.payload)

    def _geodesic(self, a, b, t):
        return self._wrap(kernels.euclid_geodesic(a.payload, b.payload, t))

    def log(self, p, q):
        return np.asarray(q.payload) - np.asarray(p.payload)

    def exp(self, p, v):
        return self._wrap(np.asarray(p.payload) + np.asarray(v))

    def inner(self, p, u, v):
        return float(np.dot(u, v))

    def project_segment(self, a, b, x):
        ab = np.asarray(b.payload) - np.asarray(a.payload)
        denom = float(np.dot(ab, ab))
        if denom == 0.0:
            return a
        t = float(np.dot(np.asarray(x.payload) - np.asarray(a.payload), ab)) / denom
        t = min(max(t, 0.0), 1.0)
        return self.geodesic(a, b, t)

    # rays and Busemann functions
    def make_ray(self, origin, direction) -> GeodesicRay:
        self.check(origin)
        u = np.array(direction, dtype=float)
        if u.shape != (self.dimension,):
            raise ValidationError("ray direction has the wrong shape")
        n = float(np.linalg.norm(u))
        if not (n > 0.0) or not math.isfinite(n):
            raise ValidationError("ray direction is not normalizable")
        return GeodesicRay(self.id, origin, _frozen(u / n))

    def ray_point(self, ray, t):
        return self._wrap(np.asarray(ray.origin.payload) + t * np.asarray(ray.direction))

    def busemann(self, ray, x):
        return -float(np.dot(np.asarray(x.payload) - np.asarray(ray.origin.payload),
                             ray.direction))

    def busemann_step(self, ray, x, s):
        return self._wrap(np.asarray(x.payload) + s * np.asarray(ray.direction))

    # isometries
    def make_isometry(self, descriptor) -> EuclideanIsometry:
        Q = np.array(descriptor.get("orthogonal", np.eye(self.dimension)), dtype=float)
        b = np.array(descriptor.get("translation", np.zeros(self.dimension)), dtype=float)
        if Q.shape != (self.dimension, self.dimension) or b.shape != (self.dimension,):
            raise ValidationError("isometry has the wrong shape")
        if not np.allclose(Q.T @ Q, np.eye(self.dimension), atol=1e-10):
            raise ValidationError("isometry matrix is not orthogonal")
        return EuclideanIsometry(_frozen(Q), _frozen(b))

    def apply_isometry(self, iso, x):
        return self._wrap(iso.orthogonal @ np.asarray(x.payload) + iso.translation)

    def isometry_to_json(self, iso):
        return {"orthogonal": iso.orthogonal.tolist(), "translation": iso.translation.tolist()}

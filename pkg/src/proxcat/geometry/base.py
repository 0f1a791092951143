"""Points, the geodesic-space interface and shared geodesic helpers."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from scipy.optimize import brentq

from ..errors import DomainError, ValidationError

DEFAULT_TOL = 1e-9


class Locus(NamedTuple):
    """A point of a metric tree: an edge id and the offset from its first vertex."""

    edge: int
    offset: float


@dataclass(frozen=True, eq=False)
class Point:
    """An element of a geodesic space.

    ``payload`` is a read-only float array (Euclidean, hyperboloid, SPD) or a
    :class:`Locus` (metric tree).  Build points through ``Space.point`` so the
    payload invariants are checked.
    """

    space_id: str
    payload: Any

    def __repr__(self) -> str:
        if isinstance(self.payload, Locus):
            body = f"edge={self.payload.edge}, offset={self.payload.offset!r}"
        else:
            body = np.array2string(np.asarray(self.payload), precision=6, separator=", ")
        return f"Point({self.space_id}, {body})"

    def same_payload(self, other: "Point") -> bool:
        """Bitwise payload equality."""
        if self.space_id != other.space_id:
            return False
        if isinstance(self.payload, Locus):
            return self.payload == other.payload
        return np.array_equal(self.payload, other.payload)


@dataclass(frozen=True)
class GeodesicSegment:
    space_id: str
    a: Point
    b: Point
    length: float


@dataclass(frozen=True)
class GeodesicRay:
    """A unit-speed geodesic ray.

    ``direction`` is space specific: a unit tangent vector at ``origin`` for
    the manifold backends, or the name of a leaf for a metric tree (the
    finite-tree surrogate of a ray).
    """

    space_id: str
    origin: Point
    direction: Any


def _frozen(arr) -> np.ndarray:
    a = np.array(arr, dtype=float)
    a.setflags(write=False)
    return a


class Space(ABC):
    """A complete CAT(0) geodesic space.

    Subclasses provide the distance, geodesic interpolation and the
    space-specific helpers (rays, isometries, random sampling).  Spaces with a
    Riemannian structure also provide ``log``, ``exp`` and ``inner``.
    """

    kind: str = ""
    has_tangent: bool = False

    def __init__(self, tol: float = DEFAULT_TOL):
        if not (tol > 0):
            raise ValidationError("tolerance must be positive")
        self.tol = float(tol)

    # -- identity -------------------------------------------------------
    @property
    @abstractmethod
    def id(self) -> str: ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.id}>"

    def check(self, *points: Point) -> None:
        for p in points:
            if not isinstance(p, Point):
                raise DomainError(f"expected a Point, got {type(p).__name__}")
            if p.space_id != self.id:
                raise DomainError(f"point belongs to {p.space_id}, not {self.id}")

    # -- points ---------------------------------------------------------
    @abstractmethod
    def validate_payload(self, payload) -> Any:
        """Return a normalized payload or raise ValidationError."""

    def point(self, payload) -> Point:
        return Point(self.id, self.validate_payload(payload))

    def _wrap(self, payload) -> Point:
        if not isinstance(payload, Locus):
            payload = _frozen(payload)
        return Point(self.id, payload)

    @abstractmethod
    def payload_to_json(self, p: Point) -> Any: ...

    @abstractmethod
    def payload_from_json(self, obj) -> Point: ...

    @abstractmethod
    def random_point(self, rng: np.random.Generator, center: Point | None = None,
                     scale: float = 1.0) -> Point: ...

    # -- metric ---------------------------------------------------------
    @abstractmethod
    def _distance(self, p: Point, q: Point) -> float: ...

    @abstractmethod
    def _geodesic(self, a: Point, b: Point, t: float) -> Point: ...

    def distance(self, p: Point, q: Point) -> float:
        self.check(p, q)
        return self._distance(p, q)

    def geodesic(self, a: Point, b: Point, t: float) -> Point:
        self.check(a, b)
        t = float(t)
        if not (0.0 <= t <= 1.0):
            raise DomainError(f"geodesic parameter {t} outside [0, 1]")
        if t == 0.0:
            return a
        if t == 1.0:
            return b
        return self._geodesic(a, b, t)

    def close(self, p: Point, q: Point, tol: float | None = None) -> bool:
        return self._distance(p, q) <= (self.tol if tol is None else tol)

    def point_at_distance(self, a: Point, b: Point, s: float) -> Point:
        """Point on [a, b] at distance ``s`` from ``a`` (clamped to the segment)."""
        d = self._distance(a, b)
        if d == 0.0 or s <= 0.0:
            return a
        if s >= d:
            return b
        return self._geodesic(a, b, s / d)

    # -- tangent structure (Riemannian backends) ------------------------
    def log(self, p: Point, q: Point):
        raise NotImplementedError(f"{self.kind} has no tangent structure")

    def exp(self, p: Point, v) -> Point:
        raise NotImplementedError(f"{self.kind} has no tangent structure")

    def inner(self, p: Point, u, v) -> float:
        raise NotImplementedError(f"{self.kind} has no tangent structure")

    def norm(self, p: Point, v) -> float:
        return math.sqrt(max(self.inner(p, v, v), 0.0))

    def zero_tangent(self, p: Point):
        return np.zeros_like(np.asarray(p.payload))

    # -- projections ----------------------------------------------------
    def project_segment(self, a: Point, b: Point, x: Point) -> Point:
        """Nearest point to ``x`` on the geodesic segment [a, b].

        Generic Riemannian version: root of the directional derivative of
        ``d(x, gamma(s))^2`` along the segment, which is monotone because the
        squared distance is convex along geodesics.
        """
        if not self.has_tangent:
            raise NotImplementedError
        L = self._distance(a, b)
        if L == 0.0:
            return a
        if self.inner(a, self.log(a, x), self.log(a, b)) <= 0.0:
            return a
        if self.inner(b, self.log(b, x), self.log(b, a)) <= 0.0:
            return b

        def slope(s):
            y = self._geodesic(a, b, s)
            gx = self.log(y, x)
            if s <= 0.5:
                return self.inner(y, gx, self.log(y, b)) / (1.0 - s)
            return -self.inner(y, gx, self.log(y, a)) / s

        s = brentq(slope, 0.0, 1.0, xtol=1e-15, rtol=1e-15, maxiter=200)
        return self.geodesic(a, b, s)

    def project_ball(self, center: Point, radius: float, x: Point) -> Point:
        d = self._distance(center, x)
        if d <= radius:
            return x
        return self._geodesic(center, x, radius / d)

    # -- rays, Busemann functions, isometries ---------------------------
    def make_ray(self, origin: Point, direction) -> GeodesicRay:
        raise NotImplementedError(f"rays are not available on {self.kind}")

    def ray_point(self, ray: GeodesicRay, t: float) -> Point:
        raise NotImplementedError(f"rays are not available on {self.kind}")

    def busemann(self, ray: GeodesicRay, x: Point) -> float:
        raise NotImplementedError(f"Busemann functions are not available on {self.kind}")

    def busemann_step(self, ray: GeodesicRay, x: Point, s: float) -> Point:
        """Move ``x`` a distance ``s`` in the direction of steepest Busemann descent."""
        raise NotImplementedError(f"Busemann functions are not available on {self.kind}")

    def make_isometry(self, descriptor) -> Any:
        raise NotImplementedError

    def apply_isometry(self, iso, x: Point) -> Point:
        raise NotImplementedError

    # -- geodesic extension (used by weak-convergence probes) -----------
    def extend_through(self, z: Point, x: Point, factor: float) -> Point | None:
        """Endpoint of the geodesic from ``z`` through ``x`` prolonged past ``x``.

        Returns the point at distance ``factor * d(z, x)`` beyond ``x``, or
        None when geodesics cannot be prolonged there.
        """
        if not self.has_tangent:
            return None
        v = self.log(x, z)
        return self.exp(x, -factor * np.asarray(v))

    # -- serialization ---------------------------------------------------
    @abstractmethod
    def descriptor(self) -> dict: ...


def segment(space: Space, a: Point, b: Point) -> GeodesicSegment:
    space.check(a, b)
    return GeodesicSegment(space.id, a, b, space._distance(a, b))

"""Geodesic spaces, convex sets and CAT(0) comparison quantities."""

from __future__ import annotations

import math

from ..errors import DomainError, ValidationError
from .base import DEFAULT_TOL, GeodesicRay, GeodesicSegment, Locus, Point, Space, segment
from .euclidean import EuclideanSpace
from .hyperbolic import HyperbolicSpace
from .sets import Ball, ConvexSet, Segment, Singleton, SublevelSet, Subtree
from .spd import SPDSpace
from .tree import MetricTree


def distance(s: Space, p: Point, q: Point) -> float:
    """Geodesic distance between two points of ``s``."""
    return s.distance(p, q)


def geodesic_point(s: Space, a: Point, b: Point, t: float) -> Point:
    """Point ``gamma(t)`` on the geodesic with ``gamma(0) = a`` and ``gamma(1) = b``."""
    return s.geodesic(a, b, t)


def cat0_residual(s: Space, x: Point, a: Point, b: Point, t: float) -> float:
    """Slack of the CAT(0) comparison inequality.

    Returns ``(1-t) d(x,a)^2 + t d(x,b)^2 - t(1-t) d(a,b)^2 - d(x, gamma(t))^2``
    with ``gamma`` the geodesic from ``a`` to ``b``.  Nonnegative (up to
    rounding) in every CAT(0) space, and zero in Euclidean space.
    """
    s.check(x, a, b)
    t = float(t)
    if t == 0.0:
        return 0.0
    g = s.geodesic(a, b, t)
    dxa = s._distance(x, a)
    dxb = s._distance(x, b)
    dab = s._distance(a, b)
    dxg = s._distance(x, g)
    return (1.0 - t) * dxa * dxa + t * dxb * dxb - t * (1.0 - t) * dab * dab - dxg * dxg


def comparison_angle(s: Space, y: Point, x: Point, z: Point) -> float:
    """Angle at ``x`` of the Euclidean comparison triangle of (y, x, z)."""
    s.check(y, x, z)
    a = s._distance(x, y)
    b = s._distance(x, z)
    if a == 0.0 or b == 0.0:
        raise DomainError("comparison angle needs y and z distinct from x")
    c = s._distance(y, z)
    cos = (a * a + b * b - c * c) / (2.0 * a * b)
    return math.acos(min(1.0, max(-1.0, cos)))


def project(s: Space, C: ConvexSet, x: Point) -> Point:
    """Metric projection of ``x`` onto the closed convex set ``C``."""
    if C.space.id != s.id:
        raise DomainError(f"set lives in {C.space.id}, not {s.id}")
    return C.project(x)


def ray_point(s: Space, ray: GeodesicRay, t: float) -> Point:
    """Point at arc length ``t`` along ``ray``."""
    if ray.space_id != s.id:
        raise DomainError(f"ray lives in {ray.space_id}, not {s.id}")
    if not t >= 0.0:
        raise DomainError("ray parameter must be nonnegative")
    if t == 0.0:
        return ray.origin
    return s.ray_point(ray, float(t))


def space_from_json(obj, base_dir=None, tol: float = DEFAULT_TOL) -> Space:
    """Build a space from its JSON descriptor."""
    import json
    import os

    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("space descriptor must be an object with a 'kind'")
    kind = obj["kind"]
    if kind in ("euclidean", "hyperbolic", "spd"):
        unknown = set(obj) - {"kind", "dimension"}
        if unknown:
            raise ValidationError(f"unknown space fields: {sorted(unknown)}")
        cls = {"euclidean": EuclideanSpace, "hyperbolic": HyperbolicSpace, "spd": SPDSpace}[kind]
        if "dimension" not in obj:
            raise ValidationError(f"{kind} space needs a dimension")
        return cls(obj["dimension"], tol=tol)
    if kind == "tree":
        if "file" in obj:
            if set(obj) != {"kind", "file"}:
                raise ValidationError("tree descriptor with 'file' takes no other fields")
            path = obj["file"]
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            if not os.path.exists(path):
                raise ValidationError(f"tree file {path!r} does not exist")
            with open(path) as fh:
                data = json.load(fh)
            return MetricTree.from_json({"kind": "tree", **data}, tol=tol)
        return MetricTree.from_json(obj, tol=tol)
    raise ValidationError(f"unknown space kind {kind!r}")


__all__ = [
    "DEFAULT_TOL", "Point", "Locus", "Space", "GeodesicSegment", "GeodesicRay", "segment",
    "EuclideanSpace", "HyperbolicSpace", "SPDSpace", "MetricTree",
    "ConvexSet", "Singleton", "Segment", "Ball", "SublevelSet", "Subtree",
    "distance", "geodesic_point", "cat0_residual", "comparison_angle", "project",
    "ray_point", "space_from_json",
]

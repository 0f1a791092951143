"""Closed convex sets and their metric projections.

Every set knows its space, can test membership, project a point and draw
random members (used by the sampled projection inequalities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from ..errors import InfeasibleError, SolverError, ValidationError
from .base import Point, Space
from .tree import MetricTree

LEVEL_TOL = 1e-10
MAX_BISECTIONS = 200


class ConvexSet:
    space: Space

    def contains(self, x: Point, tol: float | None = None) -> bool:
        raise NotImplementedError

    def project(self, x: Point) -> Point:
        raise NotImplementedError

    def random_member(self, rng) -> Point:
        raise NotImplementedError

    def dist(self, x: Point) -> float:
        return self.space._distance(x, self.project(x))

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Singleton(ConvexSet):
    space: Space
    point: Point

    def __post_init__(self):
        self.space.check(self.point)

    def contains(self, x, tol=None):
        return self.space.close(x, self.point, tol)

    def project(self, x):
        self.space.check(x)
        return self.point

    def random_member(self, rng):
        return self.point

    def to_json(self):
        return {"kind": "singleton", "point": self.space.payload_to_json(self.point)}


@dataclass(frozen=True)
class Segment(ConvexSet):
    space: Space
    a: Point
    b: Point

    def __post_init__(self):
        self.space.check(self.a, self.b)

    def contains(self, x, tol=None):
        return self.space.close(x, self.project(x), tol)

    def project(self, x):
        self.space.check(x)
        return self.space.project_segment(self.a, self.b, x)

    def random_member(self, rng):
        return self.space.geodesic(self.a, self.b, float(rng.random()))

    def to_json(self):
        s = self.space
        return {"kind": "segment", "a": s.payload_to_json(self.a), "b": s.payload_to_json(self.b)}


@dataclass(frozen=True)
class Ball(ConvexSet):
    space: Space
    center: Point
    radius: float

    def __post_init__(self):
        self.space.check(self.center)
        if not (self.radius >= 0.0) or not math.isfinite(self.radius):
            raise ValidationError("ball radius must be a finite nonnegative number")

    def contains(self, x, tol=None):
        tol = self.space.tol if tol is None else tol
        return self.space._distance(self.center, x) <= self.radius + tol

    def project(self, x):
        self.space.check(x)
        return self.space.project_ball(self.center, self.radius, x)

    def random_member(self, rng):
        q = self.space.random_point(rng, center=self.center, scale=max(self.radius, 1.0))
        return self.space.point_at_distance(self.center, q, self.radius * float(rng.random()))

    def to_json(self):
        return {"kind": "ball", "center": self.space.payload_to_json(self.center),
                "radius": self.radius}


@dataclass(frozen=True)
class SublevelSet(ConvexSet):
    """``{f <= level}`` for a convex functional with a known minimizer.

    Projection moves from x toward the minimizer ``m`` and stops where the
    level is crossed (bisection on the convex function ``f`` along [x, m]).
    This is the nearest point whenever the level sets are spheres about
    ``m`` (distance-type functionals); in general it is a retraction onto
    the set that lands on its boundary.
    """

    functional: Any
    level: float
    minimizer: Point
    space: Space = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "space", self.functional.space)
        self.space.check(self.minimizer)
        if not self.functional.evaluate(self.minimizer) <= self.level + LEVEL_TOL:
            raise InfeasibleError("sublevel set minimizer lies above the level")

    def contains(self, x, tol=None):
        return self.functional.evaluate(x) <= self.level + (LEVEL_TOL if tol is None else tol)

    def project(self, x):
        self.space.check(x)
        f = self.functional
        if f.evaluate(x) <= self.level:
            return x
        lo, hi = 0.0, 1.0  # g(lo) > 0 >= g(hi)
        best = self.minimizer
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            y = self.space.geodesic(x, self.minimizer, mid)
            g = f.evaluate(y) - self.level
            if g <= 0.0:
                hi, best = mid, y
                if g >= -LEVEL_TOL:
                    return y
            else:
                lo = mid
            if hi - lo <= 1e-17:
                return best
        raise SolverError("sublevel projection did not reach the level tolerance",
                          best=best, residual=abs(f.evaluate(best) - self.level))

    def random_member(self, rng):
        q = self.project(self.space.random_point(rng, center=self.minimizer))
        return self.space.geodesic(self.minimizer, q, float(rng.random()))

    def to_json(self):
        return {"kind": "sublevel", "functional": self.functional.to_json(),
                "level": self.level, "minimizer": self.space.payload_to_json(self.minimizer)}


@dataclass(frozen=True)
class Subtree(ConvexSet):
    """Subtree of a metric tree spanned by a connected vertex set."""

    space: MetricTree
    vertices: tuple

    def __post_init__(self):
        if not isinstance(self.space, MetricTree):
            raise ValidationError("subtrees exist only in metric trees")
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        self.space._subtree_indices(self.vertices)

    def contains(self, x, tol=None):
        return self.space.in_subtree(self.vertices, x)

    def project(self, x):
        self.space.check(x)
        return self.space.project_subtree(self.vertices, x)

    def random_member(self, rng):
        t = self.space
        idx = t._subtree_indices(self.vertices)
        inner = [k for k, (u, w, _) in enumerate(t.edges) if u in idx and w in idx]
        if not inner:
            return t.vertex(self.vertices[0])
        k = inner[int(rng.integers(len(inner)))]
        return t.point((k, float(rng.random()) * t.edges[k][2]))

    def to_json(self):
        return {"kind": "subtree", "vertices": list(self.vertices)}

"""Geodesically convex lower semicontinuous functionals.

Conventions
-----------
``SquaredDistance(space, a, w)`` is ``f(y) = (w/2) d(y, a)^2`` and
``Distance(space, a, w)`` is ``f(y) = w d(y, a)``.  A :class:`WeightedSum`
multiplies each summand by its weight and is flattened on construction.

Each functional may carry ``known_minimizer`` / ``known_infimum`` metadata
used by the algorithm certificates; when both are given they must agree
within ``1e-9``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import DomainError, ValidationError
from .geometry import (Ball, ConvexSet, EuclideanSpace, MetricTree, Point, SPDSpace,
                       Singleton, Space, Subtree, geodesic_point)
from .geometry.base import GeodesicRay
from .report import FAIL, PASS, CertificateReport

META_TOL = 1e-9
ISOMETRY_TOL = 1e-9
SATURATION = 1e12  # larger lambda * weight snaps distance-type resolvents


class Functional:
    """Base class.  Subclasses implement ``_evaluate`` and optionally
    ``closed_form_resolvent``."""

    kind = "functional"
    lipschitz: float | None = None
    has_closed_form = False

    def __init__(self, space: Space, known_minimizer: Point | None = None,
                 known_infimum: float | None = None):
        self.space = space
        self.known_minimizer = None
        self.known_infimum = None
        self.set_metadata(known_minimizer, known_infimum)

    def set_metadata(self, known_minimizer=None, known_infimum=None):
        """Attach minimizer / infimum metadata after checking consistency."""
        if known_minimizer is not None:
            self.space.check(known_minimizer)
            value = self.evaluate(known_minimizer)
            if known_infimum is None:
                known_infimum = value
            elif not abs(value - known_infimum) <= META_TOL:
                raise ValidationError(
                    f"f(known_minimizer) = {value!r} differs from known_infimum = {known_infimum!r}")
        if known_infimum is not None:
            known_infimum = float(known_infimum)
            if not math.isfinite(known_infimum):
                raise ValidationError("known_infimum must be finite")
        self.known_minimizer = known_minimizer
        self.known_infimum = known_infimum
        return self

    def evaluate(self, x: Point) -> float:
        self.space.check(x)
        return self._evaluate(x)

    __call__ = evaluate

    def _evaluate(self, x: Point) -> float:
        raise NotImplementedError

    def closed_form_resolvent(self, x: Point, lam: float) -> Point | None:
        """Exact ``J_lam(x)`` or None when no closed form is implemented."""
        return None

    def terms(self):
        """Summands as ``(weight, functional)`` pairs."""
        return [(1.0, self)]

    def evaluate_on_edge(self, edge: int, offsets: np.ndarray) -> np.ndarray:
        """Values along a tree edge (vectorized where the kind allows it)."""
        t = self.space
        return np.array([self._evaluate(t._wrap(t.canonical(edge, float(o)))) for o in offsets])

    def edge_pieces(self, edge: int):
        """Radial pieces on a tree edge for the exact tree resolvent, or None."""
        return None

    def uniform_modulus(self) -> Callable[[float], float] | None:
        """A modulus phi with the uniform convexity inequality, if known."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError

    def _meta_json(self, out):
        if self.known_minimizer is not None:
            out["known_minimizer"] = self.space.payload_to_json(self.known_minimizer)
        if self.known_infimum is not None:
            out["known_infimum"] = self.known_infimum
        return out

    def __repr__(self):
        return f"<{type(self).__name__} on {self.space.id}>"


def _positive(w, name="weight"):
    w = float(w)
    if not (w > 0.0) or not math.isfinite(w):
        raise ValidationError(f"{name} must be positive and finite")
    return w


def _tree_radial(t: MetricTree, a: Point, edge: int):
    """Write d(a, (edge, o)) as |o - c| + k."""
    e, o = a.payload
    u, w, L = t.edges[edge]
    if e == edge:
        return o, 0.0
    du = t.dist_to_vertex(a, u)
    dw = t.dist_to_vertex(a, w)
    if du <= dw:
        return 0.0, du
    return L, dw


@dataclass(frozen=True)
class RadialPiece:
    """``g(|o - c| + k)`` on a tree edge.

    ``shape`` is one of ``sq`` (w/2 r^2), ``lin`` (w r), ``hinge``
    (w max(r - rho, 0)), ``ind`` (0 if r <= rho else inf) or ``zero``.
    """

    shape: str
    c: float
    k: float
    w: float = 1.0
    rho: float = 0.0


class SquaredDistance(Functional):
    kind = "squared_distance"
    has_closed_form = True

    def __init__(self, space, anchor, weight=1.0, **meta):
        space.check(anchor)
        self.anchor = anchor
        self.weight = _positive(weight)
        if "known_minimizer" not in meta and "known_infimum" not in meta:
            meta = {"known_minimizer": anchor}
        super().__init__(space, **meta)

    def _evaluate(self, x):
        d = self.space._distance(x, self.anchor)
        return 0.5 * self.weight * d * d

    def closed_form_resolvent(self, x, lam):
        wl = self.weight * lam
        return geodesic_point(self.space, x, self.anchor, wl / (1.0 + wl))

    def evaluate_on_edge(self, edge, offsets):
        d = self.space.distances_on_edge(self.anchor, edge, offsets)
        return 0.5 * self.weight * d * d

    def edge_pieces(self, edge):
        c, k = _tree_radial(self.space, self.anchor, edge)
        return [RadialPiece("sq", c, k, self.weight)], 0.0

    def uniform_modulus(self):
        w = self.weight
        return lambda r: 0.5 * w * r * r

    def to_json(self):
        return self._meta_json({"kind": self.kind, "anchor": self.space.payload_to_json(self.anchor),
                                "weight": self.weight})


class Distance(Functional):
    kind = "distance"
    has_closed_form = True
    lipschitz = 1.0

    def __init__(self, space, anchor, weight=1.0, **meta):
        space.check(anchor)
        self.anchor = anchor
        self.weight = _positive(weight)
        self.lipschitz = self.weight
        if "known_minimizer" not in meta and "known_infimum" not in meta:
            meta = {"known_minimizer": anchor}
        super().__init__(space, **meta)

    def _evaluate(self, x):
        return self.weight * self.space._distance(x, self.anchor)

    def closed_form_resolvent(self, x, lam):
        step = self.weight * lam
        if step > SATURATION:
            return self.anchor
        return self.space.point_at_distance(x, self.anchor, step)

    def evaluate_on_edge(self, edge, offsets):
        return self.weight * self.space.distances_on_edge(self.anchor, edge, offsets)

    def edge_pieces(self, edge):
        c, k = _tree_radial(self.space, self.anchor, edge)
        return [RadialPiece("lin", c, k, self.weight)], 0.0

    def to_json(self):
        return self._meta_json({"kind": self.kind, "anchor": self.space.payload_to_json(self.anchor),
                                "weight": self.weight})


class DistanceToSet(Functional):
    kind = "distance_to_set"
    has_closed_form = True
    lipschitz = 1.0

    def __init__(self, convex_set: ConvexSet, **meta):
        self.set = convex_set
        super().__init__(convex_set.space, **meta)

    def _evaluate(self, x):
        return self.set.dist(x)

    def closed_form_resolvent(self, x, lam):
        p = self.set.project(x)
        if lam > SATURATION:
            return p
        return self.space.point_at_distance(x, p, lam)

    def edge_pieces(self, edge):
        C = self.set
        t = self.space
        if isinstance(C, Singleton):
            c, k = _tree_radial(t, C.point, edge)
            return [RadialPiece("lin", c, k)], 0.0
        if isinstance(C, Ball):
            c, k = _tree_radial(t, C.center, edge)
            return [RadialPiece("hinge", c, k, 1.0, C.radius)], 0.0
        if isinstance(C, Subtree):
            idx = t._subtree_indices(C.vertices)
            u, w, L = t.edges[edge]
            if u in idx and w in idx:
                return [], 0.0
            anchor = C.project(t._wrap(t.canonical(edge, 0.5 * L)))
            c, k = _tree_radial(t, anchor, edge)
            return [RadialPiece("lin", c, k)], 0.0
        return None

    def to_json(self):
        return self._meta_json({"kind": self.kind, "set": self.set.to_json()})


class Busemann(Functional):
    """Busemann function of a geodesic ray, by closed form.

    On a metric tree the ray is the finite surrogate ending at a leaf and
    ``b(x) = d(x, leaf) - d(origin, leaf)``.
    """

    kind = "busemann"
    has_closed_form = True
    lipschitz = 1.0

    def __init__(self, space, ray: GeodesicRay, **meta):
        if ray.space_id != space.id:
            raise DomainError("ray belongs to another space")
        if isinstance(space, SPDSpace):
            raise ValidationError("Busemann functions are not provided on SPD matrices")
        self.ray = ray
        super().__init__(space, **meta)

    def _evaluate(self, x):
        return self.space.busemann(self.ray, x)

    def closed_form_resolvent(self, x, lam):
        return self.space.busemann_step(self.ray, x, lam)

    def truncated_limit(self, x, t=1e6):
        """``d(x, c(t)) - t``, the naive approximation of the defining limit."""
        if isinstance(self.space, MetricTree):
            return self._evaluate(x)
        return self.space._distance(x, self.space.ray_point(self.ray, t)) - t

    def edge_pieces(self, edge):
        t = self.space
        leaf = t.vertex(self.ray.direction)
        c, k = _tree_radial(t, leaf, edge)
        return [RadialPiece("lin", c, k)], -t._distance(self.ray.origin, leaf)

    def to_json(self):
        s = self.space
        direction = self.ray.direction
        if not isinstance(direction, str):
            direction = [float(v) for v in np.asarray(direction).ravel()]
        return self._meta_json({"kind": self.kind, "origin": s.payload_to_json(self.ray.origin),
                                "direction": direction})


class Displacement(Functional):
    """``x -> d(x, T x)`` for an isometry ``T``."""

    kind = "displacement"
    lipschitz = 2.0

    def __init__(self, space, isometry, check_samples: int = 16, **meta):
        self.isometry = isometry
        rng = np.random.default_rng(0)
        for _ in range(check_samples):
            x = space.random_point(rng, scale=2.0)
            y = space.random_point(rng, scale=2.0)
            d = space._distance(x, y)
            dT = space._distance(space.apply_isometry(isometry, x), space.apply_isometry(isometry, y))
            if abs(d - dT) > ISOMETRY_TOL * max(1.0, d):
                raise ValidationError(f"map is not an isometry: |d - d_T| = {abs(d - dT):.3e}")
        super().__init__(space, **meta)

    def _evaluate(self, x):
        return self.space._distance(x, self.space.apply_isometry(self.isometry, x))

    def to_json(self):
        return self._meta_json({"kind": self.kind,
                                "isometry": self.space.isometry_to_json(self.isometry)})


class Indicator(Functional):
    """0 on a closed convex set, +inf elsewhere."""

    kind = "indicator"
    has_closed_form = True

    def __init__(self, convex_set: ConvexSet, **meta):
        self.set = convex_set
        super().__init__(convex_set.space, **meta)

    def _evaluate(self, x):
        return 0.0 if self.set.contains(x) else math.inf

    def closed_form_resolvent(self, x, lam):
        return self.set.project(x)

    def edge_pieces(self, edge):
        C = self.set
        t = self.space
        if isinstance(C, Singleton):
            c, k = _tree_radial(t, C.point, edge)
            return [RadialPiece("ind", c, k, 1.0, 0.0)], 0.0
        if isinstance(C, Ball):
            c, k = _tree_radial(t, C.center, edge)
            return [RadialPiece("ind", c, k, 1.0, C.radius)], 0.0
        if isinstance(C, Subtree):
            idx = t._subtree_indices(C.vertices)
            u, w, L = t.edges[edge]
            if u in idx and w in idx:
                return [], 0.0
            if u in idx:
                return [RadialPiece("ind", 0.0, 0.0, 1.0, 0.0)], 0.0
            if w in idx:
                return [RadialPiece("ind", L, 0.0, 1.0, 0.0)], 0.0
            return [RadialPiece("ind", 0.0, 1.0, 1.0, 0.0)], 0.0  # empty on this edge
        return None

    def to_json(self):
        return self._meta_json({"kind": self.kind, "set": self.set.to_json()})


class WeightedSum(Functional):
    """``sum_i w_i f_i``; nested sums are flattened.  The empty sum is f = 0."""

    kind = "weighted_sum"

    def __init__(self, space, terms=(), **meta):
        flat = []
        for w, f in terms:
            w = _positive(w)
            if f.space.id != space.id:
                raise DomainError("summand lives in another space")
            if isinstance(f, WeightedSum):
                flat.extend((w * w2, f2) for w2, f2 in f._terms)
            else:
                flat.append((w, f))
        self._terms = flat
        self.space = space
        self.has_closed_form = self._closed_form_kind() is not None
        lips = [w * f.lipschitz if f.lipschitz is not None else None for w, f in flat]
        self.lipschitz = None if any(v is None for v in lips) else float(sum(lips))
        if not flat and "known_infimum" not in meta and "known_minimizer" not in meta:
            meta = {"known_infimum": 0.0}
        super().__init__(space, **meta)

    def terms(self):
        return list(self._terms)

    def _evaluate(self, x):
        total = 0.0
        for w, f in self._terms:
            total += w * f._evaluate(x)
        return total

    def _closed_form_kind(self):
        if not self._terms:
            return "zero"
        if len(self._terms) == 1 and self._terms[0][1].has_closed_form:
            return "single"
        if isinstance(self.space, EuclideanSpace) and all(
                isinstance(f, SquaredDistance) for _, f in self._terms):
            return "euclidean_mean"
        return None

    def closed_form_resolvent(self, x, lam):
        kind = self._closed_form_kind()
        if kind == "zero":
            return x
        if kind == "single":
            w, f = self._terms[0]
            return f.closed_form_resolvent(x, w * lam)
        if kind == "euclidean_mean":
            anchors, weights = self.sq_anchor_arrays()
            y = kernels.euclid_sqsum_power(np.asarray(x.payload), anchors, weights, lam, 1)
            return self.space._wrap(y)
        return None

    def sq_anchor_arrays(self):
        """Anchors and effective weights when every summand is a SquaredDistance."""
        anchors = np.ascontiguousarray([np.asarray(f.anchor.payload) for _, f in self._terms],
                                       dtype=float)
        weights = np.array([w * f.weight for w, f in self._terms])
        return anchors, weights

    def evaluate_on_edge(self, edge, offsets):
        total = np.zeros(len(offsets))
        for w, f in self._terms:
            total = total + w * f.evaluate_on_edge(edge, offsets)
        return total

    def edge_pieces(self, edge):
        out = []
        const = 0.0
        for w, f in self._terms:
            got = f.edge_pieces(edge)
            if got is None:
                return None
            pieces, c0 = got
            const += w * c0
            for p in pieces:
                out.append(RadialPiece(p.shape, p.c, p.k, w * p.w, p.rho))
        return out, const

    def uniform_modulus(self):
        mods = [(w, f.uniform_modulus()) for w, f in self._terms]
        mods = [(w, m) for w, m in mods if m is not None]
        if not mods:
            return None
        return lambda r: sum(w * m(r) for w, m in mods)

    def to_json(self):
        return self._meta_json({"kind": self.kind, "terms": [
            {"weight": w, "functional": f.to_json()} for w, f in self._terms]})


def zero(space: Space) -> WeightedSum:
    """The functional f = 0."""
    return WeightedSum(space, [])


# --------------------------------------------------------------------------
# sampled convexity quantities
# --------------------------------------------------------------------------

def convexity_residual(f: Functional, a: Point, b: Point, t: float) -> float:
    """``(1-t) f(a) + t f(b) - f(gamma(t))`` with ``gamma(0) = a``.

    Nonnegative for convex f.  Returns +inf (a vacuous pass) when f is
    infinite at an endpoint.
    """
    fa = f.evaluate(a)
    fb = f.evaluate(b)
    if math.isinf(fa) or math.isinf(fb):
        return math.inf
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return 0.0
    return (1.0 - t) * fa + t * fb - f.evaluate(geodesic_point(f.space, a, b, t))


def uniform_convexity_residual(f: Functional, a: Point, b: Point, t: float,
                               modulus: Callable[[float], float]) -> float:
    """Convexity slack minus ``t(1-t) phi(d(a, b))``."""
    base = convexity_residual(f, a, b, t)
    if math.isinf(base):
        return base
    return base - t * (1.0 - t) * modulus(f.space._distance(a, b))


def is_minimizing_certificate(f: Functional, x: Point, sample_budget: int,
                              rng: np.random.Generator | None = None,
                              tolerance: float = 1e-12) -> CertificateReport:
    """Heuristic evidence that ``x`` minimizes ``f``.

    Compares ``f(x)`` with random points at several scales around x and with
    short geodesic moves toward random points.  A pass means no sampled
    improvement beyond ``tolerance * max(1, |f(x)|)``; it is not a proof.
    """
    if sample_budget < 1:
        raise ValidationError("sample_budget must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    s = f.space
    fx = f.evaluate(x)
    best = math.inf
    best_point = None
    scales = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
    for i in range(sample_budget):
        q = s.random_point(rng, center=x, scale=scales[i % len(scales)] * 4.0)
        if i % 2 == 1:
            q = s.geodesic(x, q, float(rng.random()) * scales[(i // 2) % len(scales)])
        v = f.evaluate(q)
        if v < best:
            best, best_point = v, q
    improvement = fx - best
    allowed = tolerance * max(1.0, abs(fx)) if math.isfinite(fx) else math.inf
    status = PASS if improvement <= allowed else FAIL
    details = {"heuristic": True, "value": fx, "best_sampled": best,
               "improvement": improvement}
    if best_point is not None and status == FAIL:
        details["improving_point"] = s.payload_to_json(best_point)
    return CertificateReport("minimizing (sampled)", status, improvement, None, allowed,
                             sample_budget, details)

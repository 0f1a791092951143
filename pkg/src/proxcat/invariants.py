"""Sampled invariant suites for the geometry and functionals modules.

Each check draws random instances from a seeded generator and returns a
:class:`CertificateReport` whose ``worst_index`` names the offending sample.
"""

from __future__ import annotations

import numpy as np

from .functionals import Busemann, Distance, SquaredDistance, convexity_residual
from .geometry import (Ball, EuclideanSpace, MetricTree, SPDSpace, Segment, Singleton, Subtree,
                       cat0_residual)
from .report import FAIL, PASS, check_inequalities

SYMMETRY_TOL = 1e-10
TRIANGLE_TOL = 1e-9
GEODESIC_TOL = 1e-8
CAT0_TOL = 1e-8
EUCLID_CAT0_TOL = 1e-10
PROJ_NONEXP_TOL = 1e-9
PROJ_TOL = 1e-8
CONVEXITY_TOL = 1e-9
SCALE = 2.0


def _pts(space, rng, k, extra=()):
    out = list(extra)
    while len(out) < k:
        out.append(space.random_point(rng, scale=SCALE))
    return out[:k] if len(out) > k else out


def metric_axioms(space, budget, rng, extra=()):
    """Nonnegativity, symmetry and the triangle inequality on random triples."""
    sym, tri, neg = [], [], []
    extra = list(extra)
    for i in range(budget):
        x, y, z = _pts(space, rng, 3, extra[i * 3:i * 3 + 3])
        dxy, dyx = space._distance(x, y), space._distance(y, x)
        sym.append(abs(dxy - dyx))
        tri.append(space._distance(x, z) - dxy - space._distance(y, z))
        neg.append(-dxy)
    return [check_inequalities("distance_nonnegative", neg, 0.0),
            check_inequalities("distance_symmetric", sym, SYMMETRY_TOL),
            check_inequalities("triangle_inequality", tri, TRIANGLE_TOL)]


def geodesic_parameterization(space, budget, rng):
    res = []
    for _ in range(budget):
        a, b = _pts(space, rng, 2)
        s1, s2 = rng.random(2)
        g1, g2 = space.geodesic(a, b, float(s1)), space.geodesic(a, b, float(s2))
        res.append(abs(space._distance(g1, g2) - abs(s1 - s2) * space._distance(a, b)))
    return check_inequalities("geodesic_parameterization", res, GEODESIC_TOL)


def cat0_check(space, budget, rng, extra=()):
    """CAT(0) comparison slack on random (x, a, b, t).

    Euclidean space must give equality within 1e-10; other backends must
    give a slack of at least -1e-8.
    """
    euclid = isinstance(space, EuclideanSpace)
    res, raw = [], []
    extra = list(extra)
    for i in range(budget):
        x, a, b = _pts(space, rng, 3, extra[i * 3:i * 3 + 3])
        r = cat0_residual(space, x, a, b, float(rng.random()))
        raw.append(r)
        res.append(abs(r) if euclid else -r)
    rep = check_inequalities("cat0_residual", res, EUCLID_CAT0_TOL if euclid else CAT0_TOL,
                             min_residual=min(raw), max_residual=max(raw))
    return rep


def random_convex_set(space, rng, k: int):
    """A convex set for projection tests; the kind cycles with ``k``."""
    kind = k % 3
    if isinstance(space, MetricTree):
        if kind == 0:
            return Singleton(space, space.random_point(rng))
        if kind == 1:
            return Segment(space, space.random_point(rng), space.random_point(rng))
        root = int(rng.integers(len(space.vertices)))
        verts = {root}
        for _ in range(int(rng.integers(0, 3))):
            v = int(rng.choice(sorted(verts)))
            nbrs = [u for u, _ in space.adj[v]]
            verts.add(int(rng.choice(nbrs)) if nbrs else v)
        return Subtree(space, tuple(space.vertices[v] for v in sorted(verts)))
    if kind == 0:
        return Ball(space, space.random_point(rng, scale=SCALE), float(rng.uniform(0.1, 1.5)))
    if kind == 1:
        return Segment(space, space.random_point(rng, scale=SCALE),
                       space.random_point(rng, scale=SCALE))
    return Singleton(space, space.random_point(rng, scale=SCALE))


def projection_properties(space, budget, rng):
    """Nonexpansiveness, idempotence, the segment property and the obtuse-angle
    consequence ``d(x,y)^2 >= d(x,p)^2 + d(p,y)^2`` of metric projections."""
    nonexp, idem, seg, obt = [], [], [], []
    for k in range(budget):
        C = random_convex_set(space, rng, k)
        x, y = _pts(space, rng, 2)
        px, py = C.project(x), C.project(y)
        nonexp.append(space._distance(px, py) - space._distance(x, y))
        idem.append(space._distance(C.project(px), px))
        z = space.geodesic(x, px, float(rng.random()))
        seg.append(space._distance(C.project(z), px))
        c = C.random_member(rng)
        dxc, dxp, dpc = space._distance(x, c), space._distance(x, px), space._distance(px, c)
        obt.append(dxp * dxp + dpc * dpc - dxc * dxc)
    return [check_inequalities("projection_nonexpansive", nonexp, PROJ_NONEXP_TOL),
            check_inequalities("projection_idempotent", idem, PROJ_TOL),
            check_inequalities("projection_segment_property", seg, PROJ_TOL),
            check_inequalities("projection_obtuse_angle", obt, PROJ_TOL)]


def _sample_functionals(space, rng):
    a = space.random_point(rng, scale=SCALE)
    fs = [SquaredDistance(space, a, weight=float(rng.uniform(0.5, 2.0))),
          Distance(space, space.random_point(rng, scale=SCALE), weight=float(rng.uniform(0.5, 2.0)))]
    if isinstance(space, MetricTree):
        fs.append(Busemann(space, space.make_ray(space.random_point(rng),
                                                 space.leaves()[int(rng.integers(len(space.leaves())))])))
    elif not isinstance(space, SPDSpace):
        o = space.random_point(rng, scale=SCALE)
        d = np.asarray(space.random_point(rng, scale=SCALE).payload) - np.asarray(o.payload)
        if np.linalg.norm(d) > 0:
            fs.append(Busemann(space, space.make_ray(o, d)))
    return fs


def functional_convexity(space, budget, rng):
    """Geodesic convexity of the sampled functionals on random segments."""
    res = []
    for _ in range(budget):
        for f in _sample_functionals(space, rng):
            a, b = _pts(space, rng, 2)
            res.append(-convexity_residual(f, a, b, float(rng.random())))
    return check_inequalities("functional_convexity", res, CONVEXITY_TOL)


def resolvent_nonexpansive(space, budget, rng):
    """``d(J x, J y) <= d(x, y)`` for closed-form resolvents."""
    res = []
    for _ in range(budget):
        lam = float(rng.uniform(0.1, 5.0))
        for f in _sample_functionals(space, rng):
            x, y = _pts(space, rng, 2)
            jx, jy = f.closed_form_resolvent(x, lam), f.closed_form_resolvent(y, lam)
            if jx is None or jy is None:
                continue
            res.append(space._distance(jx, jy) - space._distance(x, y))
    return check_inequalities("resolvent_nonexpansive", res, PROJ_NONEXP_TOL)


def geometry_suite(space, budget: int, rng, extra_points=()):
    reports = metric_axioms(space, budget, rng, extra_points)
    reports.append(geodesic_parameterization(space, budget, rng))
    reports.append(cat0_check(space, budget, rng, extra_points))
    reports.extend(projection_properties(space, max(1, budget // 10), rng))
    return reports


def functional_suite(space, budget: int, rng):
    n = max(1, budget // 10)
    return [functional_convexity(space, n, rng), resolvent_nonexpansive(space, n, rng)]


def run_suites(space, budget: int, rng, extra_points=()) -> list:
    """All invariant reports for ``space`` at the given sample budget."""
    return geometry_suite(space, budget, rng, extra_points) + functional_suite(space, budget, rng)


def all_passed(reports) -> bool:
    return all(r.status == PASS for r in reports)


__all__ = ["metric_axioms", "geodesic_parameterization", "cat0_check", "random_convex_set",
           "projection_properties", "functional_convexity", "resolvent_nonexpansive",
           "geometry_suite", "functional_suite", "run_suites", "all_passed", "FAIL", "PASS"]

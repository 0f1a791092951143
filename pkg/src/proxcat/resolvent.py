"""Moreau-Yosida resolvents ``J_lam(x) = argmin_y f(y) + d(y, x)^2 / (2 lam)``.

Strategies
----------
``analytic``
    Closed forms (squared distance, distance, indicator, distance to a set,
    Busemann functions, Euclidean weighted means), plus an exact piecewise
    quadratic solver for sums of radial terms on metric trees.
``inner_split``
    Cyclic proximal passes over the summands followed by a certified
    majorize-minimize polish on spaces with a tangent structure.  The
    objective is ``mu``-strongly convex with ``mu = 1/lam + sum of squared
    distance weights``, so a (sub)gradient of norm ``g`` certifies the gap
    ``F(y) - F* <= g^2 / (2 mu)`` and ``d(y, y*) <= g / mu``.
``grid``
    Exhaustive evaluation on trees (default resolution edge length / 1e4) or
    a coarse-to-fine grid on the real line.

``auto`` tries them in that order (grid only on trees and the real line).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, InfeasibleError, SolverError, StrategyError, ValidationError
from .functionals import (SATURATION, Distance, DistanceToSet, Functional, Indicator,
                          RadialPiece, SquaredDistance, WeightedSum)
from .geometry import Ball, EuclideanSpace, MetricTree, Point, SPDSpace
from .report import check_inequalities

log = logging.getLogger(__name__)

AUTO = "auto"
ANALYTIC = "analytic"
INNER_SPLIT = "inner_split"
GRID = "grid"
STRATEGIES = (AUTO, ANALYTIC, INNER_SPLIT, GRID)

_EPS = 2.220446049250313e-16
WARM_PASSES = 5  # cyclic passes before the certified polish
KINK_TOL = 1e-12  # closer than this to a kink, a distance term counts as nonsmooth


@dataclass(frozen=True)
class ResolventOptions:
    strategy: str = AUTO
    inner_tolerance: float = 1e-10
    max_inner_iterations: int = 10_000
    grid_resolution: float | None = None  # default: edge length / 1e4 on trees

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown resolvent strategy {self.strategy!r}")
        if not self.inner_tolerance > 0.0:
            raise ValidationError("inner_tolerance must be positive")
        if int(self.max_inner_iterations) < 1:
            raise ValidationError("max_inner_iterations must be >= 1")
        if self.grid_resolution is not None and not self.grid_resolution > 0.0:
            raise ValidationError("grid_resolution must be positive")

    def to_json(self):
        return {"strategy": self.strategy, "inner_tolerance": self.inner_tolerance,
                "max_inner_iterations": self.max_inner_iterations,
                "grid_resolution": self.grid_resolution}


@dataclass
class ResolventResult:
    """Outcome of one resolvent evaluation.

    ``residual`` bounds the objective gap ``F(point) - min F``;
    ``distance_bound`` bounds ``d(point, argmin F)`` when it is known.
    """

    point: Point
    objective_value: float
    strategy_used: str
    inner_iterations: int = 0
    residual: float = 0.0
    distance_bound: float | None = 0.0
    details: dict = field(default_factory=dict)


def objective(f: Functional, x: Point, lam: float, y: Point) -> float:
    d = f.space._distance(y, x)
    return f.evaluate(y) + d * d / (2.0 * lam)


def _check_lambda(lam) -> float:
    lam = float(lam)
    if math.isnan(lam) or lam < 0.0:
        raise DomainError(f"resolvent parameter must be >= 0, got {lam}")
    if math.isinf(lam):
        raise DomainError("resolvent parameter must be finite")
    return lam


def resolve(f: Functional, x: Point, lam: float, opts: ResolventOptions | None = None
            ) -> ResolventResult:
    """Evaluate ``J_lam(x)`` for ``f``.

    Parameters
    ----------
    f : Functional
    x : Point
    lam : float
        Nonnegative step; ``lam = 0`` returns ``x`` itself.
    opts : ResolventOptions, optional

    Raises
    ------
    DomainError
        Negative ``lam`` or a point of another space.
    InfeasibleError
        The objective is infinite at the computed point.
    StrategyError
        The requested strategy does not apply.
    SolverError
        The inner solver hit its iteration cap above tolerance.
    """
    opts = opts or ResolventOptions()
    f.space.check(x)
    lam = _check_lambda(lam)
    if lam == 0.0:
        return ResolventResult(x, f.evaluate(x), "identity")
    strategy = opts.strategy
    if strategy == AUTO:
        strategy = _auto_strategy(f)
    if strategy == ANALYTIC:
        res = _analytic(f, x, lam)
    elif strategy == INNER_SPLIT:
        res = inner_split_minimize(f, x, lam, opts)
    else:
        res = grid_minimize(f, x, lam, opts)
    if not math.isfinite(res.objective_value):
        raise InfeasibleError("resolvent objective is +inf (empty effective domain?)")
    return res


def _auto_strategy(f: Functional) -> str:
    if f.has_closed_form:
        return ANALYTIC
    s = f.space
    if isinstance(s, MetricTree):
        if _tree_pieces_available(f):
            return ANALYTIC
        return GRID
    if _split_supported(f):
        return INNER_SPLIT
    if isinstance(s, EuclideanSpace) and s.dimension == 1:
        return GRID
    raise StrategyError(f"no resolvent strategy applies to {f!r}")


def _analytic(f, x, lam) -> ResolventResult:
    if f.has_closed_form:
        y = f.closed_form_resolvent(x, lam)
        if y is not None:
            return ResolventResult(y, objective(f, x, lam, y), ANALYTIC)
    if isinstance(f.space, MetricTree) and _tree_pieces_available(f):
        y = _tree_exact(f, x, lam)
        return ResolventResult(y, objective(f, x, lam, y), ANALYTIC, details={"method": "tree_exact"})
    raise StrategyError(f"no closed-form resolvent for {f!r}")


# --------------------------------------------------------------------------
# repeated resolvents (shared by the PPA with constant steps and the flow)
# --------------------------------------------------------------------------

def resolve_power(f: Functional, x: Point, lam: float, n: int,
                  opts: ResolventOptions | None = None) -> Point:
    """``(J_lam)^n x``.

    Euclidean squared-distance, distance and weighted-mean objectives run in
    one compiled loop; every other case calls :func:`resolve` n times.  Both
    routes produce the same floats as n separate :func:`resolve` calls.
    """
    opts = opts or ResolventOptions()
    f.space.check(x)
    lam = _check_lambda(lam)
    n = int(n)
    if n < 0:
        raise DomainError("power must be >= 0")
    if n == 0 or lam == 0.0:
        return x
    fast = _euclid_fast_path(f, opts)
    if fast is not None:
        return fast(x, lam, n)
    y = x
    for _ in range(n):
        y = resolve(f, y, lam, opts).point
    return y


def _single_term(f):
    if isinstance(f, WeightedSum):
        terms = f.terms()
        if len(terms) == 1:
            return terms[0]
        return None
    return 1.0, f


def _euclid_fast_path(f, opts):
    s = f.space
    if not isinstance(s, EuclideanSpace) or opts.strategy not in (AUTO, ANALYTIC):
        return None
    single = _single_term(f)
    if single is not None:
        scale, g = single
        if isinstance(g, SquaredDistance):
            a = np.asarray(g.anchor.payload)

            def run(x, lam, n, g=g, a=a, scale=scale):
                wl = g.weight * (scale * lam)
                t = wl / (1.0 + wl)
                if t == 1.0:
                    return g.anchor
                return s._wrap(kernels.euclid_sqdist_power(np.asarray(x.payload), a, t, n))
            return run
        if isinstance(g, Distance):
            a = np.asarray(g.anchor.payload)

            def run(x, lam, n, g=g, a=a, scale=scale):
                step = g.weight * (scale * lam)
                if step > SATURATION:
                    return g.anchor
                y = kernels.euclid_dist_power(np.asarray(x.payload), a, step, n)
                return g.anchor if np.array_equal(y, a) else s._wrap(y)
            return run
        return None
    if isinstance(f, WeightedSum) and f._closed_form_kind() == "euclidean_mean":
        anchors, weights = f.sq_anchor_arrays()
        anchors = np.ascontiguousarray(anchors)

        def run(x, lam, n):
            return s._wrap(kernels.euclid_sqsum_power(np.asarray(x.payload), anchors, weights, lam, n))
        return run
    return None


# --------------------------------------------------------------------------
# exact solver for radial sums on metric trees
# --------------------------------------------------------------------------

def _tree_pieces_available(f) -> bool:
    t = f.space
    return all(f.edge_pieces(k) is not None for k in range(len(t.edges)))


def _piece_value(p: RadialPiece, o: float) -> float:
    r = abs(o - p.c) + p.k
    if p.shape == "sq":
        return 0.5 * p.w * r * r
    if p.shape == "lin":
        return p.w * r
    if p.shape == "hinge":
        return p.w * max(r - p.rho, 0.0)
    if p.shape == "ind":
        return 0.0 if r <= p.rho + 1e-12 * max(1.0, p.rho) else math.inf
    return 0.0


def _tree_exact(f, x, lam) -> Point:
    """Minimize ``F`` exactly over a tree, edge by edge.

    On each edge every summand is a function of ``|o - c| + k``, so F is a
    convex quadratic between consecutive breakpoints.
    """
    t: MetricTree = f.space
    best = None
    for edge, (_, _, L) in enumerate(t.edges):
        pieces, _ = f.edge_pieces(edge)
        cx, kx = _tree_radial_point(t, x, edge)
        pieces = list(pieces) + [RadialPiece("sq", cx, kx, 1.0 / lam)]
        bps = {0.0, L}
        for p in pieces:
            if 0.0 < p.c < L:
                bps.add(p.c)
            if p.shape in ("hinge", "ind") and p.rho - p.k >= 0.0:
                for b in (p.c - (p.rho - p.k), p.c + (p.rho - p.k)):
                    if 0.0 < b < L:
                        bps.add(b)
        bps = sorted(bps)
        candidates = list(bps)
        for lo, hi in zip(bps[:-1], bps[1:]):
            mid = 0.5 * (lo + hi)
            q2 = q1 = 0.0
            feasible = True
            for p in pieces:
                sgn = 1.0 if mid > p.c else -1.0
                beta = p.k - sgn * p.c
                r_mid = sgn * mid + beta
                if p.shape == "sq":
                    q2 += 0.5 * p.w
                    q1 += p.w * sgn * beta
                elif p.shape == "lin" or (p.shape == "hinge" and r_mid > p.rho):
                    q1 += p.w * sgn
                elif p.shape == "ind" and r_mid > p.rho:
                    feasible = False
                    break
            if feasible and q2 > 0.0:
                candidates.append(min(max(-q1 / (2.0 * q2), lo), hi))
        for o in candidates:
            val = sum(_piece_value(p, o) for p in pieces)
            loc = t.canonical(edge, o)
            key = (val, loc)
            if best is None or val < best[0] or (val == best[0] and loc < best[1]):
                best = key
    if best is None or math.isinf(best[0]):
        raise InfeasibleError("resolvent objective is +inf on the whole tree")
    return t._wrap(best[1])


def _tree_radial_point(t, a, edge):
    from .functionals import _tree_radial
    return _tree_radial(t, a, edge)


# --------------------------------------------------------------------------
# inner split solver
# --------------------------------------------------------------------------

def _split_supported(f) -> bool:
    supported = (SquaredDistance, Distance, DistanceToSet, Indicator)
    return all(isinstance(g, supported) for _, g in f.terms()) and len(f.terms()) > 0


def _term_resolvent(g, w, y, eta):
    """Resolvent of ``w g`` with step eta (every supported summand has one)."""
    return g.closed_form_resolvent(y, w * eta)


def inner_split_minimize(f: Functional, x: Point, lam: float,
                         opts: ResolventOptions | None = None) -> ResolventResult:
    """Minimize ``F = f + d(., x)^2 / (2 lam)`` by splitting over summands.

    Runs cyclic proximal passes with steps ``eta_j = lam / j`` (treating the
    quadratic term as one more summand).  On spaces with tangent structure
    the result is then polished by majorize-minimize steps until the
    strong-convexity certificate reaches ``inner_tolerance``.  On metric
    trees only the passes run; their residual is the last movement times the
    Lipschitz estimate.

    Raises
    ------
    StrategyError
        A summand has no closed-form resolvent.
    SolverError
        ``max_inner_iterations`` reached above tolerance.
    """
    opts = opts or ResolventOptions()
    s = f.space
    s.check(x)
    lam = _check_lambda(lam)
    if lam == 0.0:
        return ResolventResult(x, f.evaluate(x), "identity")
    if not _split_supported(f):
        raise StrategyError(f"{f!r} is not a sum of summands with closed-form resolvents")
    terms = f.terms()
    tol = opts.inner_tolerance
    sq_terms = [(w, g) for w, g in terms if isinstance(g, SquaredDistance)]
    if isinstance(s, SPDSpace) and len(sq_terms) == len(terms):
        return _spd_karcher_resolvent(f, x, lam, opts)

    y = x
    passes = 0
    movement = math.inf
    max_passes = opts.max_inner_iterations if not s.has_tangent else min(WARM_PASSES, opts.max_inner_iterations)
    while passes < max_passes:
        passes += 1
        eta = lam / passes
        y_prev = y
        for w, g in terms:
            y = _term_resolvent(g, w, y, eta)
        wq = 1.0 / lam
        y = s.geodesic(y, x, (wq * eta) / (1.0 + wq * eta))
        movement = s._distance(y, y_prev)
        if movement < tol:
            break
    if not s.has_tangent:
        lip = (f.lipschitz or 0.0) + s._distance(y, x) / lam
        residual = movement * lip
        if movement >= tol:
            raise SolverError("cyclic proximal passes did not settle", best=y, residual=residual)
        return ResolventResult(y, objective(f, x, lam, y), INNER_SPLIT, passes, residual, None)
    return _mm_polish(f, x, lam, y, opts, passes)


def _spd_karcher_resolvent(f, x, lam, opts):
    s = f.space
    anchors = [np.asarray(g.anchor.payload) for _, g in f.terms()] + [np.asarray(x.payload)]
    weights = [w * g.weight for w, g in f.terms()] + [1.0 / lam]
    mu = float(sum(weights))
    Y, iters, gnorm, _, status = kernels.spd_karcher(
        np.asarray(x.payload), np.ascontiguousarray(np.stack(anchors)), np.array(weights),
        opts.inner_tolerance, opts.max_inner_iterations)
    y = s._wrap(Y)
    gap = gnorm * gnorm / (2.0 * mu)
    if status != 0 and gap > opts.inner_tolerance:
        raise SolverError("SPD inner solver did not reach tolerance", best=y, residual=gap)
    return ResolventResult(y, objective(f, x, lam, y), INNER_SPLIT, int(iters), gap, gnorm / mu,
                           details={"method": "karcher"})


class _Model:
    """Gradient data of F at a point (ascent direction and kink candidates)."""

    def __init__(self, f, x, lam):
        self.f = f
        self.x = x
        self.lam = lam
        self.s = f.space
        self.terms = f.terms()
        self.mu = 1.0 / lam + sum(w * g.weight for w, g in self.terms
                                  if isinstance(g, SquaredDistance))
        self.indicators = [g.set for _, g in self.terms if isinstance(g, Indicator)]

    def F(self, y):
        return objective(self.f, self.x, self.lam, y)

    def weighted_anchors(self, y, skip=None):
        """Pairs (c_i, log_y a_i) with F's gradient ``-sum c_i log_y a_i``.

        Kinks (zero distance) contribute nothing and are reported separately.
        """
        s = self.s
        out = [(1.0 / self.lam, s.log(y, self.x))]
        kinks = []
        for i, (w, g) in enumerate(self.terms):
            if i == skip:
                continue
            if isinstance(g, SquaredDistance):
                out.append((w * g.weight, s.log(y, g.anchor)))
            elif isinstance(g, Distance):
                d = s._distance(y, g.anchor)
                if d <= KINK_TOL:
                    kinks.append(i)
                else:
                    out.append((w * g.weight / d, s.log(y, g.anchor)))
            elif isinstance(g, DistanceToSet):
                p = g.set.project(y)
                d = s._distance(y, p)
                if d <= KINK_TOL:
                    kinks.append(i)
                else:
                    out.append((w / d, s.log(y, p)))
        return out, kinks

    def direction(self, y):
        pairs, kinks = self.weighted_anchors(y)
        total = sum(c for c, _ in pairs)
        v = sum(c * v for c, v in pairs)
        return v, total, kinks

    def certificate(self, y, normals=None):
        """Norm of a (conservative) min-norm subgradient of F at y."""
        s = self.s
        pairs, kinks = self.weighted_anchors(y)
        grad = -sum(c * v for c, v in pairs)
        if not kinks:
            return s.norm(y, grad)
        if len(kinks) == 1:
            i = kinks[0]
            w, g = self.terms[i]
            if isinstance(g, Distance):
                return max(s.norm(y, grad) - w * g.weight, 0.0)
            entry = (normals or {}).get(i)
            if entry is None or s._distance(entry[0], y) > KINK_TOL:
                return s.norm(y, grad)
            nu = entry[1]
            sc = min(max(-s.inner(y, grad, nu) / w, 0.0), 1.0)
            return s.norm(y, grad + w * sc * nu)
        return s.norm(y, grad)  # several kinks at once: zero subgradients chosen


def _mm_polish(f, x, lam, y0, opts, passes):
    s = f.space
    m = _Model(f, x, lam)
    tol = opts.inner_tolerance
    y = y0
    for C in m.indicators:
        y = C.project(y)
    Fy = m.F(y)
    it = 0
    gnorm = math.inf
    normals: dict = {}
    movement = math.inf
    best_kink = None
    while True:
        if not m.indicators:
            gnorm = m.certificate(y, normals)
            if gnorm / m.mu <= tol:
                break
            best_kink = _try_kinks(m, y, tol)
            if best_kink is not None:
                y, gnorm = best_kink
                Fy = m.F(y)
                break
        if it >= opts.max_inner_iterations:
            break
        it += 1
        v, total, _ = m.direction(y)
        step = 1.0
        while True:
            cand = s.exp(y, (step / total) * v)
            for C in m.indicators:
                cand = C.project(cand)
            Fc = m.F(cand)
            if Fc <= Fy + 4.0 * _EPS * abs(Fy):
                break
            step *= 0.5
            if step < 1e-12:
                cand = None
                break
        if cand is None:
            break
        movement = s._distance(cand, y)
        _record_normals(m, cand, normals)
        y, Fy = cand, Fc
        if m.indicators:
            gnorm = total * movement
            if gnorm / m.mu <= tol:
                break
    gap = gnorm * gnorm / (2.0 * m.mu)
    dist_bound = gnorm / m.mu
    if not (dist_bound <= tol or gap <= tol) and not m.indicators:
        fb = _fb_polish(m, y, opts)
        if fb is not None and fb[1] < gnorm:
            y, gnorm, extra = fb
            it += extra
            Fy = m.F(y)
            gap = gnorm * gnorm / (2.0 * m.mu)
            dist_bound = gnorm / m.mu
    if not (dist_bound <= tol or gap <= tol):
        raise SolverError(f"inner solver stopped above tolerance after {it} steps",
                          best=y, residual=gap)
    return ResolventResult(y, Fy, INNER_SPLIT, passes + it, gap, dist_bound,
                           details={"method": "split+mm", "passes": passes})


def _fb_polish(m, y, opts, near=1e-6):
    """Forward-backward steps when one set-distance term sits at its kink.

    The smooth terms take a gradient step and the kinked term its closed-form
    resolvent.  Optimality of that resolvent gives the exact subgradient
    ``log_{y+}(z) / eta`` of the kinked term, so the returned norm is a valid
    certificate.  Returns ``(y, gnorm, steps)`` or None.
    """
    s = m.s
    kinked = [i for i, (_, g) in enumerate(m.terms)
              if isinstance(g, DistanceToSet) and g.set.dist(y) <= near]
    if len(kinked) != 1:
        return None
    i = kinked[0]
    w, g = m.terms[i]

    def smooth(p):
        return m.F(p) - w * g._evaluate(p)

    def grad(p):
        pairs, kinks = m.weighted_anchors(p, skip=i)
        if kinks:
            return None, 0.0
        return -sum(c * v for c, v in pairs), sum(c for c, _ in pairs)

    G, total = grad(y)
    if G is None:
        return None
    eta = 1.0 / total
    gnorm = math.inf
    steps = 0
    while steps < opts.max_inner_iterations:
        steps += 1
        sy = smooth(y)
        while True:
            z = s.exp(y, -eta * G)
            yn = g.closed_form_resolvent(z, w * eta)
            v = s.log(y, yn)
            nv = s.norm(y, v)
            if smooth(yn) <= sy + s.inner(y, G, v) + nv * nv / (2.0 * eta) + 4.0 * _EPS * abs(sy):
                break
            eta *= 0.5
            if eta < 1e-16:
                return (y, gnorm, steps) if math.isfinite(gnorm) else None
        Gn, _ = grad(yn)
        if Gn is None:
            return None
        gnorm = s.norm(yn, Gn + s.log(yn, z) / eta)
        y, G = yn, Gn
        if gnorm / m.mu <= opts.inner_tolerance:
            break
        eta *= 1.5
    return y, gnorm, steps


def _record_normals(m, y, normals):
    s = m.s
    for i, (w, g) in enumerate(m.terms):
        if isinstance(g, DistanceToSet):
            p = g.set.project(y)
            d = s._distance(y, p)
            if d > KINK_TOL:
                normals[i] = (p, _unit(s, p, s.log(p, y)))


def _unit(s, p, v):
    return v / s.norm(p, v)


def _outward_normal(s, C, z, y):
    """Unit normal of C at its boundary point z, pointing toward y.

    For balls the normal comes from the center; log_z(y) alone is inaccurate
    when y sits within rounding distance of z.
    """
    if isinstance(C, Ball) and s._distance(z, C.center) > KINK_TOL:
        return -_unit(s, z, s.log(z, C.center))
    return _unit(s, z, s.log(z, y))


def _try_kinks(m, y, tol):
    """Certify a kink point (anchor or set projection) near y, if any."""
    s = m.s
    cands = []
    for i, (w, g) in enumerate(m.terms):
        if isinstance(g, Distance):
            cands.append(g.anchor)
        elif isinstance(g, DistanceToSet):
            p = g.set.project(y)
            if s._distance(y, p) > KINK_TOL:
                cands.append(p)
    for z in cands:
        normals = {}
        for i, (w, g) in enumerate(m.terms):
            if isinstance(g, DistanceToSet):
                p = g.set.project(y)
                d = s._distance(y, p)
                if d > KINK_TOL and s._distance(p, z) == 0.0:
                    normals[i] = (z, _outward_normal(s, g.set, z, y))
        gz = m.certificate(z, normals)
        if gz / m.mu <= tol:
            return z, gz
    return None


# --------------------------------------------------------------------------
# grid search
# --------------------------------------------------------------------------

def grid_minimize(f: Functional, x: Point, lam: float, opts: ResolventOptions | None = None,
                  refine: bool = True) -> ResolventResult:
    """Exhaustive grid minimization of ``F`` (metric trees, real line).

    The residual is the largest objective difference between the best grid
    point and its grid neighbours, an upper bound on the gap for convex F.
    """
    opts = opts or ResolventOptions()
    s = f.space
    lam = _check_lambda(lam)
    if lam == 0.0:
        return ResolventResult(x, f.evaluate(x), "identity")
    if isinstance(s, MetricTree):
        return _tree_grid(f, x, lam, opts, refine)
    if isinstance(s, EuclideanSpace) and s.dimension == 1:
        return _line_grid(f, x, lam, opts)
    raise StrategyError("grid search is available on metric trees and the real line only")


def _tree_grid(f, x, lam, opts, refine):
    t: MetricTree = f.space
    tables = []
    for edge, (_, _, L) in enumerate(t.edges):
        h = opts.grid_resolution or L / 1e4
        tables.append(_edge_table(f, x, lam, edge, 0.0, L, max(int(math.ceil(L / h)), 1)))
    loc, val = _table_min(t, tables)
    residual = _table_residual(t, tables, loc, val)
    if refine and math.isfinite(val):
        fine = []
        for edge, offs, _ in tables:
            o = _offset_on_edge(t, edge, loc)
            if o is None:
                continue
            j = int(np.nonzero(offs == o)[0][0])
            lo = offs[max(j - 1, 0)]
            hi = offs[min(j + 1, len(offs) - 1)]
            fine.append(_edge_table(f, x, lam, edge, float(lo), float(hi), 1000))
        floc, fval = _table_min(t, fine)
        if fval <= val:
            loc, val = floc, fval
            residual = _table_residual(t, fine, loc, val)
    if math.isinf(val):
        raise InfeasibleError("resolvent objective is +inf on the whole tree")
    point = t._wrap(loc)
    return ResolventResult(point, objective(f, x, lam, point), GRID, 0, residual,
                           _grid_distance_bound(f, lam, residual),
                           details={"method": "tree_grid"})


def _edge_table(f, x, lam, edge, lo, hi, cells):
    offs = np.linspace(lo, hi, cells + 1)
    dx = f.space.distances_on_edge(x, edge, offs)
    return edge, offs, f.evaluate_on_edge(edge, offs) + dx * dx / (2.0 * lam)


def _table_min(t, tables):
    best = None
    for edge, offs, vals in tables:
        i = int(np.argmin(vals))
        key = (float(vals[i]), t.canonical(edge, float(offs[i])))
        if best is None or key < best:
            best = key
    return best[1], best[0]


def _offset_on_edge(t, edge, loc):
    """Offset of the locus on ``edge``, or None if it is not on that edge."""
    if loc.edge == edge:
        return loc.offset
    u, w, L = t.edges[edge]
    v = t.vertex_of(t._wrap(loc))
    if v == u:
        return 0.0
    if v == w:
        return L
    return None


def _table_residual(t, tables, loc, val):
    """Largest objective difference to the grid neighbours of ``loc``."""
    out = 0.0
    for edge, offs, vals in tables:
        o = _offset_on_edge(t, edge, loc)
        if o is None:
            continue
        for j in np.nonzero(offs == o)[0]:
            for jj in (j - 1, j + 1):
                if 0 <= jj < len(offs) and math.isfinite(vals[jj]):
                    out = max(out, abs(float(vals[jj]) - val))
    return out


def _grid_distance_bound(f, lam, residual):
    # F is (1/lam)-strongly convex: d(y, y*)^2 <= 2 lam gap
    return math.sqrt(2.0 * lam * residual)


def _line_grid(f, x, lam, opts):
    s = f.space
    x0 = float(x.payload[0])
    h = opts.grid_resolution or 1e-4

    def F(v):
        y = s._wrap(np.array([v]))
        return objective(f, x, lam, y)

    radius = 1.0
    while True:
        lo, hi = x0 - radius, x0 + radius
        vs = np.linspace(lo, hi, 201)
        vals = np.array([F(v) for v in vs])
        i = int(np.argmin(vals))
        if 0 < i < 200 or radius > 1e12:
            break
        radius *= 4.0
    # coarse-to-fine: the minimizer of a convex function lies within one cell
    while (vs[1] - vs[0]) > h:
        lo = vs[max(i - 1, 0)]
        hi = vs[min(i + 1, len(vs) - 1)]
        vs = np.linspace(lo, hi, 201)
        vals = np.array([F(v) for v in vs])
        i = int(np.argmin(vals))
    nb = [abs(vals[j] - vals[i]) for j in (i - 1, i + 1) if 0 <= j < len(vs)]
    residual = float(max(nb + [0.0]))
    y = s._wrap(np.array([vs[i]]))
    if math.isinf(vals[i]):
        raise InfeasibleError("resolvent objective is +inf on the searched interval")
    return ResolventResult(y, float(vals[i]), GRID, 0, residual,
                           _grid_distance_bound(f, lam, residual),
                           details={"method": "line_grid", "cell": float(vs[1] - vs[0])})


# --------------------------------------------------------------------------
# nonexpansiveness
# --------------------------------------------------------------------------

def nonexpansiveness_check(f: Functional, pairs, lam: float,
                           opts: ResolventOptions | None = None, tolerance: float = 1e-8):
    """Check ``d(J x, J y) <= d(x, y)`` on the given pairs.

    Failures are reported, not raised.
    """
    s = f.space
    lam = _check_lambda(lam)
    residuals = []
    ratios = []
    for x, y in pairs:
        jx = resolve(f, x, lam, opts).point
        jy = resolve(f, y, lam, opts).point
        d = s._distance(x, y)
        dj = s._distance(jx, jy)
        residuals.append(dj - d)
        if d > 0.0:
            ratios.append(dj / d)
    return check_inequalities("resolvent nonexpansive", residuals, tolerance, lam=lam,
                              max_ratio=max(ratios) if ratios else None,
                              min_ratio=min(ratios) if ratios else None)

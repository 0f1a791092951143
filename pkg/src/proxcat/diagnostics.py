"""Finite-window surrogates for weak convergence in CAT(0) spaces.

Limits superior and inferior over a sequence are replaced by maxima and
minima over a finite tail window.  The asymptotic center becomes the
minimizer of ``y -> max_p d(p, y)`` over the window, and weak convergence to
``x`` is probed through projections of the window onto geodesics through
``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DomainError, ValidationError
from .functionals import Functional
from .geometry import ConvexSet, MetricTree, Point, Singleton
from .report import FAIL, PASS, CertificateReport, check_inequalities

DEFAULT_WINDOW = 50
CENTER_BUDGET = 200
WEAK_TOL = 1e-3
FEJER_TOL = 1e-9
LSC_TOL = 1e-6


@dataclass
class SequenceWindow:
    """A finite tail ``x_K, ..., x_N`` of a sequence in ``space``."""

    space: object
    points: list
    origin_trace_id: str = ""

    def __post_init__(self):
        self.points = list(self.points)
        if not self.points:
            raise ValidationError("sequence window is empty")
        for i, p in enumerate(self.points):
            if p.space_id != self.space.id:
                raise ValidationError(f"window point {i} lives in {p.space_id}, not {self.space.id}")

    @classmethod
    def from_trace(cls, trace, length: int = DEFAULT_WINDOW, trace_id: str = "") -> "SequenceWindow":
        if length < 1:
            raise ValidationError("window length must be >= 1")
        return cls(trace.space, trace.iterates[-length:], trace_id)

    def __len__(self):
        return len(self.points)


def _radius(space, pts, y) -> float:
    return max(space._distance(p, y) for p in pts)


def _min_norm_weights(G: np.ndarray) -> np.ndarray:
    """Simplex weights minimizing ``w^T G w`` (min-norm point of a convex hull)."""
    k = G.shape[0]
    if k == 1:
        return np.ones(1)
    res = minimize(lambda w: float(w @ G @ w), np.full(k, 1.0 / k), jac=lambda w: 2.0 * G @ w,
                   method="SLSQP", bounds=[(0.0, 1.0)] * k,
                   constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0}],
                   options={"ftol": 1e-16, "maxiter": 200})
    w = np.clip(res.x, 0.0, None)
    return w / w.sum()


def _descent_target(space, pts, best, dists, fbest, eps):
    """Endpoint of the eps-steepest descent direction of the window radius.

    The direction is the min-norm point of the convex hull of the unit
    directions toward the eps-active window points.  Returns None when the
    space has no tangent structure or the direction vanishes.
    """
    idx = [k for k in range(len(pts)) if dists[k] >= fbest - eps and dists[k] > 0.0]
    try:
        U = [space.log(best, pts[k]) / dists[k] for k in idx]
    except NotImplementedError:
        return None
    G = np.array([[space.inner(best, u, v) for v in U] for u in U])
    w = _min_norm_weights(G)
    v = sum(wi * u for wi, u in zip(w, U))
    nv = space.norm(best, v)
    if nv <= 1e-12:
        return None
    return space.exp(best, v * (fbest / nv))


def _tree_center(space, pts) -> Point:
    # in an R-tree the circumcenter is the midpoint of a diametral pair
    D, a, b = -1.0, pts[0], pts[0]
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            d = space._distance(p, q)
            if d > D:
                D, a, b = d, p, q
    return space.geodesic(a, b, 0.5)


def asymptotic_center(window: SequenceWindow, search=CENTER_BUDGET,
                      rng: np.random.Generator | None = None, rounds: int = 200) -> Point:
    """Minimizer of the window radius ``y -> max_p d(p, y)``.

    Parameters
    ----------
    window : SequenceWindow
    search : int or ConvexSet
        Number of sampled candidates, or a convex set to search in (then
        200 candidates are drawn and projected onto it).
    rng : numpy.random.Generator, optional
    rounds : int
        Maximum refinement rounds.

    Notes
    -----
    On metric trees without a constraint set the center is the midpoint of
    a diametral pair and is returned directly.  Elsewhere candidates are
    the window points and random points on geodesics between them.  The
    best candidate is refined by bounded one-dimensional minimization along
    geodesics toward the farthest window points, midpoints of pairs of
    nearly farthest points, the runner-up candidates and, when the space
    has a tangent structure, the eps-steepest descent direction of the
    radius.  A move is taken only if it lowers the radius, so the result is
    never worse than any sampled candidate.
    """
    pts = window.points
    space = window.space
    rng = rng if rng is not None else np.random.default_rng(0)
    C = search if isinstance(search, ConvexSet) else None
    budget = CENTER_BUDGET if C is not None else int(search)
    if budget < 0:
        raise ValidationError("candidate budget must be >= 0")
    if C is None and isinstance(space, MetricTree):
        return _tree_center(space, pts)
    proj = (lambda y: C.project(y)) if C is not None else (lambda y: y)

    cands = [proj(p) for p in pts]
    m = len(pts)
    for _ in range(budget):
        i, j = rng.integers(m), rng.integers(m)
        cands.append(proj(space.geodesic(pts[i], pts[j], float(rng.random()))))
    vals = np.array([_radius(space, pts, y) for y in cands])
    order = np.argsort(vals, kind="stable")
    best, fbest = cands[order[0]], float(vals[order[0]])
    runners = [cands[k] for k in order[1:6]]

    eps = 1e-2 * fbest
    for _ in range(rounds):
        if fbest == 0.0:
            break
        dists = np.array([space._distance(p, best) for p in pts])
        ranked = np.argsort(-dists, kind="stable")
        targets = [proj(pts[k]) for k in ranked[:3]]
        active = [k for k in ranked[:6] if dists[k] >= fbest - eps]
        targets += [proj(space.geodesic(pts[i], pts[j], 0.5))
                    for n, i in enumerate(active) for j in active[n + 1:]]
        t = _descent_target(space, pts, best, dists, fbest, eps)
        if t is not None:
            targets.append(proj(t))
        f0 = fbest
        for q in targets + runners:
            if space._distance(best, q) == 0.0:
                continue
            res = minimize_scalar(lambda t: _radius(space, pts, space.geodesic(best, q, t)),
                                  bounds=(0.0, 1.0), method="bounded",
                                  options={"xatol": 1e-12})
            y = space.geodesic(best, q, float(res.x))
            fy = _radius(space, pts, y)
            if fy < fbest * (1.0 - 1e-15) - 1e-300:
                best, fbest = y, fy
        if fbest >= f0 * (1.0 - 1e-14):
            # no progress at this activity level: sharpen it, stop once exhausted
            eps *= 0.1
            if eps < 1e-13 * f0:
                break
    return best


@dataclass
class WeakConvergenceReport:
    candidate_limit: Point
    gaps: list
    max_gap: float
    verdict: str
    tolerance: float
    window_length: int
    probes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_json(self, space=None):
        return {
            "candidate_limit": (space.payload_to_json(self.candidate_limit)
                                if space is not None else None),
            "gaps": list(self.gaps), "max_gap": self.max_gap, "verdict": self.verdict,
            "tolerance": self.tolerance, "window_length": self.window_length,
        }


def _geodesic_through(space, x: Point, z: Point, rng) -> tuple[Point, Point]:
    """Endpoints (a, b) of a geodesic containing ``x`` and ending at ``z``.

    ``x`` is placed at a random interior parameter when the geodesic from
    ``z`` through ``x`` can be prolonged; otherwise ``x`` is an endpoint.
    """
    if isinstance(space, MetricTree):
        dzx = space._distance(z, x)
        for _ in range(64):
            w = space.random_point(rng)
            if abs(space._distance(z, w) - dzx - space._distance(x, w)) <= 1e-12 * (1.0 + dzx):
                if space._distance(x, w) > 0.0:
                    return z, w
        return z, x
    factor = float(rng.uniform(0.1, 2.0))
    w = space.extend_through(z, x, factor)
    return (z, x) if w is None else (z, w)


def weak_convergence_check(window: SequenceWindow, x: Point, geodesic_budget: int = 16,
                           rng: np.random.Generator | None = None,
                           tolerance: float = WEAK_TOL) -> WeakConvergenceReport:
    """Probe ``d(x, P_gamma(x_n)) -> 0`` on random geodesics ``gamma`` through ``x``.

    For each probe the tail maximum of the projection gaps is recorded.  The
    second endpoint alternates between a random point near ``x`` and a random
    window point, so that geodesics aligned with the window are always
    among the probes.  The verdict passes iff every tail maximum is at most
    ``tolerance``.
    """
    if int(geodesic_budget) < 1:
        raise ValidationError("geodesic_budget must be >= 1")
    space = window.space
    space.check(x)
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = window.points
    spread = max(_radius(space, pts, x), 1.0)
    gaps, probes = [], []
    for k in range(int(geodesic_budget)):
        z = None
        if k % 2 == 1:
            z = pts[int(rng.integers(len(pts)))]
        if z is None or space._distance(z, x) == 0.0:
            for _ in range(32):
                z = space.random_point(rng, center=x, scale=spread)
                if space._distance(z, x) > 0.0:
                    break
        a, b = _geodesic_through(space, x, z, rng)
        g = max(space._distance(x, space.project_segment(a, b, p)) for p in pts)
        gaps.append(g)
        probes.append((a, b))
    max_gap = max(gaps)
    verdict = PASS if max_gap <= tolerance else FAIL
    return WeakConvergenceReport(x, gaps, max_gap, verdict, tolerance, len(pts), probes)


def _fixed_point_of(C: ConvexSet, anchor: Point) -> Point:
    if isinstance(C, Singleton):
        return C.point
    return C.project(anchor)


def fejer_analysis(window: SequenceWindow, C: ConvexSet,
                   tolerance: float = FEJER_TOL) -> CertificateReport:
    """Fejér diagnostics of a window with respect to a closed convex set ``C``.

    Checks boundedness ``d(x_n, c) <= d(x_0, c)`` for a fixed ``c`` in ``C``
    and monotonicity ``d_C(x_{n+1}) <= d_C(x_n)``.  The worst index is the
    position in the window of the offending point.
    """
    pts = window.points
    space = C.space
    if space.id != window.space.id:
        raise DomainError(f"set lives in {space.id}, not {window.space.id}")
    c = _fixed_point_of(C, pts[0])
    dc = [space._distance(p, c) for p in pts]
    dC = [C.dist(p) for p in pts]
    mono = check_inequalities("fejer_set_distance",
                              (dC[i] - dC[i - 1] for i in range(1, len(dC))), tolerance, start=1)
    bound = check_inequalities("fejer_bounded", (d - dc[0] for d in dc[1:]), tolerance, start=1)
    worst = mono if mono.worst_residual >= bound.worst_residual else bound
    status = PASS if (mono.passed and bound.passed) else FAIL
    return CertificateReport(
        "fejer_analysis", status, worst.worst_residual, worst.worst_index, tolerance,
        max(len(pts) - 1, 0),
        {"set_distance": mono.to_json(), "bounded": bound.to_json(),
         "max_distance_to_c": max(dc), "window_length": len(pts)})


def weak_lsc_probe(f: Functional, window: SequenceWindow, x: Point,
                   tolerance: float = LSC_TOL) -> CertificateReport:
    """Finite surrogate of ``liminf f(x_n) >= f(x)``: ``min_n f(x_n) >= f(x) - tol``."""
    f.space.check(x, *window.points)
    vals = [f.evaluate(p) for p in window.points]
    k = int(np.argmin(vals))
    fx = f.evaluate(x)
    if math.isinf(fx) and fx > 0:
        raise DomainError("weak lsc probe needs f(x) < inf")
    res = fx - vals[k]
    status = PASS if res <= tolerance else FAIL
    return CertificateReport("weak_lsc", status, res, k, tolerance, len(vals),
                             {"min_tail_value": vals[k], "f_limit": fx,
                              "window_length": len(vals)})


__all__ = ["SequenceWindow", "WeakConvergenceReport", "asymptotic_center",
           "weak_convergence_check", "fejer_analysis", "weak_lsc_probe"]

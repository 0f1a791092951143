"""Gradient-flow semigroup ``T_lam x = lim_n (J_{lam/n})^n x``.

The limit is approximated by doubling ``n`` until two consecutive
approximants are within ``doubling_tolerance``.  Semigroup and
nonexpansiveness laws are checked with a slack of three tolerances, one per
approximate flow evaluation involved.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

from .errors import DomainError, InfeasibleError, ValidationError
from .functionals import Functional
from .geometry import Point
from .ppa import (CERT_TOL, Trace, bounded_certificate, fejer_certificate, rate_certificate,
                  value_monotone_certificate)
from .report import FAIL, INCONCLUSIVE, PASS, CertificateReport
from .resolvent import ResolventOptions, resolve_power

log = logging.getLogger(__name__)

SLACK = 3.0


@dataclass(frozen=True)
class FlowOptions:
    doubling_tolerance: float = 1e-8
    max_doublings: int = 24
    initial_n: int = 1
    resolvent: ResolventOptions = ResolventOptions()

    def __post_init__(self):
        if not self.doubling_tolerance > 0.0:
            raise ValidationError("doubling_tolerance must be positive")
        if int(self.max_doublings) < 1:
            raise ValidationError("max_doublings must be >= 1")
        if int(self.initial_n) < 1:
            raise ValidationError("initial_n must be >= 1")

    def to_json(self):
        return {"doubling_tolerance": self.doubling_tolerance,
                "max_doublings": self.max_doublings, "initial_n": self.initial_n,
                "resolvent": self.resolvent.to_json()}


@dataclass
class FlowResult:
    """Approximation of ``T_lam x``.

    ``last_gap`` is ``d(y_{n/2}, y_n)`` for the returned ``y_n``; zero when no
    doubling was needed.
    """

    point: Point
    n_used: int
    last_gap: float
    converged: bool
    gaps: tuple = ()


def flow_apply(f: Functional, x: Point, lam: float, opts: FlowOptions | None = None) -> FlowResult:
    """Approximate the flow ``T_lam x`` by resolvent powers.

    Parameters
    ----------
    f : Functional
    x : Point
        Starting point with ``f(x) < inf``.
    lam : float
        Flow time, nonnegative.
    opts : FlowOptions, optional

    Returns
    -------
    FlowResult
        ``converged`` is False when ``max_doublings`` ran out; the point is then
        the finest approximant computed.
    """
    opts = opts or FlowOptions()
    f.space.check(x)
    lam = float(lam)
    if math.isnan(lam) or lam < 0.0 or math.isinf(lam):
        raise DomainError(f"flow time must be finite and >= 0, got {lam}")
    if lam == 0.0:
        return FlowResult(x, 0, 0.0, True)
    if not math.isfinite(f.evaluate(x)):
        raise InfeasibleError("flow start must satisfy f(x) < inf")
    s = f.space
    n = int(opts.initial_n)
    prev = resolve_power(f, x, lam / n, n, opts.resolvent)
    gaps = []
    for _ in range(int(opts.max_doublings)):
        n *= 2
        cur = resolve_power(f, x, lam / n, n, opts.resolvent)
        gap = s._distance(prev, cur)
        gaps.append(gap)
        log.debug("flow lam=%g n=%d gap=%.3e", lam, n, gap)
        prev = cur
        if gap <= opts.doubling_tolerance:
            return FlowResult(cur, n, gap, True, tuple(gaps))
    log.warning("flow at lam=%g did not converge: gap %.3e after n=%d", lam, gaps[-1], n)
    return FlowResult(prev, n, gaps[-1], False, tuple(gaps))


def semigroup_certificate(f: Functional, x: Point, s: float, t: float,
                          opts: FlowOptions | None = None) -> CertificateReport:
    """Check ``d(T_{s+t} x, T_s(T_t x)) <= 3 * doubling_tolerance``."""
    opts = opts or FlowOptions()
    if not (s >= 0.0 and t >= 0.0):
        raise DomainError("flow times must be nonnegative")
    tol = SLACK * opts.doubling_tolerance
    inner = flow_apply(f, x, t, opts)
    outer = flow_apply(f, inner.point, s, opts)
    whole = flow_apply(f, x, s + t, opts)
    sp = f.space
    gap = sp._distance(whole.point, outer.point)
    details = {"T_s_T_t": sp.payload_to_json(outer.point),
               "T_s_plus_t": sp.payload_to_json(whole.point), "gap": gap}
    if not (inner.converged and outer.converged and whole.converged):
        status = INCONCLUSIVE
    else:
        status = PASS if gap <= tol else FAIL
    return CertificateReport("semigroup", status, gap, 0, tol, 1, details)


def flow_nonexpansive_certificate(f: Functional, x: Point, y: Point, lam: float,
                                  opts: FlowOptions | None = None) -> CertificateReport:
    """Check ``d(T_lam x, T_lam y) <= d(x, y) + 3 * doubling_tolerance``."""
    opts = opts or FlowOptions()
    tol = SLACK * opts.doubling_tolerance
    fx = flow_apply(f, x, lam, opts)
    fy = flow_apply(f, y, lam, opts)
    s = f.space
    before = s._distance(x, y)
    after = s._distance(fx.point, fy.point)
    res = after - before
    if not (fx.converged and fy.converged):
        status = INCONCLUSIVE
    else:
        status = PASS if res <= tol else FAIL
    return CertificateReport("flow_nonexpansive", status, res, 0, tol, 1,
                             {"before": before, "after": after})


def flow_convergence_run(f: Functional, x: Point, lambda_grid, opts: FlowOptions | None = None,
                         certify: bool = True) -> Trace:
    """Evaluate ``T_lam x`` along an increasing grid of flow times.

    The returned trace has ``kind="flow"``; ``lambdas`` holds the grid and
    ``step_distances`` the distances between consecutive grid evaluations.
    Value monotonicity and the Fejér property are certified with slack
    ``3 * doubling_tolerance``.
    """
    opts = opts or FlowOptions()
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValidationError("lambda grid is empty")
    if any(not (v > 0.0) or not math.isfinite(v) for v in grid):
        raise ValidationError("lambda grid entries must be positive and finite")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("lambda grid must be strictly increasing")
    s = f.space
    iterates = [x]
    values = [f.evaluate(x)]
    steps, times, results = [], [], []
    for lam in grid:
        t0 = time.perf_counter()
        r = flow_apply(f, x, lam, opts)
        times.append(time.perf_counter() - t0)
        results.append(r)
        steps.append(s._distance(iterates[-1], r.point))
        iterates.append(r.point)
        values.append(f.evaluate(r.point))
    converged = all(r.converged for r in results)
    trace = Trace(s, iterates, grid, values, steps, times, f.known_minimizer, f.known_infimum,
                  "flow", "grid_complete" if converged else "not_converged")
    trace.notes.append({"n_used": [r.n_used for r in results],
                        "last_gap": [r.last_gap for r in results]})
    if certify:
        tol = CERT_TOL + SLACK * opts.doubling_tolerance
        certs = trace.certificates
        certs["value_monotone"] = value_monotone_certificate(trace, tol)
        c = trace.minimizer
        if c is None:
            for name in ("fejer", "bounded", "rate"):
                certs[name] = CertificateReport.skipped(name, "no known minimizer")
        else:
            certs["fejer"] = fejer_certificate(trace, c, tol)
            certs["bounded"] = bounded_certificate(trace, c, tol)
            certs["rate"] = rate_certificate(trace, c, trace.infimum, tol)
        if not converged:
            for rep in certs.values():
                if rep.status == PASS:
                    rep.status = INCONCLUSIVE
    return trace


__all__ = ["FlowOptions", "FlowResult", "flow_apply", "semigroup_certificate",
           "flow_nonexpansive_certificate", "flow_convergence_run"]

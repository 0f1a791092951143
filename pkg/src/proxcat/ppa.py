"""The proximal point algorithm ``x_n = J_{lam_n}(x_{n-1})`` with certificates.

Every inequality used in the convergence proof is re-checked on the
computed trace: Fejér monotonicity with respect to a minimizer, the
telescoping estimate ``lam_k (f(x_k) - inf f) <= (d(x_{k-1},c)^2 - d(x_k,c)^2)/2``,
the rate ``f(x_n) - inf f <= d(x_0,c)^2 / sum_k lam_k`` and, for uniformly
convex objectives, the Cauchy witness behind strong convergence.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import ProxError, ValidationError
from .functionals import Functional
from .geometry import Point
from .report import FAIL, INAPPLICABLE, PASS, CertificateReport, check_inequalities
from .resolvent import ResolventOptions, resolve

log = logging.getLogger(__name__)

CERT_TOL = 1e-9
PPA_HEADER = ["n", "lambda", "f_value", "step_distance", "dist_to_minimizer",
              "fejer_residual", "rate_bound"]


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``lam_n`` for n = 1, 2, ...

    Parameters
    ----------
    kind : {"constant", "harmonic", "polynomial", "explicit"}
        ``constant``: lam_n = c.  ``harmonic``: lam_n = c / n.
        ``polynomial``: lam_n = c n^(-p) with p in [0, 1].
        ``explicit``: the given list; its divergence cannot be checked, so
        ``divergence_validated`` is False.
    """

    kind: str
    c: float = 1.0
    p: float = 1.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "polynomial", "explicit"):
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValidationError("explicit schedule is empty")
            for i, v in enumerate(vals):
                if not (v > 0.0) or not math.isfinite(v):
                    raise ValidationError(f"step size lambda_{i + 1} = {v} must be positive")
            object.__setattr__(self, "values", vals)
        else:
            if not (self.c > 0.0) or not math.isfinite(self.c):
                raise ValidationError(f"schedule constant c = {self.c} must be positive")
            if self.kind == "polynomial" and not (0.0 <= self.p <= 1.0):
                raise ValidationError("polynomial exponent p must lie in [0, 1]")

    @classmethod
    def constant(cls, lam: float) -> "StepSchedule":
        return cls("constant", c=lam)

    @classmethod
    def harmonic(cls, c: float) -> "StepSchedule":
        return cls("harmonic", c=c)

    @classmethod
    def polynomial(cls, c: float, p: float) -> "StepSchedule":
        return cls("polynomial", c=c, p=p)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "StepSchedule":
        return cls("explicit", values=tuple(values))

    @property
    def divergence_validated(self) -> bool:
        return self.kind != "explicit"

    @property
    def length(self) -> int | None:
        return len(self.values) if self.kind == "explicit" else None

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValidationError("schedule index starts at 1")
        if self.kind == "constant":
            return float(self.c)
        if self.kind == "harmonic":
            return self.c / n
        if self.kind == "polynomial":
            return self.c * n ** (-self.p)
        return self.values[n - 1]

    def to_json(self):
        if self.kind == "explicit":
            return {"kind": "explicit", "values": list(self.values)}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "c": self.c, "p": self.p}
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class StopRule:
    max_iterations: int = 1000
    step_distance_below: float | None = 1e-10
    value_gap_below: float | None = None

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValidationError("max_iterations must be >= 1")
        for name in ("step_distance_below", "value_gap_below"):
            v = getattr(self, name)
            if v is not None and not v >= 0.0:
                raise ValidationError(f"{name} must be nonnegative")

    def to_json(self):
        return {"max_iterations": self.max_iterations,
                "step_distance_below": self.step_distance_below,
                "value_gap_below": self.value_gap_below}


@dataclass
class Trace:
    """Record of a PPA run (``kind="ppa"``) or a flow run (``kind="flow"``).

    ``iterates[0]`` is the starting point.  ``lambdas[i]``, ``values[i]`` and
    ``step_distances[i]`` describe ``iterates[i + 1]`` ... except ``values``,
    which has one entry per iterate (``values[0] = f(x_0)``).
    """

    space: object
    iterates: list
    lambdas: list
    values: list
    step_distances: list
    wall_times: list
    minimizer: Point | None = None
    infimum: float | None = None
    kind: str = "ppa"
    stop_reason: str = ""
    certificates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.iterates) - 1

    def dist_to_minimizer(self):
        if self.minimizer is None:
            return None
        s = self.space
        return [s._distance(x, self.minimizer) for x in self.iterates]

    def cumulative_lambda(self):
        out, acc = [], 0.0
        for lam in self.lambdas:
            acc += lam
            out.append(acc)
        return out

    def rate_bounds(self):
        """``d(x_0, c)^2 / sum_{k<=n} lam_k`` for n = 1..N.

        For a flow trace the sum is replaced by the flow time ``lam``: the
        PPA bound with n steps of size ``lam/n`` passes to the limit.
        """
        if self.minimizer is None:
            return None
        d0 = self.space._distance(self.iterates[0], self.minimizer)
        total = self.lambdas if self.kind == "flow" else self.cumulative_lambda()
        return [d0 * d0 / S for S in total]

    def rows(self):
        dist = self.dist_to_minimizer()
        rates = self.rate_bounds()
        for i in range(1, len(self.iterates)):
            yield {
                "n": i,
                "lambda": self.lambdas[i - 1],
                "f_value": self.values[i],
                "step_distance": self.step_distances[i - 1],
                "dist_to_minimizer": None if dist is None else dist[i],
                "fejer_residual": None if dist is None else dist[i] - dist[i - 1],
                "rate_bound": None if rates is None else rates[i - 1],
            }

    def to_csv(self) -> str:
        """CSV text with the fixed column schema (no timings, so reproducible)."""
        header = PPA_HEADER if self.kind == "ppa" else FLOW_HEADER
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in self.rows():
            w.writerow([_fmt(row[k]) for k in header])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "steps": self.n_steps,
            "stop_reason": self.stop_reason,
            "final_value": self.values[-1],
            "final_point": self.space.payload_to_json(self.iterates[-1]),
            "certificates": {k: v.to_json() for k, v in self.certificates.items()},
            "notes": list(self.notes),
        }


FLOW_HEADER = ["lambda", "f_value", "step_distance", "dist_to_minimizer",
               "fejer_residual", "rate_bound"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def run_ppa(f: Functional, x0: Point, sched: StepSchedule, stop: StopRule | None = None,
            opts: ResolventOptions | None = None, certify: bool = True) -> Trace:
    """Run the proximal point algorithm from ``x0``.

    Parameters
    ----------
    f : Functional
    x0 : Point
    sched : StepSchedule
    stop : StopRule, optional
        Defaults to 1000 iterations or a step shorter than 1e-10.
    opts : ResolventOptions, optional
    certify : bool
        Evaluate the certificates at the end of the run.

    Returns
    -------
    Trace

    Raises
    ------
    ProxError
        Any resolvent failure, with ``step`` set to the iteration index.
    """
    stop = stop or StopRule()
    opts = opts or ResolventOptions()
    s = f.space
    s.check(x0)
    if stop.value_gap_below is not None and f.known_infimum is None:
        raise ValidationError("value_gap_below needs known_infimum")
    if not sched.divergence_validated:
        log.warning("explicit schedule: divergence of sum(lambda_n) is not validated")
    x = x0
    iterates = [x0]
    values = [f.evaluate(x0)]
    lambdas, steps, times = [], [], []
    reason = "max_iterations"
    n_max = stop.max_iterations
    if sched.length is not None and sched.length < n_max:
        n_max = sched.length
        reason = "schedule_exhausted"
    for n in range(1, n_max + 1):
        lam = sched(n)
        t0 = time.perf_counter()
        try:
            res = resolve(f, x, lam, opts)
        except ProxError as exc:
            exc.step = n
            exc.args = (f"step {n}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        times.append(time.perf_counter() - t0)
        y = res.point
        steps.append(s._distance(x, y))
        lambdas.append(lam)
        values.append(f.evaluate(y))
        iterates.append(y)
        x = y
        if stop.step_distance_below is not None and steps[-1] < stop.step_distance_below:
            reason = "step_distance_below"
            break
        if stop.value_gap_below is not None and values[-1] - f.known_infimum < stop.value_gap_below:
            reason = "value_gap_below"
            break
    trace = Trace(s, iterates, lambdas, values, steps, times, f.known_minimizer,
                  f.known_infimum, "ppa", reason)
    if not sched.divergence_validated:
        trace.notes.append("explicit schedule: sum of step sizes not validated as divergent")
    if certify:
        certify_trace(trace, f)
    return trace


def certify_trace(trace: Trace, f: Functional) -> dict:
    """Attach every applicable certificate to ``trace``."""
    c, inf = trace.minimizer, trace.infimum
    certs = trace.certificates
    certs["value_monotone"] = value_monotone_certificate(trace)
    if c is None:
        reason = "no known minimizer"
        for name in ("fejer", "bounded", "rate", "estimate"):
            certs[name] = CertificateReport.skipped(name, reason)
        log.warning("certificates needing a minimizer are skipped (%s)", reason)
    else:
        certs["fejer"] = fejer_certificate(trace, c)
        certs["bounded"] = bounded_certificate(trace, c)
        certs["rate"] = rate_certificate(trace, c, inf)
        certs["estimate"] = estimate_certificate(trace, c, inf)
    phi = f.uniform_modulus()
    if phi is None or inf is None:
        certs["strong_convergence"] = CertificateReport(
            "strong_convergence", INAPPLICABLE,
            details={"reason": "no uniform convexity modulus" if phi is None else "no known infimum"})
    else:
        certs["strong_convergence"] = strong_convergence_certificate(trace, phi, inf)
    return certs


def value_monotone_certificate(trace: Trace, tolerance: float = CERT_TOL) -> CertificateReport:
    v = trace.values
    return check_inequalities("value_monotone", (v[i] - v[i - 1] for i in range(1, len(v))),
                              tolerance, start=1)


def fejer_certificate(trace: Trace, c: Point, tolerance: float = CERT_TOL) -> CertificateReport:
    """``d(x_n, c) <= d(x_{n-1}, c)`` for every n; the worst index is n."""
    s = trace.space
    d = [s._distance(x, c) for x in trace.iterates]
    return check_inequalities("fejer", (d[i] - d[i - 1] for i in range(1, len(d))), tolerance,
                              start=1)


def bounded_certificate(trace: Trace, c: Point, tolerance: float = CERT_TOL) -> CertificateReport:
    s = trace.space
    d = [s._distance(x, c) for x in trace.iterates]
    return check_inequalities("bounded", (di - d[0] for di in d[1:]), tolerance, start=1)


def rate_certificate(trace: Trace, c: Point, inf_f: float | None,
                     tolerance: float = CERT_TOL) -> CertificateReport:
    """``f(x_n) - inf f <= d(x_0, c)^2 / sum_{k<=n} lam_k`` for n >= 1."""
    if inf_f is None:
        return CertificateReport.skipped("rate", "no known infimum")
    bounds = Trace(trace.space, trace.iterates, trace.lambdas, trace.values, [], [], c,
                   kind=trace.kind).rate_bounds()
    return check_inequalities(
        "rate", (trace.values[n] - inf_f - bounds[n - 1] for n in range(1, len(trace.values))),
        tolerance, start=1)


def estimate_certificate(trace: Trace, c: Point, inf_f: float | None,
                         tolerance: float = CERT_TOL) -> CertificateReport:
    """``lam_k (f(x_k) - inf f) <= (d(x_{k-1},c)^2 - d(x_k,c)^2) / 2`` for every k."""
    if inf_f is None:
        return CertificateReport.skipped("estimate", "no known infimum")
    s = trace.space
    d = [s._distance(x, c) for x in trace.iterates]

    def gen():
        for k in range(1, len(d)):
            lhs = trace.lambdas[k - 1] * (trace.values[k] - inf_f)
            yield lhs - 0.5 * (d[k - 1] * d[k - 1] - d[k] * d[k])
    return check_inequalities("estimate", gen(), tolerance, start=1)


def strong_convergence_certificate(trace: Trace, modulus: Callable[[float], float] | None,
                                   inf_f: float | None = None, tolerance: float = CERT_TOL,
                                   max_pairs: int = 2000) -> CertificateReport:
    """Cauchy witness under uniform convexity with modulus ``phi``.

    Checks ``phi(d(x_n, x_m)) / 4 <= (f(x_n) - inf)/2 + (f(x_m) - inf)/2`` on
    sampled pairs and reports tail diameters ``max_{n,m >= K} d(x_n, x_m)``,
    which must be nonincreasing in K.  Marked inapplicable without a modulus.
    """
    if modulus is None:
        return CertificateReport("strong_convergence", INAPPLICABLE,
                                 details={"reason": "no uniform convexity modulus"})
    inf_f = trace.infimum if inf_f is None else inf_f
    if inf_f is None:
        return CertificateReport.skipped("strong_convergence", "no known infimum")
    s = trace.space
    xs = trace.iterates
    N = len(xs)
    pairs = [(n, m) for n in range(N) for m in range(n + 1, N)]
    if len(pairs) > max_pairs:
        stride = len(pairs) / max_pairs
        pairs = [pairs[int(i * stride)] for i in range(max_pairs)]
    res = []
    for n, m in pairs:
        lhs = 0.25 * modulus(s._distance(xs[n], xs[m]))
        rhs = 0.5 * (trace.values[n] - inf_f) + 0.5 * (trace.values[m] - inf_f)
        res.append(lhs - rhs)
    diam = tail_diameters(trace)
    rep = check_inequalities("strong_convergence", res, tolerance,
                             tail_diameters=diam)
    if rep.worst_index is not None:
        # report the iterate, not the position in the sampled pair list
        n, m = pairs[rep.worst_index]
        rep.worst_index = m
        rep.details["worst_pair"] = [n, m]
    increases = [diam[k] - diam[k - 1] for k in range(1, len(diam))]
    if increases and max(increases) > tolerance:
        rep.status = FAIL
        rep.details["tail_diameter_increase"] = max(increases)
    return rep


def tail_diameters(trace: Trace, starts: Sequence[int] | None = None):
    """``max_{n,m >= K} d(x_n, x_m)`` for each K (all K by default)."""
    s = trace.space
    xs = trace.iterates
    N = len(xs)
    # diameters of suffixes, built from the back
    diam = [0.0] * N
    for K in range(N - 2, -1, -1):
        far = max(s._distance(xs[K], xs[m]) for m in range(K + 1, N))
        diam[K] = max(diam[K + 1], far)
    if starts is None:
        return diam
    return [diam[K] for K in starts]


def tail_diameter(trace: Trace, last: int) -> float:
    """Diameter of the last ``last`` iterates."""
    s = trace.space
    xs = trace.iterates[-last:]
    return max((s._distance(a, b) for i, a in enumerate(xs) for b in xs[i + 1:]), default=0.0)


def write_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace.to_csv())


__all__ = ["StepSchedule", "StopRule", "Trace", "run_ppa", "certify_trace",
           "fejer_certificate", "rate_certificate", "estimate_certificate",
           "strong_convergence_certificate", "value_monotone_certificate",
           "bounded_certificate", "tail_diameters", "tail_diameter", "write_csv",
           "PPA_HEADER", "FLOW_HEADER", "PASS"]

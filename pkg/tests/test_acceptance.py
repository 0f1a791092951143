"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]`` or ``[FAIL]`` line naming its criterion
before asserting, so the verdicts appear in the ``pytest -v`` log.  Runtime
budgets are part of the criteria and are asserted as well.
"""

import math
import os
import time

import numpy as np
import pytest

from conftest import sample_tree
from proxcat.cli import main
from proxcat.diagnostics import SequenceWindow, weak_convergence_check
from proxcat.flow import (FlowOptions, flow_apply, flow_convergence_run,
                          flow_nonexpansive_certificate, semigroup_certificate)
from proxcat.functionals import Distance, DistanceToSet, Indicator, SquaredDistance, WeightedSum
from proxcat.geometry import (Ball, EuclideanSpace, HyperbolicSpace, MetricTree, Segment,
                              Singleton, SPDSpace, Subtree)
from proxcat.ppa import StepSchedule, StopRule, run_ppa, tail_diameter
from proxcat.report import PASS
from proxcat.resolvent import ResolventOptions, resolve

DATA = os.path.join(os.path.dirname(__file__), "data")
E1 = EuclideanSpace(1)
E2 = EuclideanSpace(2)
H2 = HyperbolicSpace(2)
S2 = SPDSpace(2)
TREE = sample_tree()
BACKENDS = [E2, H2, S2, TREE]
GRID = 1e-4


def verdict(capsys, n, ok, msg):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {msg}")
    assert ok, f"criterion {n}: {msg}"


# --------------------------------------------------------------------------
# brute-force oracles
# --------------------------------------------------------------------------

def tree_grid(t: MetricTree, step=GRID):
    """All grid points of the tree as (edge, offsets) blocks."""
    return [(k, np.arange(0.0, L + step / 2, step)) for k, (_, _, L) in enumerate(t.edges)]


def tree_values(t, blocks, fn):
    """Evaluate ``fn(distance_to)`` on every grid block; returns the argmin point."""
    best, arg = math.inf, None
    for k, offs in blocks:
        v = fn(lambda p: t.distances_on_edge(p, k, offs))
        i = int(np.argmin(v))
        if v[i] < best:
            best, arg = float(v[i]), t.point({"edge": k, "offset": float(min(offs[i], t.edges[k][2]))})
    return arg, best


def vec_term(g, dist_to):
    """Vectorized value of a single-anchor or ball-based functional on a grid."""
    if isinstance(g, SquaredDistance):
        return 0.5 * g.weight * dist_to(g.anchor) ** 2
    if isinstance(g, Distance):
        return g.weight * dist_to(g.anchor)
    B = g.set
    excess = np.maximum(dist_to(B.center) - B.radius, 0.0)
    if isinstance(g, DistanceToSet):
        return excess
    return np.where(excess > 1e-12, np.inf, 0.0)


# --------------------------------------------------------------------------
# 1. CAT(0) residuals
# --------------------------------------------------------------------------

def test_criterion_01_cat0_residuals(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    msgs, ok = [], True
    for s in BACKENDS:
        res = np.empty(10_000)
        for i in range(10_000):
            x, a, b = (s.random_point(rng, scale=2.0) for _ in range(3))
            t = float(rng.random())
            g = s.geodesic(a, b, t)
            res[i] = ((1 - t) * s.distance(x, a) ** 2 + t * s.distance(x, b) ** 2
                      - t * (1 - t) * s.distance(a, b) ** 2 - s.distance(x, g) ** 2)
        if isinstance(s, EuclideanSpace):
            good = float(np.max(np.abs(res))) <= 1e-10
        else:
            good = float(np.min(res)) >= -1e-8
        ok &= good
        msgs.append(f"{s.kind} min {res.min():.2e} max {res.max():.2e}")
    el = time.perf_counter() - t0
    ok &= el < 10
    verdict(capsys, 1, ok, f"CAT(0) residuals on 10,000 tuples per backend ({'; '.join(msgs)}; {el:.1f}s)")


# --------------------------------------------------------------------------
# 2. resolvent closed forms against oracles
# --------------------------------------------------------------------------

def single_functionals(s, rng):
    a = s.random_point(rng, scale=1.5)
    B = Ball(s, s.random_point(rng, scale=1.5), float(rng.uniform(0.2, 0.8)))
    return [SquaredDistance(s, a, weight=float(rng.uniform(0.5, 2.0))),
            Distance(s, s.random_point(rng, scale=1.5), weight=float(rng.uniform(0.5, 2.0))),
            Indicator(B), DistanceToSet(B)]


def test_criterion_02_resolvent_closed_forms(capsys):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_grid, worst_split = 0.0, 0.0
    # Euclidean line and tree: dense grid oracle at step 1e-4
    for _ in range(5):
        for g in single_functionals(E1, rng):
            x = E1.point([float(rng.uniform(-1.5, 1.5))])
            if isinstance(g, Indicator):
                x = g.set.project(x) if rng.random() < 0.3 else x
            lam = float(rng.uniform(0.2, 3.0))
            y = g.closed_form_resolvent(x, lam)
            grid = np.arange(-6.0, 6.0 + GRID / 2, GRID)
            F = vec_term(g, lambda p: np.abs(grid - p.payload[0])) + (grid - x.payload[0]) ** 2 / (2 * lam)
            worst_grid = max(worst_grid, abs(float(grid[int(np.argmin(F))]) - y.payload[0]))
    blocks = tree_grid(TREE)
    for _ in range(3):
        for g in single_functionals(TREE, rng):
            x = TREE.random_point(rng)
            lam = float(rng.uniform(0.2, 3.0))
            y = g.closed_form_resolvent(x, lam)
            arg, _ = tree_values(TREE, blocks, lambda d: vec_term(g, d) + d(x) ** 2 / (2 * lam))
            worst_grid = max(worst_grid, TREE.distance(arg, y))
    # hyperbolic and SPD: inner-split solver against the closed form
    split = ResolventOptions(strategy="inner_split")
    for s in (H2, S2):
        for _ in range(5):
            for g in single_functionals(s, rng):
                x = s.random_point(rng, scale=1.5)
                lam = float(rng.uniform(0.2, 3.0))
                y = g.closed_form_resolvent(x, lam)
                z = resolve(WeightedSum(s, [(1.0, g)]), x, lam, split).point
                worst_split = max(worst_split, s.distance(y, z))
    el = time.perf_counter() - t0
    ok = worst_grid <= 1e-3 and worst_split <= 1e-6 and el < 10
    verdict(capsys, 2, ok, f"closed forms vs grid oracle worst {worst_grid:.2e} (<= 1e-3), "
                           f"vs inner split worst {worst_split:.2e} (<= 1e-6), {el:.1f}s")


# --------------------------------------------------------------------------
# 3. exact PPA recursion
# --------------------------------------------------------------------------

def test_criterion_03_quadratic_recursion(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for x0 in (1.0, -3.7, 0.25):
        f = SquaredDistance(E1, E1.point([0.0]))
        tr = run_ppa(f, E1.point([x0]), StepSchedule.constant(1.0), StopRule(40, None), certify=False)
        worst = max(worst, max(abs(p.payload[0] - 2.0 ** -n * x0) for n, p in enumerate(tr.iterates)))
    el = time.perf_counter() - t0
    verdict(capsys, 3, worst <= 1e-12 and el < 1,
            f"x_n = 2^-n x_0 for n <= 40, worst error {worst:.1e} (<= 1e-12), {el:.2f}s")


# --------------------------------------------------------------------------
# 4. end-to-end minimization
# --------------------------------------------------------------------------

def test_criterion_04_spd_mean_and_tree_median(capsys):
    t0 = time.perf_counter()
    two = S2.point(2.0 * np.eye(2))
    f = WeightedSum(S2, [(1.0, SquaredDistance(S2, S2.identity)),
                         (1.0, SquaredDistance(S2, S2.point(4.0 * np.eye(2))))], known_minimizer=two)
    tr = run_ppa(f, S2.point([[3.0, 1.0], [1.0, 1.5]]), StepSchedule.constant(1.0), StopRule(60))
    hit = [n for n, p in enumerate(tr.iterates) if S2.distance(p, two) <= 1e-6]
    spd_ok = bool(hit) and hit[0] <= 60

    rng = np.random.default_rng(4)
    blocks = tree_grid(TREE)
    worst_cell = 0.0
    for _ in range(3):
        anchors = [TREE.random_point(rng) for _ in range(5)]
        weights = rng.uniform(0.5, 2.0, 5)
        g = WeightedSum(TREE, [(float(w), Distance(TREE, a)) for w, a in zip(weights, anchors)])
        med = run_ppa(g, TREE.random_point(rng), StepSchedule.constant(0.5),
                      StopRule(400, 1e-14), certify=False).iterates[-1]
        arg, _ = tree_values(TREE, blocks,
                             lambda d: sum(w * d(a) for w, a in zip(weights, anchors)))
        worst_cell = max(worst_cell, TREE.distance(med, arg))
    el = time.perf_counter() - t0
    ok = spd_ok and worst_cell <= GRID and el < 20
    verdict(capsys, 4, ok, f"SPD mean within 1e-6 of 2I at iteration {hit[0] if hit else None} (<= 60); "
                           f"tree median vs grid oracle {worst_cell:.1e} (<= one cell 1e-4), {el:.1f}s")


# --------------------------------------------------------------------------
# 5, 6, 10. randomized PPA runs
# --------------------------------------------------------------------------

def random_problem(rng):
    s = BACKENDS[int(rng.integers(len(BACKENDS)))]
    kind = int(rng.integers(3))
    a, b = s.random_point(rng, scale=2.0), s.random_point(rng, scale=2.0)
    wa, wb = (float(v) for v in rng.uniform(1.0, 2.0, 2))
    if kind == 0:
        f = SquaredDistance(s, a, weight=wa, known_minimizer=a, known_infimum=0.0)
    elif kind == 1:
        # two-point weighted mean: the minimizer lies on [a, b]
        m = s.geodesic(a, b, wb / (wa + wb))
        inf = wa * wb * s.distance(a, b) ** 2 / (2.0 * (wa + wb))
        f = WeightedSum(s, [(1.0, SquaredDistance(s, a, weight=wa)),
                            (1.0, SquaredDistance(s, b, weight=wb))],
                        known_minimizer=m, known_infimum=inf)
    else:
        f = Distance(s, a, weight=wa, known_minimizer=a, known_infimum=0.0)
    if rng.random() < 0.5:
        sched = StepSchedule.constant(float(rng.uniform(0.5, 3.0)))
    else:
        # c >= 4 so that the tail of 60 harmonic steps is below 1e-4
        sched = StepSchedule.harmonic(float(rng.uniform(4.0, 8.0)))
    return f, kind < 2, s.random_point(rng, scale=2.0), sched


@pytest.fixture(scope="module")
def randomized_runs():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    runs = []
    for _ in range(100):
        f, squared, x0, sched = random_problem(rng)
        runs.append((squared, run_ppa(f, x0, sched, StopRule(60, None))))
    return runs, time.perf_counter() - t0


def test_criterion_05_fejer(capsys, randomized_runs):
    runs, el = randomized_runs
    bad = [i for i, (_, tr) in enumerate(runs)
           if tr.certificates["fejer"].status != PASS or tr.certificates["fejer"].worst_residual > 1e-9]
    worst = max(tr.certificates["fejer"].worst_residual for _, tr in runs)
    verdict(capsys, 5, not bad and el < 30,
            f"Fejér violations above 1e-9 in 100 randomized runs: {len(bad)} "
            f"(worst residual {worst:.1e}), {el:.1f}s")


def test_criterion_06_rate_and_estimate(capsys, randomized_runs):
    runs, el = randomized_runs
    bad = []
    worst = -math.inf
    for i, (_, tr) in enumerate(runs):
        for name in ("rate", "estimate"):
            rep = tr.certificates[name]
            worst = max(worst, rep.worst_residual)
            if rep.status != PASS or rep.worst_residual > 1e-9:
                bad.append((i, name))
    verdict(capsys, 6, not bad and el < 30,
            f"rate and estimate violations above 1e-9 in 100 runs: {len(bad)} (worst {worst:.1e})")


def test_criterion_10_strong_convergence(capsys, randomized_runs):
    runs, _ = randomized_runs
    diams = [tail_diameter(tr, 20) for squared, tr in runs if squared]
    worst = max(diams)
    verdict(capsys, 10, worst <= 1e-4,
            f"tail diameter of the last 20 of 60 iterates over {len(diams)} squared-distance runs: "
            f"worst {worst:.1e} (<= 1e-4)")


# --------------------------------------------------------------------------
# 7, 8. gradient flow
# --------------------------------------------------------------------------

def test_criterion_07_flow_limit(capsys):
    t0 = time.perf_counter()
    quad = SquaredDistance(E1, E1.point([0.0]))
    one = E1.point([1.0])
    err = max(abs(flow_apply(quad, one, lam).point.payload[0] - math.exp(-lam))
              for lam in (0.5, 1.0, 2.0))
    semi = semigroup_certificate(quad, one, 0.5, 0.5, FlowOptions(1e-8, 25))
    rng = np.random.default_rng(7)
    worst, statuses = -math.inf, set()
    for k in range(100):
        if k % 2 == 0:
            s = E2 if k % 4 == 0 else E1
            # the doubling gap scales like lam^2, so short flow times keep n small
            f = SquaredDistance(s, s.random_point(rng), weight=float(rng.uniform(0.5, 1.5)))
            x, y = s.random_point(rng), s.random_point(rng)
            lam = float(rng.uniform(0.02, 0.2))
        else:
            s = BACKENDS[(k // 2) % len(BACKENDS)]
            f = Distance(s, s.random_point(rng, scale=2.0), weight=float(rng.uniform(0.5, 2.0)))
            x, y = s.random_point(rng, scale=2.0), s.random_point(rng, scale=2.0)
            lam = float(rng.uniform(0.1, 3.0))
        rep = flow_nonexpansive_certificate(f, x, y, lam, FlowOptions(1e-8, 26))
        worst = max(worst, rep.worst_residual)
        statuses.add(rep.status)
    el = time.perf_counter() - t0
    ok = (err <= 1e-6 and semi.status == PASS and semi.worst_residual <= 3e-8
          and worst <= 3e-8 and statuses == {PASS} and el < 20)
    verdict(capsys, 7, ok, f"|T_lam(1) - e^-lam| worst {err:.1e} (<= 1e-6); semigroup gap "
                           f"{semi.worst_residual:.1e} (<= 3e-8); nonexpansive residual worst "
                           f"{worst:.1e} over 100 pairs (<= 3e-8), {el:.1f}s")


def test_criterion_08_spd_flow(capsys):
    t0 = time.perf_counter()
    two = S2.point(2.0 * np.eye(2))
    f = WeightedSum(S2, [(1.0, SquaredDistance(S2, S2.identity)),
                         (1.0, SquaredDistance(S2, S2.point(4.0 * np.eye(2))))], known_minimizer=two)
    tr = flow_convergence_run(f, S2.identity, [1, 2, 4, 8, 16], FlowOptions(doubling_tolerance=1e-5))
    d = tr.dist_to_minimizer()
    mono = all(b <= a + 1e-9 for a, b in zip(d[1:], d[2:]))
    el = time.perf_counter() - t0
    ok = mono and d[-1] <= 1e-3 and tr.stop_reason == "grid_complete" and el < 20
    verdict(capsys, 8, ok, f"SPD flow distances to 2I on grid 1..16 nonincreasing: {mono}; "
                           f"at lambda=16 {d[-1]:.1e} (<= 1e-3), {el:.1f}s")


# --------------------------------------------------------------------------
# 9. weak convergence
# --------------------------------------------------------------------------

def test_criterion_09_weak_convergence(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    pass_gaps = []
    quad = SquaredDistance(E1, E1.point([0.0]))
    tr = run_ppa(quad, E1.point([1.0]), StepSchedule.constant(1.0), StopRule(60, None), certify=False)
    pass_gaps.append(weak_convergence_check(SequenceWindow.from_trace(tr), E1.point([0.0])).max_gap)
    for s in BACKENDS:
        a = s.random_point(rng)
        f = SquaredDistance(s, a)
        # 100 steps: the first point of a 50-long window is then 2^-51 d_0 from the limit
        tr = run_ppa(f, s.random_point(rng, scale=2.0), StepSchedule.constant(1.0),
                     StopRule(100, None), certify=False)
        rep = weak_convergence_check(SequenceWindow.from_trace(tr), a, rng=rng)
        pass_gaps.append(rep.max_gap if rep.passed else math.inf)
    fail_gaps = []
    for s in BACKENDS:
        while True:
            a, b = s.random_point(rng), s.random_point(rng)
            if s.distance(a, b) >= 0.5:
                break
        w = SequenceWindow(s, [a if k % 2 == 0 else b for k in range(50)])
        rep = weak_convergence_check(w, a, rng=rng)
        fail_gaps.append(rep.max_gap if not rep.passed else -math.inf)
    el = time.perf_counter() - t0
    ok = max(pass_gaps) <= 1e-3 and min(fail_gaps) >= 0.5 and el < 5
    verdict(capsys, 9, ok, f"convergent tails pass with gap <= {max(pass_gaps):.1e} (<= 1e-3); "
                           f"alternating windows fail with gap >= {min(fail_gaps):.2f} (>= 0.5), {el:.1f}s")


# --------------------------------------------------------------------------
# 11. projection properties
# --------------------------------------------------------------------------

def convex_set(s, rng, k):
    kind = k % 4
    if kind == 0:
        return Ball(s, s.random_point(rng, scale=1.5), float(rng.uniform(0.1, 1.5)))
    if kind == 1:
        return Segment(s, s.random_point(rng, scale=1.5), s.random_point(rng, scale=1.5))
    if kind == 2 or not isinstance(s, MetricTree):
        return Singleton(s, s.random_point(rng, scale=1.5))
    v = int(rng.integers(len(s.vertices)))
    nb = [u for u, _ in s.adj[v]]
    return Subtree(s, (s.vertices[v], s.vertices[int(rng.choice(nb))]))


def test_criterion_11_projection_properties(capsys):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst = {"nonexpansive": -math.inf, "idempotent": -math.inf, "segment": -math.inf,
             "obtuse": -math.inf}
    for s in BACKENDS:
        for k in range(1000):
            C = convex_set(s, rng, k)
            x, y = s.random_point(rng, scale=2.0), s.random_point(rng, scale=2.0)
            px, py = C.project(x), C.project(y)
            worst["nonexpansive"] = max(worst["nonexpansive"], s.distance(px, py) - s.distance(x, y))
            worst["idempotent"] = max(worst["idempotent"], s.distance(C.project(px), px))
            z = s.geodesic(x, px, float(rng.random()))
            worst["segment"] = max(worst["segment"], s.distance(C.project(z), px))
            c = C.random_member(rng)
            worst["obtuse"] = max(worst["obtuse"], s.distance(x, px) ** 2 + s.distance(px, c) ** 2
                                  - s.distance(x, c) ** 2)
    el = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and el < 10
    verdict(capsys, 11, ok, "projection residuals on 1,000 instances per backend: "
                            + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (<= 1e-8), {el:.1f}s")


# --------------------------------------------------------------------------
# 12. reproducibility
# --------------------------------------------------------------------------

def test_criterion_12_reproducibility(capsys, tmp_path):
    t0 = time.perf_counter()
    same = []
    for name in ("quadratic_ppa", "wrong_minimizer", "tree_median", "spd_both"):
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run / name
            main(["run", "--config", os.path.join(DATA, name + ".json"), "--out", str(out)])
            outs.append(out)
        csvs = sorted(p.name for p in outs[0].iterdir() if p.suffix == ".csv")
        same.append(bool(csvs) and all((outs[0] / c).read_bytes() == (outs[1] / c).read_bytes()
                                       for c in csvs))
    el = time.perf_counter() - t0
    verdict(capsys, 12, all(same) and el < 5,
            f"byte-identical CSV on rerun for {sum(same)}/4 golden configs, {el:.1f}s")

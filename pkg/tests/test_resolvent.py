"""Moreau-Yosida resolvents against grid, optimizer and closed-form oracles."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from conftest import sample_tree
from proxcat.errors import DomainError, InfeasibleError, SolverError, StrategyError, ValidationError
from proxcat.functionals import (Busemann, Displacement, Distance, DistanceToSet, Indicator,
                                 SquaredDistance, WeightedSum, zero)
from proxcat.geometry import Ball, EuclideanSpace, HyperbolicSpace, SPDSpace, Segment, Singleton
from proxcat.report import PASS
from proxcat.resolvent import (ANALYTIC, GRID, INNER_SPLIT, ResolventOptions, grid_minimize,
                               inner_split_minimize, nonexpansiveness_check, objective, resolve,
                               resolve_power)
from strategies import points

E1 = EuclideanSpace(1)
E2 = EuclideanSpace(2)
H2 = HyperbolicSpace(2)
S2 = SPDSpace(2)


def dense_line_argmin(F, lo=-3.0, hi=3.0, step=1e-4):
    """Brute-force oracle on a 1-D interval."""
    grid = np.arange(lo, hi + step / 2, step)
    vals = np.array([F(v) for v in grid])
    return float(grid[int(np.argmin(vals))])


def tangent_oracle(f, x, lam, y0):
    """Minimize F over exp_x(v) with Nelder-Mead, an optimizer independent of
    the package's solvers."""
    s = f.space
    basis = _tangent_basis(s, x)

    def F(c):
        v = sum(ci * b for ci, b in zip(c, basis))
        return objective(f, x, lam, s.exp(x, v))

    c0 = _coords(s, x, s.log(x, y0), basis)
    r = minimize(F, c0, method="Nelder-Mead",
                 options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000, "maxfev": 40000})
    return float(r.fun)


def _tangent_basis(s, x):
    if isinstance(s, EuclideanSpace):
        return list(np.eye(s.dimension))
    if isinstance(s, HyperbolicSpace):
        p = np.asarray(x.payload)
        return [s.tangent_projection(x, e) for e in np.eye(s.dimension + 1)[1:]]
    n = s.dimension
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def _coords(s, x, v, basis):
    G = np.array([[s.inner(x, a, b) for b in basis] for a in basis])
    rhs = np.array([s.inner(x, a, v) for a in basis])
    return np.linalg.lstsq(G, rhs, rcond=None)[0]


# --------------------------------------------------------------------------
# worked examples
# --------------------------------------------------------------------------

def test_lambda_zero_is_identity(space):
    rng = np.random.default_rng(0)
    x = space.random_point(rng)
    f = Distance(space, space.random_point(rng))
    r = resolve(f, x, 0.0)
    assert r.point is x
    assert resolve(f, x, 0).point.same_payload(x)
    assert resolve_power(f, x, 0.0, 5) is x


def test_squared_distance_example_against_grid():
    f = SquaredDistance(E1, E1.point([0.0]))
    x = E1.point([2.0])
    y = resolve(f, x, 1.0)
    assert y.point.payload[0] == pytest.approx(1.0, abs=1e-15)
    oracle = dense_line_argmin(lambda v: 0.5 * v * v + (v - 2.0) ** 2 / 2.0)
    assert abs(y.point.payload[0] - oracle) <= 1e-4


@pytest.mark.parametrize("lam,want", [(1.0, 2.0), (5.0, 0.0)])
def test_distance_example_against_grid(lam, want):
    f = Distance(E1, E1.point([0.0]))
    y = resolve(f, E1.point([3.0]), lam).point.payload[0]
    assert y == pytest.approx(want, abs=1e-15)
    oracle = dense_line_argmin(lambda v: abs(v) + (v - 3.0) ** 2 / (2 * lam), -1.0, 4.0)
    assert abs(y - oracle) <= 1e-4


def test_distance_saturation_returns_anchor():
    a = H2.lift([0.3, 0.1])
    f = Distance(H2, a)
    assert resolve(f, H2.lift([5.0, -2.0]), 1e13).point is a
    assert resolve(DistanceToSet(Singleton(H2, a)), H2.lift([5.0, 1.0]), 1e13).point.same_payload(a)


def test_indicator_resolvent_is_projection():
    C = Ball(E2, E2.point([0.0, 0.0]), 1.0)
    for lam in (0.01, 1.0, 100.0):
        y = resolve(Indicator(C), E2.point([3.0, 4.0]), lam).point
        assert np.allclose(y.payload, [0.6, 0.8], atol=1e-15)


def test_distance_to_set_moves_by_lambda():
    C = Segment(E2, E2.point([0.0, 0.0]), E2.point([0.0, 1.0]))
    y = resolve(DistanceToSet(C), E2.point([3.0, 0.5]), 1.0).point
    assert np.allclose(y.payload, [2.0, 0.5], atol=1e-15)
    y = resolve(DistanceToSet(C), E2.point([3.0, 0.5]), 10.0).point
    assert np.allclose(y.payload, [0.0, 0.5], atol=1e-15)


def test_busemann_resolvent_translates_along_ray():
    f = Busemann(E2, E2.make_ray(E2.point([0.0, 0.0]), [1.0, 0.0]))
    y = resolve(f, E2.point([1.0, 2.0]), 0.5).point
    assert np.allclose(y.payload, [1.5, 2.0], atol=1e-15)


@pytest.mark.parametrize("lam", [0.3, 1.0, 4.0])
def test_closed_forms_match_line_grid(lam):
    fine = ResolventOptions(strategy=GRID, grid_resolution=1e-9)
    fs = [SquaredDistance(E1, E1.point([0.7]), weight=1.5), Distance(E1, E1.point([-0.4])),
          DistanceToSet(Segment(E1, E1.point([-1.0]), E1.point([-0.5]))),
          Indicator(Ball(E1, E1.point([1.0]), 0.25))]
    for f in fs:
        for x0 in (-2.0, 0.1, 2.5):
            x = E1.point([x0])
            exact = resolve(f, x, lam).point
            grid = resolve(f, x, lam, fine)
            assert grid.strategy_used == GRID
            assert E1.distance(exact, grid.point) <= 1e-6, (f, x0)


def test_tree_exact_matches_grid():
    t = sample_tree()
    rng = np.random.default_rng(9)
    for _ in range(15):
        f = WeightedSum(t, [(float(rng.uniform(0.2, 2)), SquaredDistance(t, t.random_point(rng))),
                            (float(rng.uniform(0.2, 2)), Distance(t, t.random_point(rng))),
                            (1.0, DistanceToSet(Ball(t, t.random_point(rng), 0.3)))])
        x = t.random_point(rng)
        lam = float(rng.uniform(0.1, 3))
        exact = resolve(f, x, lam, ResolventOptions(strategy=ANALYTIC))
        assert exact.details.get("method") == "tree_exact"
        grid = grid_minimize(f, x, lam)
        assert t.distance(exact.point, grid.point) <= 1e-6
        assert exact.objective_value <= grid.objective_value + 1e-12


def test_tree_grid_fallback_for_displacement():
    from proxcat.geometry import MetricTree
    t = MetricTree(["o", "x", "y"], [("o", "x", 1.0), ("o", "y", 1.0)])
    f = Displacement(t, t.make_isometry({"vertex_map": {"x": "y", "y": "x"}}))
    r = resolve(f, t.vertex("x"), 0.25)
    assert r.strategy_used == GRID
    # at offset s from o toward x: F = 2 s + 2 (1 - s)^2, minimized at s = 1/2
    assert t.distance(r.point, t.point((0, 0.5))) <= 1e-6 or t.distance(r.point, t.point((1, 0.5))) <= 1e-6


# --------------------------------------------------------------------------
# inner solver
# --------------------------------------------------------------------------

@pytest.mark.parametrize("s", [E2, H2, S2], ids=lambda s: s.id)
def test_inner_split_single_term_matches_closed_form(s):
    rng = np.random.default_rng(2)
    for _ in range(5):
        a, x = s.random_point(rng), s.random_point(rng)
        f = WeightedSum(s, [(1.0, SquaredDistance(s, a, weight=1.3))])
        lam = float(rng.uniform(0.2, 3))
        got = inner_split_minimize(f, x, lam)
        assert got.strategy_used == INNER_SPLIT
        assert s.distance(got.point, f.closed_form_resolvent(x, lam)) <= 1e-8


@pytest.mark.parametrize("s", [E2, H2], ids=lambda s: s.id)
def test_inner_split_large_lambda_midpoint(s):
    rng = np.random.default_rng(3)
    a, b = s.random_point(rng), s.random_point(rng)
    f = WeightedSum(s, [(1.0, SquaredDistance(s, a)), (1.0, SquaredDistance(s, b))])
    y = resolve(f, s.random_point(rng), 1e9, ResolventOptions(strategy=INNER_SPLIT)).point
    assert s.distance(y, s.geodesic(a, b, 0.5)) <= 1e-6


def test_spd_large_lambda_geometric_mean():
    f = WeightedSum(S2, [(1.0, SquaredDistance(S2, S2.identity)),
                         (1.0, SquaredDistance(S2, S2.point(4.0 * np.eye(2))))])
    x = S2.point(np.array([[3.0, 1.0], [1.0, 2.0]]))
    y = resolve(f, x, 1e9).point
    assert S2.distance(y, S2.point(2.0 * np.eye(2))) <= 1e-6


@pytest.mark.parametrize("s", [E2, H2, S2], ids=lambda s: s.id)
def test_inner_split_beats_independent_optimizer(s):
    rng = np.random.default_rng(4)
    for _ in range(3):
        f = WeightedSum(s, [(0.7, Distance(s, s.random_point(rng))),
                            (1.2, SquaredDistance(s, s.random_point(rng))),
                            (0.5, DistanceToSet(Ball(s, s.random_point(rng), 0.4)))])
        x = s.random_point(rng)
        lam = float(rng.uniform(0.3, 2))
        r = resolve(f, x, lam)
        assert r.strategy_used == INNER_SPLIT
        assert r.residual <= 1e-10
        oracle = tangent_oracle(f, x, lam, r.point)
        assert r.objective_value <= oracle + 1e-10
        # optimality against random probes
        for _ in range(50):
            q = s.random_point(rng, center=r.point, scale=float(rng.choice([1e-3, 1e-1, 1])))
            assert r.objective_value <= objective(f, x, lam, q) + 1e-10


def test_inner_split_tree_passes():
    t = sample_tree()
    f = WeightedSum(t, [(1.0, Distance(t, t.vertex("c"))), (1.0, SquaredDistance(t, t.vertex("e")))])
    # steps eta_j = lam / j settle at rate O(1/j), so only a loose tolerance is reachable
    opts = ResolventOptions(strategy=INNER_SPLIT, inner_tolerance=1e-6, max_inner_iterations=10**6)
    r = inner_split_minimize(f, t.vertex("d"), 0.5, opts)
    exact = resolve(f, t.vertex("d"), 0.5)
    assert r.residual <= 1e-5
    assert t.distance(r.point, exact.point) <= 1e-4


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------

@given(points(E2), points(E2), st.floats(0.01, 10))
def test_squared_distance_contraction_factor(x, y, lam):
    a = E2.point([0.3, -0.2])
    f = SquaredDistance(E2, a)
    rep = nonexpansiveness_check(f, [(x, y)], lam)
    assert rep.status == PASS
    d = E2.distance(x, y)
    if d > 1e-6:
        assert rep.details["max_ratio"] == pytest.approx(1.0 / (1.0 + lam), rel=1e-9)


def test_nonexpansive_lambda_zero_equality():
    rng = np.random.default_rng(5)
    pairs = [(H2.random_point(rng), H2.random_point(rng)) for _ in range(10)]
    rep = nonexpansiveness_check(Distance(H2, H2.origin), pairs, 0.0)
    assert rep.status == PASS and rep.worst_residual == 0.0


def test_nonexpansive_distance_all_spaces(space):
    rng = np.random.default_rng(6)
    f = Distance(space, space.random_point(rng), weight=1.5)
    pairs = [(space.random_point(rng, scale=2), space.random_point(rng, scale=2)) for _ in range(40)]
    for lam in (0.1, 1.0, 5.0):
        rep = nonexpansiveness_check(f, pairs, lam)
        assert rep.status == PASS and rep.worst_residual <= 1e-8


def test_nonexpansive_inner_split_sum():
    rng = np.random.default_rng(7)
    f = WeightedSum(H2, [(1.0, Distance(H2, H2.random_point(rng))),
                         (1.0, SquaredDistance(H2, H2.random_point(rng)))])
    pairs = [(H2.random_point(rng), H2.random_point(rng)) for _ in range(10)]
    assert nonexpansiveness_check(f, pairs, 0.8).status == PASS


def test_monotone_improvement(space):
    rng = np.random.default_rng(8)
    for _ in range(20):
        f = WeightedSum(space, [(1.0, Distance(space, space.random_point(rng))),
                                (0.5, SquaredDistance(space, space.random_point(rng)))])
        x = space.random_point(rng, scale=2)
        y = resolve(f, x, float(rng.uniform(0.1, 3))).point
        assert f(y) <= f(x) + 1e-9


def test_resolve_power_matches_repeated_resolve():
    rng = np.random.default_rng(9)
    for f in (SquaredDistance(E2, E2.point([1.0, 2.0]), weight=0.7),
              Distance(E2, E2.point([-1.0, 0.5])),
              WeightedSum(E2, [(1.0, SquaredDistance(E2, E2.point([0.0, 1.0]))),
                               (2.0, SquaredDistance(E2, E2.point([3.0, -1.0])))])):
        x = E2.random_point(rng, scale=3)
        y = x
        for _ in range(17):
            y = resolve(f, y, 0.37).point
        assert np.array_equal(resolve_power(f, x, 0.37, 17).payload, y.payload)


def test_resolve_power_generic_route():
    f = SquaredDistance(H2, H2.lift([1.0, 0.0]))
    x = H2.lift([-1.0, 0.5])
    y = x
    for _ in range(4):
        y = resolve(f, y, 0.5).point
    assert resolve_power(f, x, 0.5, 4).same_payload(y)


# --------------------------------------------------------------------------
# errors
# --------------------------------------------------------------------------

def test_negative_or_nan_lambda():
    f = zero(E2)
    for lam in (-1.0, math.nan, math.inf):
        with pytest.raises(DomainError):
            resolve(f, E2.point([0.0, 0.0]), lam)
    with pytest.raises(DomainError):
        resolve_power(f, E2.point([0.0, 0.0]), 1.0, -1)


def test_infeasible_on_disjoint_indicators():
    t = sample_tree()
    f = WeightedSum(t, [(1.0, Indicator(Singleton(t, t.vertex("c")))),
                        (1.0, Indicator(Singleton(t, t.vertex("e"))))])
    with pytest.raises(InfeasibleError):
        resolve(f, t.vertex("r"), 1.0)


def test_solver_error_carries_best_iterate():
    t = sample_tree()
    f = WeightedSum(t, [(1.0, Distance(t, t.vertex("c"))), (1.0, Distance(t, t.vertex("e")))])
    with pytest.raises(SolverError) as err:
        inner_split_minimize(f, t.vertex("d"), 2.0, ResolventOptions(max_inner_iterations=3))
    assert err.value.best is not None and err.value.residual > 0


def test_strategy_errors():
    rng = np.random.default_rng(11)
    f = Displacement(E2, E2.make_isometry({"translation": [1.0, 0.0]}))
    with pytest.raises(StrategyError):
        resolve(f, E2.point([0.0, 0.0]), 1.0)
    with pytest.raises(StrategyError):
        resolve(Distance(H2, H2.origin), H2.origin, 1.0, ResolventOptions(strategy=GRID))
    with pytest.raises(StrategyError):
        inner_split_minimize(WeightedSum(E2, [(1.0, f)]), E2.point([0.0, 0.0]), 1.0)
    del rng


def test_options_validation():
    for kw in ({"strategy": "magic"}, {"inner_tolerance": 0.0}, {"max_inner_iterations": 0},
               {"grid_resolution": -1.0}):
        with pytest.raises(ValidationError):
            ResolventOptions(**kw)

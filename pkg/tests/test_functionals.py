"""Functionals: evaluation, convexity, Lipschitz bounds and metadata."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import sample_tree
from proxcat.errors import DomainError, ValidationError
from proxcat.functionals import (Busemann, Displacement, Distance, DistanceToSet, Indicator,
                                 SquaredDistance, WeightedSum, convexity_residual,
                                 is_minimizing_certificate, uniform_convexity_residual, zero)
from proxcat.geometry import (Ball, EuclideanSpace, HyperbolicSpace, MetricTree, SPDSpace,
                              Segment, Singleton)
from proxcat.report import FAIL, PASS
from strategies import points

E2 = EuclideanSpace(2)
E1 = EuclideanSpace(1)


def star():
    return MetricTree(["o", "x", "y", "z"], [("o", "x", 1.0), ("o", "y", 1.0), ("o", "z", 2.0)])


def isometry_for(space, rng):
    """A nontrivial isometry of each backend."""
    if isinstance(space, EuclideanSpace):
        Q, _ = np.linalg.qr(rng.normal(size=(space.dimension, space.dimension)))
        return space.make_isometry({"orthogonal": Q, "translation": rng.normal(size=space.dimension)})
    if isinstance(space, HyperbolicSpace):
        return space.make_isometry({"matrix": HyperbolicSpace.boost(space.dimension, 1, 0.7)})
    if isinstance(space, SPDSpace):
        G = rng.normal(size=(space.dimension, space.dimension)) + 2 * np.eye(space.dimension)
        return space.make_isometry({"congruence": G})
    return space.make_isometry({"vertex_map": {"x": "y", "y": "x"}})


def ray_for(space, rng):
    if isinstance(space, MetricTree):
        return space.make_ray(space.random_point(rng), space.leaves()[0])
    o = space.random_point(rng)
    d = np.asarray(space.random_point(rng).payload) - np.asarray(o.payload)
    return space.make_ray(o, d)


def truncated_limit_mp(space, ray, x, t):
    """``d(x, c(t)) - t`` in extended precision (cosh(1e6) overflows doubles)."""
    mp.mp.dps = 60
    p = [mp.mpf(float(v)) for v in np.asarray(ray.origin.payload)]
    u = [mp.mpf(float(v)) for v in np.asarray(ray.direction)]
    y = [mp.mpf(float(v)) for v in np.asarray(x.payload)]
    if isinstance(space, EuclideanSpace):
        c = [pi + t * ui for pi, ui in zip(p, u)]
        return mp.sqrt(sum((a - b) ** 2 for a, b in zip(y, c))) - t
    c = [mp.cosh(t) * pi + mp.sinh(t) * ui for pi, ui in zip(p, u)]
    inner = y[0] * c[0] - sum(a * b for a, b in zip(y[1:], c[1:]))
    return float(mp.acosh(inner) - t)


def lipschitz_kinds(space, rng):
    fs = [(Distance(space, space.random_point(rng)), 1.0),
          (DistanceToSet(Ball(space, space.random_point(rng), 0.5)), 1.0)]
    if not isinstance(space, SPDSpace):
        fs.append((Busemann(space, ray_for(space, rng)), 1.0))
    fs.append((Displacement(space, isometry_for(space, rng)), 2.0))
    return fs


LIP_SPACES = [EuclideanSpace(2), HyperbolicSpace(2), SPDSpace(2), star()]


# --------------------------------------------------------------------------
# worked examples
# --------------------------------------------------------------------------

def test_euclidean_busemann_example():
    f = Busemann(E2, E2.make_ray(E2.point([0.0, 0.0]), [1.0, 0.0]))
    x = E2.point([2.0, 1.0])
    assert f(x) == -2.0
    # independent oracle: the defining limit truncated at t = 1e6
    truncated = math.hypot(2.0 - 1e6, 1.0) - 1e6
    assert abs(f(x) - truncated) <= 1e-5
    assert abs(f(x) - f.truncated_limit(x)) <= 1e-5


@pytest.mark.parametrize("space", [EuclideanSpace(3), HyperbolicSpace(2), HyperbolicSpace(3)],
                         ids=lambda s: s.id)
def test_busemann_matches_truncated_limit(space):
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = Busemann(space, ray_for(space, rng))
        # the truncation bias is about |x_perp|^2 / (2t), so stay within distance 3
        q = space.random_point(rng, scale=3.0)
        x = space.point_at_distance(f.ray.origin, q, min(3.0, space.distance(f.ray.origin, q)))
        assert abs(f(x) - truncated_limit_mp(space, f.ray, x, 10**6)) <= 1e-5


def test_tree_busemann_is_leaf_surrogate():
    t = sample_tree()
    f = Busemann(t, t.make_ray(t.vertex("r"), "e"))
    assert f(t.vertex("r")) == 0.0
    assert f(t.vertex("e")) == pytest.approx(-2.75)
    assert f(t.vertex("c")) == pytest.approx(1.5)


def test_spd_busemann_not_provided():
    s = SPDSpace(2)
    ray = s.make_ray(s.identity, np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError):
        Busemann(s, ray)


def test_displacement_of_translation_is_constant():
    T = E2.make_isometry({"translation": [3.0, 4.0]})
    f = Displacement(E2, T)
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert f(E2.random_point(rng, scale=10.0)) == pytest.approx(5.0, abs=1e-12)


def test_displacement_rejects_non_isometry():
    bad = E2.make_isometry({"translation": [1.0, 0.0]})
    object.__setattr__(bad, "orthogonal", np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        Displacement(E2, bad)


def test_tree_displacement_of_leaf_swap():
    t = star()
    f = Displacement(t, t.make_isometry({"vertex_map": {"x": "y", "y": "x"}}))
    assert f(t.vertex("x")) == pytest.approx(2.0)
    assert f(t.vertex("o")) == 0.0
    assert f(t.vertex("z")) == 0.0


def test_indicator_values():
    f = Indicator(Ball(E2, E2.point([0.0, 0.0]), 1.0))
    assert f(E2.point([2.0, 0.0])) == math.inf
    assert f(E2.point([0.5, 0.5])) == 0.0


def test_convexity_residual_examples():
    f = SquaredDistance(E2, E2.point([0.0, 0.0]))
    a, b = E2.point([0.0, 0.0]), E2.point([2.0, 0.0])
    # (w/2) d^2 with w = 1: 0.5 * (0.5 * 0 + 0.5 * 2) - 0.5 = 0.5
    assert convexity_residual(f, a, b, 0.5) == pytest.approx(0.5)
    # weight 2 reproduces d^2: 0.5 * 0 + 0.5 * 4 - 1 = 1
    f2 = SquaredDistance(E2, E2.point([0.0, 0.0]), weight=2.0)
    assert convexity_residual(f2, a, b, 0.5) == pytest.approx(1.0)
    assert convexity_residual(f2, a, b, 0.0) == 0.0


def test_convexity_residual_infinite_is_vacuous():
    f = Indicator(Singleton(E2, E2.point([0.0, 0.0])))
    assert convexity_residual(f, E2.point([1.0, 0.0]), E2.point([0.0, 0.0]), 0.5) == math.inf


@given(points(E2), points(E2), points(E2), st.floats(0, 1))
def test_euclidean_squared_distance_is_exactly_uniformly_convex(a, b, m, t):
    # with phi(r) = r^2 and f = d(., m)^2 (weight 2) the parallelogram law gives zero slack
    f = SquaredDistance(E2, m, weight=2.0)
    r = uniform_convexity_residual(f, a, b, t, lambda r: r * r)
    assert r >= -1e-9
    ref = (1 - t) * f(a) + t * f(b) - f(E2.geodesic(a, b, t)) - t * (1 - t) * E2.distance(a, b) ** 2
    assert r == pytest.approx(ref, abs=1e-9)
    assert abs(r) <= 1e-9 * (1 + f(a) + f(b))


def test_uniform_convexity_endpoint_and_distance_counterexample():
    f = SquaredDistance(E2, E2.point([0.0, 0.0]), weight=2.0)
    a, b = E2.point([1.0, 0.0]), E2.point([3.0, 0.0])
    assert uniform_convexity_residual(f, a, b, 1.0, lambda r: r * r) == 0.0
    g = Distance(E1, E1.point([0.0]))
    # collinear anchor, a, b: d(., 0) is affine there, so the slack is -t(1-t) r^2
    r = uniform_convexity_residual(g, E1.point([1.0]), E1.point([3.0]), 0.5, lambda r: r * r)
    assert r == pytest.approx(-1.0)
    assert r < 0


def test_squared_distance_modulus_holds(space):
    rng = np.random.default_rng(11)
    for _ in range(200):
        f = SquaredDistance(space, space.random_point(rng), weight=float(rng.uniform(0.5, 2)))
        a, b = space.random_point(rng, scale=2.0), space.random_point(rng, scale=2.0)
        t = float(rng.random())
        assert uniform_convexity_residual(f, a, b, t, f.uniform_modulus()) >= -1e-8


def test_convexity_residual_nonnegative_all_kinds(space):
    rng = np.random.default_rng(3)
    kinds = [lambda: SquaredDistance(space, space.random_point(rng)),
             lambda: Distance(space, space.random_point(rng)),
             lambda: DistanceToSet(Segment(space, space.random_point(rng), space.random_point(rng))),
             lambda: WeightedSum(space, [(0.3, Distance(space, space.random_point(rng))),
                                         (1.7, SquaredDistance(space, space.random_point(rng)))])]
    if not isinstance(space, SPDSpace):
        kinds.append(lambda: Busemann(space, ray_for(space, rng)))
    for make in kinds:
        for _ in range(100):
            f = make()
            a, b = space.random_point(rng, scale=2.0), space.random_point(rng, scale=2.0)
            assert convexity_residual(f, a, b, float(rng.random())) >= -1e-8


@pytest.mark.parametrize("space", LIP_SPACES, ids=lambda s: s.id)
def test_lipschitz_constants(space):
    rng = np.random.default_rng(7)
    for f, L in lipschitz_kinds(space, rng):
        for _ in range(200):
            x, y = space.random_point(rng, scale=2.0), space.random_point(rng, scale=2.0)
            assert abs(f(x) - f(y)) <= L * space.distance(x, y) + 1e-8, f


@pytest.mark.parametrize("space", LIP_SPACES, ids=lambda s: s.id)
def test_displacement_is_convex(space):
    rng = np.random.default_rng(8)
    f = Displacement(space, isometry_for(space, rng))
    for _ in range(200):
        a, b = space.random_point(rng, scale=2.0), space.random_point(rng, scale=2.0)
        assert convexity_residual(f, a, b, float(rng.random())) >= -1e-8


# --------------------------------------------------------------------------
# metadata and structure
# --------------------------------------------------------------------------

def test_metadata_consistency_checked():
    m = E2.point([1.0, 1.0])
    f = SquaredDistance(E2, m)
    assert f.known_minimizer is m and f.known_infimum == 0.0
    with pytest.raises(ValidationError):
        SquaredDistance(E2, m, known_minimizer=m, known_infimum=1.0)
    with pytest.raises(ValidationError):
        WeightedSum(E2, [(1.0, f)], known_infimum=math.inf)


def test_weights_must_be_positive():
    for w in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValidationError):
            Distance(E2, E2.point([0.0, 0.0]), weight=w)
        with pytest.raises(ValidationError):
            WeightedSum(E2, [(w, Distance(E2, E2.point([0.0, 0.0])))])


def test_weighted_sum_flattens_and_evaluates():
    a, b = E2.point([0.0, 0.0]), E2.point([2.0, 0.0])
    inner = WeightedSum(E2, [(2.0, Distance(E2, a)), (1.0, SquaredDistance(E2, b))])
    outer = WeightedSum(E2, [(0.5, inner), (3.0, Distance(E2, b))])
    assert len(outer.terms()) == 3
    assert all(not isinstance(f, WeightedSum) for _, f in outer.terms())
    x = E2.point([1.0, 1.0])
    want = 0.5 * (2.0 * math.sqrt(2) + 0.5 * 2.0) + 3.0 * math.sqrt(2)
    assert outer(x) == pytest.approx(want)
    assert outer.lipschitz is None
    assert WeightedSum(E2, [(2.0, Distance(E2, a, weight=1.5))]).lipschitz == 3.0


def test_zero_functional():
    f = zero(E2)
    assert f(E2.point([5.0, 5.0])) == 0.0
    assert f.known_infimum == 0.0
    x = E2.point([1.0, 2.0])
    assert f.closed_form_resolvent(x, 3.0) is x


def test_space_mismatch_rejected():
    with pytest.raises(DomainError):
        WeightedSum(E2, [(1.0, Distance(EuclideanSpace(3), EuclideanSpace(3).point([0, 0, 0])))])
    f = Distance(E2, E2.point([0.0, 0.0]))
    with pytest.raises((DomainError, ValidationError)):
        f(EuclideanSpace(3).point([0.0, 0.0, 0.0]))


def test_json_descriptors_roundtrip():
    from proxcat.io import functional_from_json
    rng = np.random.default_rng(4)
    fs = [SquaredDistance(E2, E2.point([1.0, 2.0]), weight=3.0),
          Distance(E2, E2.point([0.0, 1.0])),
          Busemann(E2, E2.make_ray(E2.point([0.0, 0.0]), [0.0, 1.0])),
          Displacement(E2, E2.make_isometry({"translation": [1.0, 0.0]})),
          Indicator(Ball(E2, E2.point([0.0, 0.0]), 2.0)),
          DistanceToSet(Segment(E2, E2.point([0.0, 0.0]), E2.point([1.0, 0.0])))]
    fs.append(WeightedSum(E2, [(1.0, fs[0]), (2.0, fs[1])]))
    for f in fs:
        g = functional_from_json(E2, f.to_json())
        assert g.kind == f.kind
        for _ in range(5):
            x = E2.random_point(rng, scale=3.0)
            assert g(x) == f(x)


# --------------------------------------------------------------------------
# sampled minimality certificate
# --------------------------------------------------------------------------

def test_minimizing_certificate_examples():
    m = E2.point([0.5, -1.0])
    rep = is_minimizing_certificate(SquaredDistance(E2, m), m, 200)
    assert rep.status == PASS and rep.details["heuristic"]
    x = E2.point([2.0, 2.0])
    rep = is_minimizing_certificate(Distance(E2, m), x, 200)
    assert rep.status == FAIL and rep.details["improvement"] > 0
    a, b = E2.point([0.0, 0.0]), E2.point([3.0, 0.0])
    f = WeightedSum(E2, [(1.0, SquaredDistance(E2, a)), (2.0, SquaredDistance(E2, b))])
    bary = E2.point([2.0, 0.0])
    assert is_minimizing_certificate(f, bary, 200).status == PASS
    with pytest.raises(ValidationError):
        is_minimizing_certificate(f, bary, 0)


def test_minimizing_certificate_on_spd_mean():
    s = SPDSpace(2)
    f = WeightedSum(s, [(1.0, SquaredDistance(s, s.identity)),
                        (1.0, SquaredDistance(s, s.point(4.0 * np.eye(2))))])
    assert is_minimizing_certificate(f, s.point(2.0 * np.eye(2)), 100).status == PASS

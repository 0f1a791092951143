import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from proxcat.geometry import EuclideanSpace, HyperbolicSpace, MetricTree, SPDSpace

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")


def sample_tree() -> MetricTree:
    """Non-star tree with unequal edges, used across the suite."""
    return MetricTree(
        ["r", "a", "b", "c", "d", "e"],
        [("r", "a", 1.0), ("r", "b", 2.0), ("a", "c", 0.5), ("a", "d", 1.5), ("b", "e", 0.75)])


def all_spaces():
    return [EuclideanSpace(2), EuclideanSpace(3), HyperbolicSpace(2), HyperbolicSpace(3),
            SPDSpace(2), SPDSpace(3), sample_tree()]


@pytest.fixture(params=all_spaces(), ids=lambda s: s.id)
def space(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)

import math

import numpy as np
import pytest

from censorfit.core.censoring import CensoringPlan, CompetingRisksSample, change_index, generate_sample
from censorfit.core.sampling import seed_stream, stream_id


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def build_sample(times, causes, removals=None, n=None, T=math.inf) -> CompetingRisksSample:
    """A sample from explicit rows; removals default to none (complete sample)."""
    times = np.asarray(times, dtype=float)
    m = len(times)
    removals = tuple(removals) if removals is not None else (0,) * m
    plan = CensoringPlan(n if n is not None else m + sum(removals), m, removals, T)
    return CompetingRisksSample(times, causes, removals, change_index(plan, times), plan)


@pytest.fixture
def make_sample():
    return build_sample


@pytest.fixture
def right_plan():
    """n = 50, m = 40, removals (0,...,0,10), T = 0.25."""
    return CensoringPlan.from_scheme(50, 40, "right:10", 0.25)


@pytest.fixture
def osp_plan():
    return CensoringPlan.from_scheme(50, 40, "osp:10", 0.25)


@pytest.fixture
def example_plan():
    """n = 100, m = 90, one-step plan, T = 0.5."""
    return CensoringPlan.from_scheme(100, 90, "osp:10", 0.5)


@pytest.fixture
def sample(osp_plan):
    return generate_sample(osp_plan, 1.5, 1.2, 1.0, seed_stream(7, stream_id(0)))


@pytest.fixture
def example_sample(example_plan):
    return generate_sample(example_plan, 1.5, 1.5, 1.0, seed_stream(2024, stream_id(0)))


@pytest.fixture
def dominant_sample(example_plan):
    """A sample with m1 > m2, found by scanning stream ids."""
    for replication in range(50):
        candidate = generate_sample(example_plan, 1.5, 1.5, 1.0, seed_stream(11, stream_id(replication)))
        if candidate.m1 > candidate.m2:
            return candidate
    raise RuntimeError("no sample with m1 > m2 found")

# test/conftest.py
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from model.schemas import SamplerBudget
from services.sampler_service import sampler_service, stream_rng

settings.register_profile("dev", max_examples=50, deadline=None)
settings.register_profile(
    "ci", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture
def rng() -> np.random.Generator:
    return stream_rng(20240601, 0)


@pytest.fixture
def small_budget() -> SamplerBudget:
    return SamplerBudget(
        max_tree_edges=50_000, max_rejections=100_000, horizon=16, epsilon_tail=1e-3,
        resample_oversized=True,
    )


@pytest.fixture(scope="session")
def trees_3_edges():
    return list(sampler_service.enumerate_labeled_trees(3, 0, exact=True))


@pytest.fixture(scope="session")
def trees_upto_3():
    return list(sampler_service.enumerate_labeled_trees(3, 0))

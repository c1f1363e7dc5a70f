"""
Shared pytest fixtures: a small phantom cohort and a twin-sized model.
"""
import numpy as np
import pytest

from modules.dcn import DcnModel
from modules.net import TWIN_ARCH, init_params
from modules.synth import PhantomSpec, generate_cohort

# 3.5 mm at 0.4375 mm spacing is exactly 8 native pixels (twin input size)
TWIN_WINDOW_MM = 3.5


@pytest.fixture(scope="session")
def small_spec() -> PhantomSpec:
    return PhantomSpec(
        n_cases=8,
        dims=(24, 24, 2),
        spacing_mm=(0.4375, 0.4375, 3.0),
        blob_radius_mm=2.0,
        seed=3,
    )


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory, small_spec):
    return generate_cohort(small_spec, tmp_path_factory.mktemp("cohort"))


@pytest.fixture
def twin_model() -> DcnModel:
    params = init_params(0, TWIN_ARCH)
    centroids = np.random.default_rng(1).standard_normal((3, TWIN_ARCH.latent))
    return DcnModel(params, centroids, np.ones(3, dtype=np.int64))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)

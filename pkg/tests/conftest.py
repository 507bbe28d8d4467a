import numpy as np
import pytest

from survensemble.core import Dataset
from survensemble.simulate import GeneratorKind, GeneratorSpec, generate

# shared truth so that fits on cox_data transfer to holdout_data
COX_TRUTH = {"beta": [0.8, -0.6, 0.4]}

# small configs so that contract tests stay fast
FAST_CONFIGS = {
    "cox": {},
    "gbc": {"n_estimators": 20},
    "rsf": {"n_trees": 10},
    "weibull_aft": {},
    "aalen": {},
    "deepsurv": {"hidden": [8, 4], "epochs": 50},
}


def make_dataset(times, events, covariates=None) -> Dataset:
    times = np.asarray(times, dtype=float)
    if covariates is None:
        covariates = np.empty((times.size, 0))
    return Dataset(np.asarray(covariates, dtype=float), times, np.asarray(events, dtype=bool))


@pytest.fixture
def cox_data() -> Dataset:
    return generate(GeneratorSpec(GeneratorKind.COX_STYLE, n=200, d=3, censor_target=0.3, seed=7, truth=COX_TRUTH)).dataset


@pytest.fixture
def aft_data() -> Dataset:
    return generate(GeneratorSpec(GeneratorKind.AFT_STYLE, n=200, d=3, censor_target=0.3, seed=11)).dataset


@pytest.fixture
def holdout_data() -> Dataset:
    return generate(GeneratorSpec(GeneratorKind.COX_STYLE, n=150, d=3, censor_target=0.3, seed=8, truth=COX_TRUTH)).dataset

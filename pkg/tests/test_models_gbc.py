import json
import logging

import numpy as np
import pytest

from survensemble.errors import DegenerateSplit, DimensionMismatch
from survensemble.models.base import stable_partial_loglik
from survensemble.models.cox import fit_cox
from survensemble.models.gbc import GbcConfig, cox_negative_gradient, fit_gbc
from survensemble.scoring import concordance_index
from tests.conftest import make_dataset


def test_no_stages_means_no_ranking(cox_data):
    model = fit_gbc(cox_data, GbcConfig(n_estimators=0))
    risks = model.risk_scores(cox_data.covariates)
    assert np.all(risks == 0.0)
    assert concordance_index(risks, cox_data).value == 0.5


def test_zero_learning_rate_matches_no_stages(cox_data):
    empty = fit_gbc(cox_data, GbcConfig(n_estimators=0))
    frozen = fit_gbc(cox_data, GbcConfig(n_estimators=10, learning_rate=0.0))
    np.testing.assert_array_equal(frozen.survival_matrix(cox_data.covariates), empty.survival_matrix(cox_data.covariates))


def test_binary_covariate_ranks_like_cox():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 300).astype(float)
    times = rng.exponential(1.0 / np.exp(2.0 * x))
    data = make_dataset(times, rng.random(300) < 0.8, x[:, None])
    cox = concordance_index(fit_cox(data).risk_scores(data.covariates), data).value
    gbc = concordance_index(fit_gbc(data).risk_scores(data.covariates), data).value
    assert gbc >= cox - 0.02


def test_constant_covariate_warns_about_stumps(caplog):
    rng = np.random.default_rng(0)
    data = make_dataset(rng.exponential(size=30), np.ones(30, dtype=bool), np.ones((30, 1)))
    with caplog.at_level(logging.WARNING, logger="survensemble.models.gbc"):
        with pytest.warns(DegenerateSplit):
            fit_gbc(data, GbcConfig(n_estimators=3))
    assert "stump" in caplog.text


def test_no_covariates_with_stages_is_rejected():
    with pytest.raises(DimensionMismatch):
        fit_gbc(make_dataset([1.0, 2.0], [True, True]), GbcConfig(n_estimators=1))


def test_martingale_residuals_sum_to_zero():
    rng = np.random.default_rng(1)
    times = rng.exponential(size=50)
    events = rng.random(50) < 0.7
    residual = cox_negative_gradient(times, events, rng.normal(size=50))
    assert residual.sum() == pytest.approx(0.0, abs=1e-8)


def test_negative_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    times = rng.exponential(size=8)
    events = np.array([True, True, False, True, True, False, True, True])
    f = rng.normal(size=8)
    residual = cox_negative_gradient(times, events, f)
    h = 1e-6
    for i in range(8):
        step = np.zeros(8)
        step[i] = h
        numeric = (stable_partial_loglik(times, events, f + step) - stable_partial_loglik(times, events, f - step)) / (2 * h)
        assert numeric == pytest.approx(residual[i], abs=1e-6)


def test_fixed_seed_is_reproducible(cox_data):
    first = fit_gbc(cox_data, GbcConfig(n_estimators=10, seed=3))
    second = fit_gbc(cox_data, GbcConfig(n_estimators=10, seed=3))
    assert first.to_json() == second.to_json()


def test_stage_trees_respect_depth(cox_data):
    model = fit_gbc(cox_data, GbcConfig(n_estimators=5, max_depth=2))
    assert all(stage.tree.depth <= 2 for stage in model.stages)


def test_stage_step_sizes_are_recorded(cox_data):
    model = fit_gbc(cox_data, GbcConfig(n_estimators=4, learning_rate=0.2))
    X = cox_data.covariates
    assert [stage.step for stage in model.stages] == [0.2] * 4
    np.testing.assert_allclose(model.log_partial_hazard(X), sum(0.2 * stage.predict(X) for stage in model.stages))
    document = json.loads(model.to_json())
    assert [raw["step"] for raw in document["parameters"]["stages"]] == [0.2] * 4

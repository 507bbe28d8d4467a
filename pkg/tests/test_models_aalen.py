import numpy as np
import pytest

from survensemble.core import nelson_aalen
from survensemble.errors import SingularDesign
from survensemble.models.aalen import AT_RISK_PER_COLUMN, AalenConfig, fit_aalen
from tests.conftest import make_dataset


def test_no_covariates_reproduces_nelson_aalen():
    rng = np.random.default_rng(0)
    times = rng.exponential(size=60)
    events = rng.random(60) < 0.7
    model = fit_aalen(make_dataset(times, events))
    grid, cumhaz = nelson_aalen(times, events)
    np.testing.assert_array_equal(model.training_grid, grid)
    np.testing.assert_array_equal(model.baseline, cumhaz)


def test_single_event_jumps_by_one_over_n():
    model = fit_aalen(make_dataset([1.0, 2.0, 3.0, 4.0], [True, False, False, False]))
    np.testing.assert_allclose(model.baseline, [0.25])


def test_heavy_penalty_removes_covariate_effects(cox_data):
    model = fit_aalen(cox_data, AalenConfig(penalizer=1e8))
    _, cumhaz = nelson_aalen(cox_data.times, cox_data.events)
    assert np.max(np.abs(model.cumulative_coefficients[:, 1:])) < 1e-4
    np.testing.assert_allclose(model.baseline, cumhaz, atol=1e-4)


def test_duplicated_column_is_singular(cox_data):
    X = np.column_stack([cox_data.covariates[:, 0], cox_data.covariates[:, 0]])
    with pytest.raises(SingularDesign):
        fit_aalen(make_dataset(cox_data.times, cox_data.events, X))


def test_duplicated_column_fits_with_penalty(cox_data):
    X = np.column_stack([cox_data.covariates[:, 0], cox_data.covariates[:, 0]])
    model = fit_aalen(make_dataset(cox_data.times, cox_data.events, X), AalenConfig(penalizer=1.0))
    np.testing.assert_allclose(model.cumulative_coefficients[:, 1], model.cumulative_coefficients[:, 2], atol=1e-10)


def test_harmful_covariate_lowers_survival():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 1, 400)
    times = rng.exponential(1.0 / (0.5 + 2.0 * x))
    data = make_dataset(times, np.ones(400, dtype=bool), x[:, None])
    model = fit_aalen(data)
    assert model.cumulative_coefficients[-1, 1] > 0
    low, high = model.survival_matrix(np.array([[0.0], [1.0]]))
    assert high[-1] < low[-1]
    assert model.predict_risk(np.array([1.0])) > model.predict_risk(np.array([0.0]))


def test_small_tail_risk_sets_only_move_the_baseline():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 1, 400)
    times = rng.exponential(1.0 / (0.5 + 2.0 * x))
    model = fit_aalen(make_dataset(times, np.ones(400, dtype=bool), x[:, None]))
    # distinct event times, so the k-th last one has k subjects at risk
    frozen = AT_RISK_PER_COLUMN * 2 - 1
    tail = model.cumulative_coefficients[-frozen - 1 :]
    np.testing.assert_array_equal(tail[:, 1], tail[0, 1])
    np.testing.assert_allclose(np.diff(tail[:, 0]), 1.0 / np.arange(frozen, 0, -1))
    assert model.cumulative_coefficients[-1, 1] > 2.0

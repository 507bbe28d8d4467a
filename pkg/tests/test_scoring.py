from fractions import Fraction

import numpy as np
import pytest

from survensemble.core import SurvivalCurve, step_values
from survensemble.errors import DimensionMismatch, NoEligiblePairs, ZeroCensoringProbability
from survensemble.models import fit_model
from survensemble.scoring import (
    ScoreKind,
    brier_path,
    brier_score,
    concordance_index,
    default_horizon,
    evaluate_predictor,
    integrated_brier_from_matrix,
    integrated_brier_score,
    km_censoring,
    survival_matrix,
)
from tests.conftest import make_dataset


def constant(value: float) -> SurvivalCurve:
    return SurvivalCurve(np.array([0.0]), np.array([value]))


def test_km_censoring_without_censoring_is_one():
    censor = km_censoring(make_dataset([1.0, 2.0, 3.0], [True, True, True]))
    np.testing.assert_array_equal(censor.at([0.0, 1.0, 10.0]), [1.0, 1.0, 1.0])


def test_km_censoring_one_censored_of_two():
    censor = km_censoring(make_dataset([1.0, 2.0], [False, True]))
    np.testing.assert_allclose(censor.at([0.5, 1.0, 1.5, 5.0]), [1.0, 0.5, 0.5, 0.5])


def test_km_censoring_product_limit():
    censor = km_censoring(make_dataset([1.0, 2.0, 3.0], [False, False, True]))
    np.testing.assert_allclose(censor.at([0.5, 1.0, 2.0, 3.5]), [1.0, 2 / 3, 1 / 3, 1 / 3])


def test_km_censoring_equals_km_of_flipped_events():
    rng = np.random.default_rng(1)
    times = rng.exponential(size=40)
    events = rng.random(40) < 0.6
    censor = km_censoring(make_dataset(times, events))
    flipped = km_censoring(make_dataset(times, ~events))
    from survensemble.core import kaplan_meier

    direct = kaplan_meier(times, events)
    t = np.linspace(0, times.max(), 30)
    np.testing.assert_allclose(flipped.at(t), direct(t))
    assert censor.at(0.0) == 1.0


@pytest.mark.parametrize(
    ("risks", "expected"),
    [([3.0, 2.0, 1.0], Fraction(1)), ([1.0, 1.0, 1.0], Fraction(1, 2)), ([3.0, 1.0, 2.0], Fraction(2, 3))],
)
def test_concordance_worked_examples(risks, expected):
    dataset = make_dataset([1.0, 2.0, 3.0], [True, True, True])
    score = concordance_index(np.array(risks), dataset)
    assert Fraction(2 * score.concordant_pairs + score.tied_pairs, 2 * score.eligible_pairs) == expected
    assert score.value == float(expected)
    assert score.eligible_pairs == 3


def test_concordance_excludes_tied_times_and_censored_earlier():
    dataset = make_dataset([1.0, 1.0, 2.0, 3.0], [True, True, False, True])
    score = concordance_index(np.array([4.0, 3.0, 2.0, 1.0]), dataset)
    # (0,2), (0,3), (1,2), (1,3); subject 2 is censored so (2,3) is not eligible
    assert score.eligible_pairs == 4
    assert score.value == 1.0


def test_concordance_without_pairs_raises():
    with pytest.raises(NoEligiblePairs):
        concordance_index(np.zeros(3), make_dataset([2.0, 2.0, 2.0], [True, True, True]))


def test_concordance_length_mismatch():
    with pytest.raises(DimensionMismatch):
        concordance_index(np.zeros(2), make_dataset([1.0, 2.0, 3.0], [True, True, True]))


def test_concordance_rank_invariance_and_reversal():
    rng = np.random.default_rng(5)
    dataset = make_dataset(rng.exponential(size=60), rng.random(60) < 0.7)
    risk = rng.normal(size=60)
    base = concordance_index(risk, dataset).value
    assert concordance_index(np.exp(risk) * 3 + 1, dataset).value == pytest.approx(base)
    assert concordance_index(-risk, dataset).value == pytest.approx(1.0 - base)


def test_brier_perfect_prediction_before_all_times():
    dataset = make_dataset([2.0, 3.0, 4.0], [True, True, True])
    curves = [constant(1.0)] * 3
    assert brier_score(curves, dataset, 1.0, km_censoring(dataset)).value == 0.0


@pytest.mark.parametrize("t", [1.0, 3.0])
def test_brier_single_subject_half(t):
    dataset = make_dataset([2.0], [True])
    assert brier_score([constant(0.5)], dataset, t, km_censoring(dataset)).value == pytest.approx(0.25)


def test_brier_censored_before_t_has_zero_weight():
    dataset = make_dataset([1.0], [False])
    assert brier_score([constant(0.3)], dataset, 2.0, km_censoring(dataset)).value == 0.0


def test_brier_is_mse_without_censoring():
    rng = np.random.default_rng(2)
    dataset = make_dataset(rng.exponential(size=30), np.ones(30, dtype=bool))
    levels = rng.random(30)
    curves = [constant(v) for v in levels]
    t = 0.7
    mse = np.mean(((dataset.times > t).astype(float) - levels) ** 2)
    assert brier_score(curves, dataset, t, km_censoring(dataset)).value == pytest.approx(mse)


def test_zero_censoring_probability_is_reported():
    evaluation = make_dataset([1.0, 3.0], [True, True])
    # every subject at risk at 1.5 is censored there, so S_C drops to 0
    censor = km_censoring(make_dataset([1.0, 1.5], [True, False]))
    with pytest.raises(ZeroCensoringProbability):
        brier_score([constant(0.5)] * 2, evaluation, 2.0, censor)


def test_ibs_perfect_prediction_is_zero():
    dataset = make_dataset([2.0, 3.0], [True, True])
    assert integrated_brier_score([constant(1.0)] * 2, dataset, 1.5, km_censoring(dataset)).value == 0.0


def test_ibs_single_subject_by_hand():
    dataset = make_dataset([2.0], [True])
    score = integrated_brier_score([constant(0.5)], dataset, 4.0, km_censoring(dataset))
    assert score.value == pytest.approx(0.25)
    assert score.kind is ScoreKind.IBS
    assert score.horizon == 4.0


def test_ibs_matches_dense_midpoint_oracle(cox_data, holdout_data):
    model = fit_model("cox", cox_data)
    curves = [model.predict_survival(x) for x in holdout_data.covariates]
    tau = default_horizon(holdout_data)
    censor = km_censoring(holdout_data)
    midpoints = (np.arange(10_000) + 0.5) * tau / 10_000
    oracle = brier_path(survival_matrix(curves, midpoints), holdout_data, midpoints, censor).mean()
    assert integrated_brier_score(curves, holdout_data, tau, censor).value == pytest.approx(oracle, abs=1e-3)


def test_ibs_from_matrix_matches_curve_version(cox_data, holdout_data):
    model = fit_model("cox", cox_data)
    curves = [model.predict_survival(x) for x in holdout_data.covariates]
    tau = default_horizon(holdout_data)
    censor = km_censoring(holdout_data)
    from_curves = integrated_brier_score(curves, holdout_data, tau, censor).value
    surv = model.survival_matrix(holdout_data.covariates)
    from_matrix = integrated_brier_from_matrix(model.training_grid, surv, holdout_data, tau, censor).value
    assert from_matrix == pytest.approx(from_curves, rel=1e-9)


def test_ibs_is_convex_in_predictions(cox_data, holdout_data):
    model = fit_model("cox", cox_data)
    grid = model.training_grid
    first = model.survival_matrix(holdout_data.covariates)
    second = np.full_like(first, 0.5)
    tau = default_horizon(holdout_data)
    censor = km_censoring(holdout_data)

    def ibs(surv):
        return integrated_brier_from_matrix(grid, surv, holdout_data, tau, censor).value

    for alpha in np.linspace(0, 1, 11):
        mixed = ibs(alpha * first + (1 - alpha) * second)
        assert mixed <= alpha * ibs(first) + (1 - alpha) * ibs(second) + 1e-12


def test_evaluate_predictor_reports_both_metrics(cox_data, holdout_data):
    model = fit_model("cox", cox_data)
    scores = evaluate_predictor(model, holdout_data)
    assert set(scores) == {ScoreKind.CONCORDANCE, ScoreKind.IBS}
    assert 0.5 < scores["concordance"] <= 1.0
    assert 0.0 <= scores["ibs"] < 0.25


def test_step_values_holds_before_and_after():
    values = step_values(np.array([1.0, 2.0]), np.array([[0.9, 0.4], [0.8, 0.2]]), np.array([0.0, 1.5, 9.0]))
    np.testing.assert_array_equal(values, [[1.0, 0.9, 0.4], [1.0, 0.8, 0.2]])

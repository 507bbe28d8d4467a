"""Censoring-aware scores: KM censoring estimator, concordance index, Brier score and integrated Brier score."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.integrate import trapezoid

from survensemble.core import Dataset, RiskScore, SurvivalCurve, kaplan_meier, step_values
from survensemble.errors import DimensionMismatch, NoEligiblePairs, ZeroCensoringProbability


class ScoreKind(StrEnum):
    CONCORDANCE = "concordance"
    BRIER = "brier"
    IBS = "ibs"


@dataclass(frozen=True)
class ScoreValue:
    value: float
    kind: ScoreKind
    horizon: float | None = None
    time: float | None = None
    eligible_pairs: int | None = None
    concordant_pairs: int | None = None
    tied_pairs: int | None = None


@dataclass(frozen=True)
class CensoringEstimate:
    """Covariate-free Kaplan-Meier estimate of the censoring survival S_C(t)."""

    curve: SurvivalCurve

    def at(self, t: float | np.ndarray) -> np.ndarray:
        return step_values(self.curve.times, self.curve.values, t)

    def left_limit(self, t: float | np.ndarray) -> np.ndarray:
        """S_C(t-), the value just before t."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.curve.times, t, side="left") - 1
        padded = np.concatenate([[1.0], self.curve.values])
        return padded[idx + 1]


def km_censoring(dataset: Dataset) -> CensoringEstimate:
    return CensoringEstimate(kaplan_meier(dataset.times, ~dataset.events))


def default_horizon(dataset: Dataset, quantile: float = 0.95) -> float:
    return float(np.quantile(dataset.times, quantile))


def concordance_index(risks: Sequence[RiskScore] | np.ndarray, dataset: Dataset) -> ScoreValue:
    """Harrell's C over eligible pairs; time ties are excluded and risk ties count one half."""
    risk = np.asarray([r.value if isinstance(r, RiskScore) else r for r in risks], dtype=float)
    if risk.shape != (len(dataset),):
        raise DimensionMismatch(f"{risk.size} risks for {len(dataset)} subjects")
    times, events = dataset.times, dataset.events
    eligible = concordant = tied = 0
    for i in np.flatnonzero(events):
        later = times > times[i]
        eligible += int(later.sum())
        concordant += int((risk[i] > risk[later]).sum())
        tied += int((risk[i] == risk[later]).sum())
    if eligible == 0:
        raise NoEligiblePairs("no comparable pairs: times are all tied or every earlier time is censored")
    return ScoreValue(
        value=(2 * concordant + tied) / (2 * eligible),
        kind=ScoreKind.CONCORDANCE,
        eligible_pairs=eligible,
        concordant_pairs=concordant,
        tied_pairs=tied,
    )


def ipcw_weights(dataset: Dataset, grid: np.ndarray, censor: CensoringEstimate) -> np.ndarray:
    """W_i(t) on ``grid``, shape (n, m). Subjects censored at or before t get weight 0."""
    grid = np.asarray(grid, dtype=float)
    alive = dataset.times[:, None] > grid[None, :]
    dead = dataset.events[:, None] & ~alive
    at_t = censor.at(grid)
    at_y = censor.left_limit(dataset.times)
    if np.any(alive & (at_t[None, :] <= 0)) or np.any(dead & (at_y[:, None] <= 0)):
        raise ZeroCensoringProbability("censoring survival is 0 at a required point; lower the horizon")
    with np.errstate(divide="ignore"):
        inv_t = np.where(at_t > 0, 1.0 / np.where(at_t > 0, at_t, 1.0), 0.0)
        inv_y = np.where(at_y > 0, 1.0 / np.where(at_y > 0, at_y, 1.0), 0.0)
    return np.where(alive, inv_t[None, :], 0.0) + np.where(dead, inv_y[:, None], 0.0)


def survival_matrix(predictions: Sequence[SurvivalCurve], grid: np.ndarray) -> np.ndarray:
    return np.vstack([step_values(c.times, c.values, grid) for c in predictions])


def brier_path(
    surv: np.ndarray, dataset: Dataset, grid: np.ndarray, censor: CensoringEstimate
) -> np.ndarray:
    """Brier score at every grid point for predictions ``surv`` of shape (n, m) evaluated on ``grid``."""
    surv = np.asarray(surv, dtype=float)
    if surv.shape != (len(dataset), np.size(grid)):
        raise DimensionMismatch(f"predictions {surv.shape} do not match (n={len(dataset)}, grid={np.size(grid)})")
    status = (dataset.times[:, None] > np.asarray(grid)[None, :]).astype(float)
    weights = ipcw_weights(dataset, grid, censor)
    return (weights * (status - surv) ** 2).mean(axis=0)


def brier_score(
    predictions: Sequence[SurvivalCurve], dataset: Dataset, t: float, censor: CensoringEstimate
) -> ScoreValue:
    if len(predictions) != len(dataset):
        raise DimensionMismatch(f"{len(predictions)} curves for {len(dataset)} subjects")
    grid = np.array([float(t)])
    value = brier_path(survival_matrix(predictions, grid), dataset, grid, censor)[0]
    return ScoreValue(value=float(value), kind=ScoreKind.BRIER, time=float(t))


def integration_grid(dataset: Dataset, tau: float, knots: Sequence[np.ndarray] = ()) -> np.ndarray:
    """Sorted union of {0, tau}, observed times and curve knots, restricted to [0, tau]."""
    points = [np.array([0.0, tau]), dataset.times, *knots]
    grid = np.unique(np.concatenate([np.asarray(p, dtype=float).ravel() for p in points]))
    return grid[(grid >= 0) & (grid <= tau)]


def integrate_step(path: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Trapezoidal integral over ``grid`` of a right-continuous step path held at its left value.

    ``path`` may carry leading axes; the last axis runs along ``grid``.
    """
    path = np.asarray(path, dtype=float)
    if grid.size < 2:
        return np.zeros(path.shape[:-1])
    x = np.repeat(grid, 2)[1:-1]
    y = np.repeat(path[..., :-1], 2, axis=-1)
    return trapezoid(y, x, axis=-1)


def integrated_brier_score(
    predictions: Sequence[SurvivalCurve], dataset: Dataset, tau: float, censor: CensoringEstimate
) -> ScoreValue:
    if tau <= 0:
        raise ValueError(f"horizon must be positive, got {tau}")
    if len(predictions) != len(dataset):
        raise DimensionMismatch(f"{len(predictions)} curves for {len(dataset)} subjects")
    grid = integration_grid(dataset, tau, [c.times for c in predictions])
    path = brier_path(survival_matrix(predictions, grid), dataset, grid, censor)
    return ScoreValue(value=float(integrate_step(path, grid) / tau), kind=ScoreKind.IBS, horizon=float(tau))


def integrated_brier_from_matrix(
    times: np.ndarray, surv: np.ndarray, dataset: Dataset, tau: float, censor: CensoringEstimate
) -> ScoreValue:
    """IBS for predictions stored as an (n, len(times)) matrix of step curves sharing ``times``."""
    if tau <= 0:
        raise ValueError(f"horizon must be positive, got {tau}")
    grid = integration_grid(dataset, tau, [times])
    path = brier_path(step_values(times, surv, grid), dataset, grid, censor)
    return ScoreValue(value=float(integrate_step(path, grid) / tau), kind=ScoreKind.IBS, horizon=float(tau))


def evaluate_predictor(
    predictor,
    dataset: Dataset,
    metrics: Sequence[ScoreKind | str] = (ScoreKind.CONCORDANCE, ScoreKind.IBS),
    tau: float | None = None,
    censor: CensoringEstimate | None = None,
) -> dict[str, float]:
    """Score anything exposing ``risk_scores``/``survival_matrix``/``training_grid`` on ``dataset``."""
    scores: dict[str, float] = {}
    for metric in map(ScoreKind, metrics):
        if metric is ScoreKind.CONCORDANCE:
            scores[metric] = concordance_index(predictor.risk_scores(dataset.covariates), dataset).value
        elif metric is ScoreKind.IBS:
            horizon = tau or default_horizon(dataset)
            surv = predictor.survival_matrix(dataset.covariates)
            scores[metric] = integrated_brier_from_matrix(
                predictor.training_grid, surv, dataset, horizon, censor or km_censoring(dataset)
            ).value
        else:
            raise ValueError(f"{metric} is not a dataset-level metric")
    return scores

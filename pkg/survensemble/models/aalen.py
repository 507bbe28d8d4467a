"""Aalen additive hazards: h(t|x) = b0(t) + b(t) @ x with increments fitted by least squares at each event time.

Covariate increments stop once fewer than ``AT_RISK_PER_COLUMN`` subjects per column remain at risk; the tail
then moves the baseline only, by the Nelson-Aalen jump.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg

from survensemble.core import Dataset, counts_at, event_grid, nelson_aalen_increments
from survensemble.errors import SingularDesign
from survensemble.models.base import (
    FittedModel,
    ModelConfig,
    ModelKind,
    as_matrix,
    check_range,
    expected_lifetime_risk,
    monotone_survival,
)

logger = logging.getLogger(__name__)

# minimum subjects at risk per design column for a least-squares increment
AT_RISK_PER_COLUMN = 3


@dataclass(frozen=True)
class AalenConfig(ModelConfig):
    penalizer: float = 0.0

    def validate(self) -> None:
        check_range("aalen", "penalizer", self.penalizer, 0.0)


@dataclass(frozen=True, eq=False)
class AalenModel(FittedModel):
    kind = ModelKind.AALEN

    training_grid: np.ndarray
    n_features: int
    cumulative_coefficients: np.ndarray
    penalizer: float = 0.0

    @property
    def baseline(self) -> np.ndarray:
        """B0(t) on the training grid."""
        return self.cumulative_coefficients[:, 0]

    def cumulative_hazard(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        return self.baseline[None, :] + X @ self.cumulative_coefficients[:, 1:].T

    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        return monotone_survival(np.exp(-self.cumulative_hazard(X)))

    def risk_scores(self, X: np.ndarray) -> np.ndarray:
        return expected_lifetime_risk(self.training_grid, self.survival_matrix(X))

    def parameters(self) -> dict[str, Any]:
        return {"cumulative_coefficients": self.cumulative_coefficients.tolist(), "penalizer": self.penalizer}

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> AalenModel:
        grid = np.asarray(training_grid, dtype=float)
        return cls(
            training_grid=grid,
            n_features=n_features,
            cumulative_coefficients=np.asarray(parameters["cumulative_coefficients"], dtype=float).reshape(
                grid.size, n_features + 1
            ),
            penalizer=float(parameters["penalizer"]),
        )


def _increments(dataset: Dataset, grid: np.ndarray, penalizer: float) -> np.ndarray:
    times, events = dataset.times, dataset.events
    Z = np.column_stack([np.ones(dataset.n), dataset.covariates])
    p = Z.shape[1]
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    Zs = Z[order]
    gram = np.cumsum((Zs[:, :, None] * Zs[:, None, :])[::-1], axis=0)[::-1]
    start = np.searchsorted(sorted_times, grid, side="left")
    deaths, at_risk = counts_at(times, events, grid)
    ridge = penalizer * np.diag(np.r_[0.0, np.ones(p - 1)])
    increments = np.zeros((grid.size, p))
    fallback = 0
    for k, t in enumerate(grid):
        died = events & (times == t)
        rhs = Z[died].sum(axis=0)
        lhs = gram[start[k]] + ridge
        if at_risk[k] < AT_RISK_PER_COLUMN * p or np.linalg.matrix_rank(lhs) < p:
            increments[k, 0] = deaths[k] / at_risk[k]
            fallback += 1
            continue
        increments[k] = scipy.linalg.solve(lhs, rhs, assume_a="sym")
    if fallback:
        logger.debug(
            "aalen: %d of %d event times had a small or rank-deficient risk set, intercept-only there", fallback, grid.size
        )
    return increments


def fit_aalen(dataset: Dataset, config: AalenConfig | None = None) -> AalenModel:
    config = config or AalenConfig()
    dataset.require_events()
    grid = event_grid(dataset.times, dataset.events)
    if dataset.d == 0:
        _, base = nelson_aalen_increments(dataset.times, dataset.events, grid)
        increments = base[:, None]
    else:
        if config.penalizer == 0:
            design = np.column_stack([np.ones(dataset.n), dataset.covariates])
            if np.linalg.matrix_rank(design) < design.shape[1]:
                raise SingularDesign(
                    f"design [1, X] has rank {np.linalg.matrix_rank(design)} < {design.shape[1]}; set a penalizer"
                )
        increments = _increments(dataset, grid, config.penalizer)
    return AalenModel(
        training_grid=grid,
        n_features=dataset.d,
        cumulative_coefficients=np.cumsum(increments, axis=0),
        penalizer=config.penalizer,
    )

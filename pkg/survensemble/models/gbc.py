"""Gradient boosting on the Cox partial likelihood with least-squares regression trees as base learners."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from survensemble.core import Dataset, step_values
from survensemble.errors import DegenerateSplit, DimensionMismatch
from survensemble.models.base import ModelConfig, ModelKind, ProportionalHazardsModel, breslow_log_cumhaz, check_range
from survensemble.models.trees import TreeArrays, from_sklearn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GbcConfig(ModelConfig):
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    seed: int = 0

    def validate(self) -> None:
        check_range("gbc", "n_estimators", self.n_estimators, 0)
        check_range("gbc", "learning_rate", self.learning_rate, 0.0)
        check_range("gbc", "max_depth", self.max_depth, 1)
        check_range("gbc", "min_samples_leaf", self.min_samples_leaf, 1)


@dataclass(frozen=True, eq=False)
class StageTree:
    """One boosting stage g_k with its step size rho_k."""

    tree: TreeArrays
    values: np.ndarray
    step: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.values[self.tree.apply(X)]


@dataclass(frozen=True, eq=False)
class GbcModel(ProportionalHazardsModel):
    kind = ModelKind.GBC

    stages: tuple[StageTree, ...]
    learning_rate: float

    def log_partial_hazard(self, X: np.ndarray) -> np.ndarray:
        f = np.zeros(X.shape[0])
        for stage in self.stages:
            f += stage.step * stage.predict(X)
        return f

    def parameters(self) -> dict[str, Any]:
        return {
            "learning_rate": self.learning_rate,
            "stages": [{"tree": s.tree.to_dict(), "values": s.values.tolist(), "step": s.step} for s in self.stages],
            "log_baseline_cumhaz": self.log_baseline_cumhaz.tolist(),
        }

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> GbcModel:
        stages = tuple(
            StageTree(TreeArrays.from_dict(raw["tree"]), np.asarray(raw["values"], dtype=float), float(raw["step"]))
            for raw in parameters["stages"]
        )
        return cls(
            training_grid=np.asarray(training_grid, dtype=float),
            n_features=n_features,
            log_baseline_cumhaz=np.asarray(parameters["log_baseline_cumhaz"], dtype=float),
            stages=stages,
            learning_rate=float(parameters["learning_rate"]),
        )


def cox_negative_gradient(times: np.ndarray, events: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Martingale residuals delta_i - exp(f_i) * Lambda_0(y_i): the negative gradient of the Cox loss in f."""
    grid, log_cumhaz = breslow_log_cumhaz(times, events, f)
    log_at_y = step_values(grid, log_cumhaz, times, before=-np.inf)
    return events.astype(float) - np.exp(log_at_y + f)


def fit_gbc(dataset: Dataset, config: GbcConfig | None = None) -> GbcModel:
    config = config or GbcConfig()
    dataset.require_events()
    X, times, events = dataset.covariates, dataset.times, dataset.events
    if dataset.d == 0 and config.n_estimators > 0:
        raise DimensionMismatch("gradient boosting needs at least one covariate")
    rng = np.random.default_rng(config.seed)
    f = np.zeros(dataset.n)
    stages: list[StageTree] = []
    for k in range(config.n_estimators):
        residual = cox_negative_gradient(times, events, f)
        regressor = DecisionTreeRegressor(
            max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            random_state=int(rng.integers(2**31 - 1)),
        )
        regressor.fit(X, residual)
        tree, values = from_sklearn(regressor)
        if tree.node_count == 1:
            logger.warning("gbc stage %d: no split improves the squared error, stage is a stump", k)
            warnings.warn(f"gbc stage {k} has no improving split", DegenerateSplit, stacklevel=2)
        stage = StageTree(tree, values, config.learning_rate)
        f += stage.step * stage.predict(X)
        stages.append(stage)
    logger.debug("gbc fitted %d stages, training f in [%.3f, %.3f]", len(stages), f.min(), f.max())
    grid, log_cumhaz = breslow_log_cumhaz(times, events, f)
    return GbcModel(
        training_grid=grid,
        n_features=dataset.d,
        log_baseline_cumhaz=log_cumhaz,
        stages=tuple(stages),
        learning_rate=config.learning_rate,
    )

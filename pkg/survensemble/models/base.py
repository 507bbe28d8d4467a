"""Shared contract for fitted survival predictors plus the Breslow baseline used by the PH-type models."""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from enum import StrEnum
from typing import Any, ClassVar, Protocol, runtime_checkable

import numpy as np

from survensemble.core import Subject, SurvivalCurve, event_grid, restricted_mean
from survensemble.errors import ConfigError, DimensionMismatch


class ModelKind(StrEnum):
    COX = "cox"
    GBC = "gbc"
    RSF = "rsf"
    WEIBULL_AFT = "weibull_aft"
    AALEN = "aalen"
    DEEPSURV = "deepsurv"


@runtime_checkable
class SurvivalPredictor(Protocol):
    """Anything that yields survival curves on its own grid and scalar risks."""

    training_grid: np.ndarray
    n_features: int

    def survival_matrix(self, X: np.ndarray) -> np.ndarray: ...

    def risk_scores(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ModelConfig:
    """Base for fitter configs; subclasses declare fields with defaults and override ``validate``."""

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        pass

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | None) -> ModelConfig:
        raw = dict(raw or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{cls.__name__}: unknown keys {unknown}")
        return cls(**{k: _plain(v) for k, v in raw.items()})

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _plain(value: Any) -> Any:
    """Numpy scalars to Python scalars and lists to tuples, so configs stay hashable and JSON-ready."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, list | tuple):
        return tuple(_plain(v) for v in value)
    return value


def check_range(owner: str, name: str, value: float, low: float | None = None, high: float | None = None) -> None:
    if value is None:
        return
    if (low is not None and value < low) or (high is not None and value > high):
        raise ConfigError(f"{owner}.{name}={value} outside [{low}, {high}]")


def as_matrix(X: np.ndarray | Subject, n_features: int) -> np.ndarray:
    if isinstance(X, Subject):
        X = X.covariates
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n_features:
        raise DimensionMismatch(f"model expects {n_features} covariates, got {X.shape[1]}")
    return X


def monotone_survival(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and enforce non-increasing rows."""
    return np.minimum.accumulate(np.clip(values, 0.0, 1.0), axis=-1)


class FittedModel(ABC):
    kind: ClassVar[ModelKind]
    training_grid: np.ndarray
    n_features: int

    @abstractmethod
    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        """Survival probabilities, shape (n, len(training_grid))."""

    @abstractmethod
    def risk_scores(self, X: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def parameters(self) -> dict[str, Any]:
        """JSON-ready model-specific parameters."""

    @classmethod
    @abstractmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> FittedModel: ...

    def predict_survival(self, subject: Subject | np.ndarray) -> SurvivalCurve:
        values = self.survival_matrix(as_matrix(subject, self.n_features))[0]
        return SurvivalCurve(self.training_grid, values)

    def predict_risk(self, subject: Subject | np.ndarray) -> float:
        return float(self.risk_scores(as_matrix(subject, self.n_features))[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": str(self.kind),
            "n_features": self.n_features,
            "training_grid": self.training_grid.tolist(),
            "parameters": self.parameters(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)


def predict_survival(model: FittedModel, subject: Subject | np.ndarray) -> SurvivalCurve:
    return model.predict_survival(subject)


def predict_risk(model: FittedModel, subject: Subject | np.ndarray) -> float:
    return model.predict_risk(subject)


def expected_lifetime_risk(grid: np.ndarray, surv: np.ndarray) -> np.ndarray:
    """Risk as the negated restricted mean lifetime, so that higher means shorter life."""
    return -restricted_mean(grid, surv)


def breslow_log_cumhaz(times: np.ndarray, events: np.ndarray, log_hazard: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Breslow baseline on the unique event times, returned as (grid, log cumulative hazard).

    Ties follow the Breslow convention: every subject with y >= t_k stays in the risk set at t_k.
    """
    grid = event_grid(times, events)
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    # log sum_{j: y_j >= y_(p)} exp(eta_j) for every sorted position p
    tail = np.logaddexp.accumulate(log_hazard[order][::-1])[::-1]
    start = np.searchsorted(sorted_times, grid, side="left")
    event_times = np.sort(times[events])
    deaths = np.searchsorted(event_times, grid, side="right") - np.searchsorted(event_times, grid, side="left")
    log_increments = np.log(deaths) - tail[start]
    return grid, np.logaddexp.accumulate(log_increments) if grid.size else log_increments


@dataclass(frozen=True, eq=False)
class ProportionalHazardsModel(FittedModel):
    """h(t|x) = lambda_0(t) exp(f(x)) with a Breslow baseline; Cox, GBC and DeepSurv share it."""

    training_grid: np.ndarray
    n_features: int
    log_baseline_cumhaz: np.ndarray

    @abstractmethod
    def log_partial_hazard(self, X: np.ndarray) -> np.ndarray: ...

    def baseline_cumhaz(self) -> np.ndarray:
        return np.exp(self.log_baseline_cumhaz)

    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        eta = self.log_partial_hazard(X)
        cumhaz = np.exp(np.clip(self.log_baseline_cumhaz[None, :] + eta[:, None], None, 700.0))
        return monotone_survival(np.exp(-cumhaz))

    def risk_scores(self, X: np.ndarray) -> np.ndarray:
        return self.log_partial_hazard(as_matrix(X, self.n_features))


def stable_partial_loglik(times: np.ndarray, events: np.ndarray, eta: np.ndarray) -> float:
    """Breslow partial log-likelihood sum_{events} [eta_i - log sum_{y_j >= y_i} exp(eta_j)]."""
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    tail = np.logaddexp.accumulate(eta[order][::-1])[::-1]
    start = np.searchsorted(sorted_times, times[events], side="left")
    return float(eta[events].sum() - tail[start].sum())

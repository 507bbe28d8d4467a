"""Convex aggregation of survival predictors with simplex weights trained by exponentiated gradient on the IBS."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import softmax
from sklearn.model_selection import StratifiedKFold

from survensemble.core import Dataset, Subject, SurvivalCurve, step_values
from survensemble.errors import ConfigError, DimensionMismatch, DivergedObjective, GridMismatch, NonFiniteGradient
from survensemble.models import FittedModel, SurvivalPredictor, fit_model, load_model
from survensemble.models.base import as_matrix, check_range, expected_lifetime_risk, monotone_survival
from survensemble.scoring import (
    CensoringEstimate,
    default_horizon,
    integrate_step,
    integration_grid,
    ipcw_weights,
    km_censoring,
)

logger = logging.getLogger(__name__)

# consecutive objective increases tolerated before the step size is declared too large
DIVERGENCE_PATIENCE = 50


@dataclass(frozen=True, eq=False)
class EnsembleWeights:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch(f"weights must be a non-empty vector, got shape {values.shape}")
        if np.any(values < 0) or abs(values.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights {values.tolist()} are not on the simplex")
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, k: int) -> EnsembleWeights:
        return cls(np.full(k, 1.0 / k))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EnsembleConfig:
    eta: float = 0.1
    max_iter: int = 10000
    stop_tol: float = 1e-8
    horizon: float | None = None

    def __post_init__(self) -> None:
        check_range("ensemble", "eta", self.eta, 0.0)
        check_range("ensemble", "max_iter", self.max_iter, 1)
        check_range("ensemble", "stop_tol", self.stop_tol, 0.0)
        if self.horizon is not None and self.horizon <= 0:
            raise ConfigError(f"ensemble.horizon={self.horizon} must be positive")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> EnsembleConfig:
        raw = dict(raw or {})
        unknown = sorted(set(raw) - {"eta", "max_iter", "stop_tol", "horizon"})
        if unknown:
            raise ConfigError(f"EnsembleConfig: unknown keys {unknown}")
        return cls(**raw)


@dataclass(frozen=True, eq=False)
class ComponentPredictions:
    """Survival of K components for n subjects on a shared grid, shape (K, n, m)."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[2] != np.size(self.grid):
            raise DimensionMismatch(f"predictions {values.shape} do not match grid of {np.size(self.grid)} points")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("component predictions must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def combine(self, weights: EnsembleWeights) -> np.ndarray:
        if len(weights) != self.k:
            raise DimensionMismatch(f"{len(weights)} weights for {self.k} components")
        return np.tensordot(weights.values, self.values, axes=1)


def component_predictions(models: Sequence[SurvivalPredictor], dataset: Dataset, tau: float) -> ComponentPredictions:
    grid = integration_grid(dataset, tau, [m.training_grid for m in models])
    values = [step_values(m.training_grid, m.survival_matrix(dataset.covariates), grid) for m in models]
    return ComponentPredictions(grid, np.stack(values))


def _checked(preds: ComponentPredictions, dataset: Dataset, tau: float) -> tuple[np.ndarray, np.ndarray]:
    grid = np.asarray(preds.grid, dtype=float)
    if grid.size == 0 or grid[0] > 0 or grid[-1] < tau:
        raise GridMismatch(f"prediction grid does not cover [0, {tau}]")
    if preds.values.shape[1] != len(dataset):
        raise GridMismatch(f"predictions for {preds.values.shape[1]} subjects, dataset has {len(dataset)}")
    keep = grid <= tau
    return grid[keep], preds.values[..., keep]


def ibs_objective(
    weights: EnsembleWeights, preds: ComponentPredictions, dataset: Dataset, censor: CensoringEstimate, tau: float
) -> float:
    grid, values = _checked(preds, dataset, tau)
    surv = np.tensordot(weights.values, values, axes=1)
    status = (dataset.times[:, None] > grid[None, :]).astype(float)
    path = (ipcw_weights(dataset, grid, censor) * (status - surv) ** 2).mean(axis=0)
    return float(integrate_step(path, grid) / tau)


def ibs_gradient(
    weights: EnsembleWeights, preds: ComponentPredictions, dataset: Dataset, censor: CensoringEstimate, tau: float
) -> np.ndarray:
    """Partial derivatives of the ensemble IBS with respect to each weight."""
    grid, values = _checked(preds, dataset, tau)
    W = ipcw_weights(dataset, grid, censor)
    status = (dataset.times[:, None] > grid[None, :]).astype(float)
    residual = status - np.tensordot(weights.values, values, axes=1)
    integrand = (W[None] * 2.0 * residual[None] * -values).mean(axis=1)
    return integrate_step(integrand, grid) / tau


@dataclass(frozen=True, eq=False)
class QuadraticIbs:
    """IBS(lambda) = c - 2 b @ lambda + lambda @ A @ lambda, precomputed once per aggregation split."""

    c: float
    b: np.ndarray
    A: np.ndarray

    @classmethod
    def build(cls, preds: ComponentPredictions, dataset: Dataset, censor: CensoringEstimate, tau: float) -> QuadraticIbs:
        grid, values = _checked(preds, dataset, tau)
        W = ipcw_weights(dataset, grid, censor)
        status = (dataset.times[:, None] > grid[None, :]).astype(float)
        n = len(dataset)
        c = integrate_step((W * status).sum(axis=0) / n, grid) / tau
        b = integrate_step(np.einsum("nm,knm->km", W * status, values) / n, grid) / tau
        A = integrate_step(np.einsum("nm,knm,lnm->klm", W, values, values) / n, grid) / tau
        return cls(float(c), b, A)

    def value(self, weights: EnsembleWeights) -> float:
        lam = weights.values
        return float(self.c - 2.0 * self.b @ lam + lam @ self.A @ lam)

    def gradient(self, weights: EnsembleWeights) -> np.ndarray:
        return 2.0 * (self.A @ weights.values - self.b)


def eg_step(weights: EnsembleWeights, gradient: np.ndarray, eta: float) -> EnsembleWeights:
    """lambda_k exp(-eta g_k) / Z, normalised in the log domain."""
    gradient = np.asarray(gradient, dtype=float)
    if gradient.shape != weights.values.shape:
        raise DimensionMismatch(f"gradient of length {gradient.size} for {len(weights)} weights")
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteGradient(f"gradient {gradient.tolist()} is not finite")
    with np.errstate(divide="ignore"):
        logits = np.log(weights.values) - eta * gradient
    return EnsembleWeights(softmax(logits))


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    components: tuple[FittedModel, ...]
    weights: EnsembleWeights
    trace: tuple[float, ...] = field(default=())
    horizon: float | None = None

    @property
    def n_features(self) -> int:
        return self.components[0].n_features

    @property
    def training_grid(self) -> np.ndarray:
        return np.unique(np.concatenate([m.training_grid for m in self.components]))

    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        grid = self.training_grid
        combined = sum(
            w * step_values(m.training_grid, m.survival_matrix(X), grid)
            for w, m in zip(self.weights.values, self.components)
        )
        return monotone_survival(combined)

    def risk_scores(self, X: np.ndarray) -> np.ndarray:
        return expected_lifetime_risk(self.training_grid, self.survival_matrix(X))

    def predict_survival(self, subject: Subject | np.ndarray) -> SurvivalCurve:
        return SurvivalCurve(self.training_grid, self.survival_matrix(as_matrix(subject, self.n_features))[0])

    def predict_risk(self, subject: Subject | np.ndarray) -> float:
        return float(self.risk_scores(as_matrix(subject, self.n_features))[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "ensemble",
            "weights": self.weights.values.tolist(),
            "trace": list(self.trace),
            "horizon": self.horizon,
            "components": [m.to_dict() for m in self.components],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> EnsembleModel:
        return cls(
            components=tuple(load_model(c) for c in raw["components"]),
            weights=EnsembleWeights(np.asarray(raw["weights"], dtype=float)),
            trace=tuple(raw.get("trace", ())),
            horizon=raw.get("horizon"),
        )


def predict_ensemble(model: EnsembleModel, subject: Subject | np.ndarray) -> SurvivalCurve:
    return model.predict_survival(subject)


def run_exponentiated_gradient(objective: QuadraticIbs, k: int, config: EnsembleConfig) -> tuple[EnsembleWeights, list[float]]:
    """EG from the uniform point; returns the lowest-objective iterate and the objective trace."""
    weights = EnsembleWeights.uniform(k)
    best, best_value = weights, objective.value(weights)
    trace = [best_value]
    increases = 0
    for iteration in range(config.max_iter):
        updated = eg_step(weights, objective.gradient(weights), config.eta)
        value = objective.value(updated)
        increases = increases + 1 if value > trace[-1] else 0
        trace.append(value)
        if increases >= DIVERGENCE_PATIENCE:
            raise DivergedObjective(
                f"objective increased {increases} iterations in a row at iteration {iteration}; lower eta={config.eta}"
            )
        if value < best_value:
            best, best_value = updated, value
        step = np.max(np.abs(updated.values - weights.values))
        weights = updated
        if step < config.stop_tol:
            break
    logger.debug("eg stopped after %d iterations, objective %.6f -> %.6f", len(trace) - 1, trace[0], best_value)
    return best, trace


def fit_ensemble(
    components: Sequence[FittedModel],
    dataset: Dataset,
    config: EnsembleConfig | None = None,
    censor: CensoringEstimate | None = None,
) -> EnsembleModel:
    config = config or EnsembleConfig()
    if len(components) < 2:
        raise ConfigError(f"an ensemble needs at least 2 components, got {len(components)}")
    tau = config.horizon or default_horizon(dataset)
    censor = censor or km_censoring(dataset)
    preds = component_predictions(components, dataset, tau)
    weights, trace = run_exponentiated_gradient(QuadraticIbs.build(preds, dataset, censor, tau), preds.k, config)
    return EnsembleModel(tuple(components), weights, tuple(trace), tau)


@dataclass(frozen=True)
class CrossFitResult:
    weights: EnsembleWeights
    fold_weights: tuple[EnsembleWeights, ...]
    fold_traces: tuple[tuple[float, ...], ...]


def cross_fitted_weights(
    members: Sequence[tuple[str, Mapping[str, Any] | None]],
    dataset: Dataset,
    config: EnsembleConfig | None = None,
    folds: int = 5,
    seed: int = 0,
) -> CrossFitResult:
    """Fit members on four fifths, weights on the held-out fifth, rotate and average the fold weights."""
    config = config or EnsembleConfig()
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    fold_weights: list[EnsembleWeights] = []
    traces: list[tuple[float, ...]] = []
    for fold, (fit_idx, agg_idx) in enumerate(splitter.split(dataset.covariates, dataset.events)):
        fit_part, agg_part = dataset.subset(fit_idx), dataset.subset(agg_idx)
        components = [fit_model(kind, fit_part, member_config) for kind, member_config in members]
        model = fit_ensemble(components, agg_part, config)
        logger.debug("fold %d weights %s", fold, np.round(model.weights.values, 4).tolist())
        fold_weights.append(model.weights)
        traces.append(model.trace)
    mean = np.mean([w.values for w in fold_weights], axis=0)
    return CrossFitResult(EnsembleWeights(mean / mean.sum()), tuple(fold_weights), tuple(traces))


def fit_cross_fitted_ensemble(
    members: Sequence[tuple[str, Mapping[str, Any] | None]],
    dataset: Dataset,
    config: EnsembleConfig | None = None,
    folds: int = 5,
    seed: int = 0,
) -> tuple[EnsembleModel, CrossFitResult]:
    """Cross-fitted weights applied to members refitted on the whole of ``dataset``."""
    result = cross_fitted_weights(members, dataset, config, folds, seed)
    components = tuple(fit_model(kind, dataset, member_config) for kind, member_config in members)
    return EnsembleModel(components, result.weights), result

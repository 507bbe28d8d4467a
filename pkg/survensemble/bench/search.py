"""Randomized hyperparameter search scored by stratified k-fold cross-validation."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats
from sklearn.model_selection import ParameterSampler, StratifiedKFold

from survensemble.core import Dataset
from survensemble.errors import ConfigError, SurvivalError
from survensemble.models import ModelKind, fit_model, make_config, model_kind
from survensemble.scoring import ScoreKind, evaluate_predictor

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 25

DEFAULT_SPACES: dict[ModelKind, dict[str, Any]] = {
    ModelKind.COX: {"ridge_alpha": stats.loguniform(1e-4, 10.0)},
    ModelKind.GBC: {
        "n_estimators": [50, 100, 200],
        "learning_rate": stats.loguniform(0.01, 0.5),
        "max_depth": stats.randint(1, 6),
        "min_samples_leaf": stats.randint(1, 21),
    },
    ModelKind.RSF: {
        "n_trees": [50, 100],
        "max_features": [1, 2, 4, 8, None],
        "min_samples_leaf": stats.randint(1, 16),
        "max_depth": [None, 4, 8],
    },
    ModelKind.WEIBULL_AFT: {"penalizer": stats.loguniform(1e-4, 1.0), "l1_ratio": stats.uniform(0.0, 1.0)},
    ModelKind.AALEN: {"penalizer": stats.loguniform(1e-4, 10.0)},
    ModelKind.DEEPSURV: {
        "hidden": [(60, 10), (32, 8), (100, 20)],
        "l2": stats.loguniform(1e-5, 1e-1),
        "learning_rate": stats.loguniform(1e-3, 1e-1),
        "epochs": [200, 500],
    },
}


@dataclass(frozen=True)
class SearchSpace:
    """Per-kind parameter distributions (scipy.stats objects or explicit lists) and the draws per kind."""

    distributions: Mapping[ModelKind, Mapping[str, Any]] = field(default_factory=lambda: DEFAULT_SPACES)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ConfigError(f"search.budget={self.budget} must be at least 1")

    def for_kind(self, kind: ModelKind | str) -> Mapping[str, Any]:
        return self.distributions.get(model_kind(kind), {})

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> SearchSpace:
        """``{"budget": n, "spaces": {kind: {param: [choices...]}}}``; listed kinds replace the defaults."""
        raw = dict(raw or {})
        unknown = sorted(set(raw) - {"budget", "spaces"})
        if unknown:
            raise ConfigError(f"search: unknown keys {unknown}")
        distributions = dict(DEFAULT_SPACES)
        for kind, params in (raw.get("spaces") or {}).items():
            distributions[model_kind(kind)] = {k: _choices(kind, k, v) for k, v in params.items()}
        return cls(distributions=distributions, budget=int(raw.get("budget", DEFAULT_BUDGET)))


def _choices(kind: str, name: str, value: Any) -> Any:
    if isinstance(value, Mapping):
        distribution = value.get("distribution")
        if distribution == "loguniform":
            return stats.loguniform(value["low"], value["high"])
        if distribution == "uniform":
            return stats.uniform(value["low"], value["high"] - value["low"])
        if distribution == "randint":
            return stats.randint(value["low"], value["high"])
        raise ConfigError(f"search.spaces.{kind}.{name}: unknown distribution {distribution!r}")
    if not isinstance(value, list) or not value:
        raise ConfigError(f"search.spaces.{kind}.{name} must be a non-empty list or a distribution")
    return [tuple(v) if isinstance(v, list) else v for v in value]


@dataclass(frozen=True)
class Candidate:
    config: dict[str, Any]
    score: float | None
    error: str | None = None


@dataclass(frozen=True)
class SearchResult:
    kind: ModelKind
    metric: ScoreKind
    best_config: dict[str, Any]
    best_score: float
    candidates: tuple[Candidate, ...]


def _worst(metric: ScoreKind) -> float:
    return -np.inf if metric is ScoreKind.CONCORDANCE else np.inf


def _better(metric: ScoreKind, a: float, b: float) -> bool:
    return a > b if metric is ScoreKind.CONCORDANCE else a < b


def cross_validated_score(
    kind: ModelKind | str, config: Mapping[str, Any], train: Dataset, metric: ScoreKind, folds: StratifiedKFold
) -> float:
    scores = []
    for fit_idx, held_idx in folds.split(train.covariates, train.events):
        model = fit_model(kind, train.subset(fit_idx), config)
        scores.append(evaluate_predictor(model, train.subset(held_idx), [metric])[metric])
    return float(np.mean(scores))


def random_search(
    kind: ModelKind | str,
    space: SearchSpace,
    train: Dataset,
    metric: ScoreKind | str = ScoreKind.CONCORDANCE,
    folds: int = 5,
    seed: int = 0,
    base_config: Mapping[str, Any] | None = None,
) -> SearchResult:
    """Sample ``space.budget`` configs, score each by k-fold CV, return the best; ties go to the first sampled."""
    kind, metric = model_kind(kind), ScoreKind(metric)
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    sampled = list(ParameterSampler(space.for_kind(kind), n_iter=space.budget, random_state=seed)) or [{}]
    candidates: list[Candidate] = []
    best_config, best_score = None, _worst(metric)
    for params in sampled:
        config = make_config(kind, {**(base_config or {}), **params}).to_dict()
        try:
            score = cross_validated_score(kind, config, train, metric, splitter)
        except (SurvivalError, np.linalg.LinAlgError) as error:
            logger.warning("search %s: config %s failed: %s: %s", kind.value, params, type(error).__name__, error)
            candidates.append(Candidate(config, None, f"{type(error).__name__}: {error}"))
            score = _worst(metric)
        else:
            candidates.append(Candidate(config, score))
        if best_config is None or _better(metric, score, best_score):
            best_config, best_score = config, score
    logger.info("search %s: best %s=%.4f with %s", kind.value, metric.value, best_score, best_config)
    return SearchResult(kind, metric, best_config, float(best_score), tuple(candidates))

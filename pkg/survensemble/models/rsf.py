"""Random survival forest: bootstrap trees split by the log-rank statistic, Nelson-Aalen estimates in the leaves."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from survensemble.core import Dataset, event_grid, nelson_aalen
from survensemble.models.base import FittedModel, ModelConfig, ModelKind, as_matrix, check_range, monotone_survival
from survensemble.models.trees import LEAF, TreeArrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RsfConfig(ModelConfig):
    n_trees: int = 100
    max_features: int | None = None
    min_samples_leaf: int = 3
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def validate(self) -> None:
        check_range("rsf", "n_trees", self.n_trees, 1)
        check_range("rsf", "max_features", self.max_features, 1)
        check_range("rsf", "min_samples_leaf", self.min_samples_leaf, 1)
        check_range("rsf", "max_depth", self.max_depth, 0)


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    tree: TreeArrays
    leaf_cumhaz: np.ndarray

    def cumulative_hazard(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_cumhaz[self.tree.apply(X)]


@dataclass(frozen=True, eq=False)
class RsfModel(FittedModel):
    kind = ModelKind.RSF

    training_grid: np.ndarray
    n_features: int
    trees: tuple[SurvivalTree, ...]

    def cumulative_hazard(self, X: np.ndarray) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        total = np.zeros((X.shape[0], self.training_grid.size))
        for tree in self.trees:
            total += tree.cumulative_hazard(X)
        return total / len(self.trees)

    def survival_matrix(self, X: np.ndarray) -> np.ndarray:
        return monotone_survival(np.exp(-self.cumulative_hazard(X)))

    def risk_scores(self, X: np.ndarray) -> np.ndarray:
        """Ensemble mortality: the forest cumulative hazard summed over the training event grid."""
        return self.cumulative_hazard(X).sum(axis=1)

    def parameters(self) -> dict[str, Any]:
        return {"trees": [{"tree": t.tree.to_dict(), "leaf_cumhaz": t.leaf_cumhaz.tolist()} for t in self.trees]}

    @classmethod
    def from_parameters(cls, n_features: int, training_grid: np.ndarray, parameters: dict[str, Any]) -> RsfModel:
        grid = np.asarray(training_grid, dtype=float)
        trees = tuple(
            SurvivalTree(
                TreeArrays.from_dict(raw["tree"]),
                np.asarray(raw["leaf_cumhaz"], dtype=float).reshape(-1, grid.size),
            )
            for raw in parameters["trees"]
        )
        return cls(training_grid=grid, n_features=n_features, trees=trees)


def log_rank_scores(
    x: np.ndarray, times: np.ndarray, events: np.ndarray, min_samples_leaf: int
) -> tuple[np.ndarray, np.ndarray]:
    """Log-rank statistic of every admissible split ``x <= threshold``, with the midpoint thresholds."""
    grid = event_grid(times, events)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    candidates = np.flatnonzero(xs[:-1] < xs[1:])
    left_size = candidates + 1
    candidates = candidates[(left_size >= min_samples_leaf) & (x.size - left_size >= min_samples_leaf)]
    if candidates.size == 0 or grid.size == 0:
        return np.empty(0), np.empty(0)
    at_risk = (times[order][:, None] >= grid[None, :]).astype(float)
    deaths = (events[order][:, None] & (times[order][:, None] == grid[None, :])).astype(float)
    n_k, d_k = at_risk.sum(axis=0), deaths.sum(axis=0)
    n_left = np.cumsum(at_risk, axis=0)[candidates]
    d_left = np.cumsum(deaths, axis=0)[candidates]
    share = n_left / n_k
    numerator = (d_left - share * d_k).sum(axis=1)
    spread = np.divide(n_k - d_k, n_k - 1.0, out=np.zeros_like(n_k), where=n_k > 1)
    variance = (share * (1.0 - share) * spread * d_k).sum(axis=1)
    scores = np.divide(numerator**2, variance, out=np.zeros_like(variance), where=variance > 1e-12)
    return scores, 0.5 * (xs[candidates] + xs[candidates + 1])


def _grow_tree(
    X: np.ndarray, times: np.ndarray, events: np.ndarray, grid: np.ndarray, config: RsfConfig, seed: np.random.SeedSequence
) -> SurvivalTree:
    rng = np.random.default_rng(seed)
    n, d = X.shape
    sample = rng.integers(0, n, n) if config.bootstrap else np.arange(n)
    max_features = min(config.max_features or d, d)
    feature, threshold, left, right, leaf = [LEAF], [0.0], [-1], [-1], [-1]
    leaf_cumhaz: list[np.ndarray] = []
    stack = [(0, sample, 0)]
    while stack:
        node, idx, depth = stack.pop()
        best = (0.0, -1, 0.0)
        can_split = (
            (config.max_depth is None or depth < config.max_depth)
            and idx.size >= 2 * config.min_samples_leaf
            and events[idx].any()
        )
        if can_split:
            for j in rng.choice(d, size=max_features, replace=False):
                scores, thresholds = log_rank_scores(X[idx, j], times[idx], events[idx], config.min_samples_leaf)
                if scores.size and scores.max() > best[0]:
                    k = int(np.argmax(scores))
                    best = (float(scores[k]), int(j), float(thresholds[k]))
        if best[1] < 0:
            leaf[node] = len(leaf_cumhaz)
            leaf_cumhaz.append(nelson_aalen(times[idx], events[idx], grid)[1])
            continue
        _, j, cut = best
        goes_left = X[idx, j] <= cut
        feature[node], threshold[node] = j, cut
        left[node], right[node] = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            leaf.append(-1)
        stack.append((right[node], idx[~goes_left], depth + 1))
        stack.append((left[node], idx[goes_left], depth + 1))
    tree = TreeArrays(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        leaf=np.asarray(leaf, dtype=int),
    )
    return SurvivalTree(tree, np.vstack(leaf_cumhaz))


def fit_rsf(dataset: Dataset, config: RsfConfig | None = None) -> RsfModel:
    config = config or RsfConfig()
    dataset.require_events()
    X, times, events = dataset.covariates, dataset.times, dataset.events
    grid = event_grid(times, events)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = Parallel(n_jobs=config.n_jobs)(delayed(_grow_tree)(X, times, events, grid, config, s) for s in seeds)
    logger.debug(
        "rsf grew %d trees, mean %.1f leaves",
        len(trees),
        np.mean([t.leaf_cumhaz.shape[0] for t in trees]),
    )
    return RsfModel(training_grid=grid, n_features=dataset.d, trees=tuple(trees))

"""The comparison protocol: repeated train/validation splits, model variants, the ensemble and the aggregates."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from rich.progress import track

import survensemble
from survensemble.bench.ingest import DatasetManifest, Standardizer, ingest
from survensemble.bench.search import SearchSpace, random_search
from survensemble.bench.splits import split
from survensemble.config import get_settings
from survensemble.core import Dataset
from survensemble.ensemble import EnsembleConfig, EnsembleModel, cross_fitted_weights
from survensemble.errors import ConfigError, SurvivalError
from survensemble.models import ModelSpec, fit_model
from survensemble.scoring import ScoreKind, evaluate_predictor
from survensemble.simulate import GeneratorKind, GeneratorSpec, generate

logger = logging.getLogger(__name__)

ENSEMBLE = "ensemble"
RANKED = ("First", "Second", "Third")
TRACE_POINTS = 64

STANDINS: dict[str, tuple[GeneratorSpec, float | None]] = {
    "pbc": (GeneratorSpec(GeneratorKind.COX_STYLE, n=276, d=17, censor_target=0.598), None),
    "gbcsg2": (GeneratorSpec(GeneratorKind.AFT_STYLE, n=686, d=8, censor_target=0.564), None),
    # follow-up in months keeps the number of distinct event times small
    "tlcm": (GeneratorSpec(GeneratorKind.MULTIMODE_WEIBULL, n=7043, d=19, censor_target=0.73), 30.0),
}


@dataclass(frozen=True)
class DatasetSource:
    """Either a manifest pointing at a delimited file or a generator spec for a synthetic table."""

    name: str
    manifest: DatasetManifest | None = None
    generator: GeneratorSpec | None = None
    time_unit: float | None = None
    raw: Any = None

    @classmethod
    def from_entry(cls, entry: str | Mapping[str, Any], base_dir: Path | None = None) -> DatasetSource:
        if isinstance(entry, str):
            entry = {"standin": entry} if entry in STANDINS else {"manifest": entry}
        entry = dict(entry)
        unknown = sorted(set(entry) - {"name", "manifest", "standin", "generator", "time_unit", "seed"})
        if unknown:
            raise ConfigError(f"dataset entry: unknown keys {unknown}")
        if sum(k in entry for k in ("manifest", "standin", "generator")) != 1:
            raise ConfigError("dataset entry needs exactly one of 'manifest', 'standin' or 'generator'")
        if "manifest" in entry:
            manifest = entry["manifest"]
            if isinstance(manifest, Mapping):
                manifest = DatasetManifest.from_dict(manifest, base_dir)
            else:
                path = Path(manifest)
                manifest = DatasetManifest.from_file(path if path.is_absolute() or base_dir is None else base_dir / path)
            return cls(entry.get("name", manifest.name), manifest=manifest, raw=entry)
        if "standin" in entry:
            if entry["standin"] not in STANDINS:
                raise ConfigError(f"unknown stand-in {entry['standin']!r}; expected one of {sorted(STANDINS)}")
            generator, time_unit = STANDINS[entry["standin"]]
            generator = replace(generator, seed=int(entry.get("seed", 0)))
            return cls(
                entry.get("name", entry["standin"]), generator=generator, time_unit=entry.get("time_unit", time_unit), raw=entry
            )
        if "name" not in entry:
            raise ConfigError("a generator dataset entry needs a 'name'")
        return cls(
            entry["name"], generator=GeneratorSpec.from_dict(entry["generator"]), time_unit=entry.get("time_unit"), raw=entry
        )

    def load(self, full_data_scaling: bool = False) -> Dataset:
        if self.manifest is not None:
            return ingest(self.manifest, full_data_scaling=full_data_scaling)
        dataset = generate(self.generator).dataset
        if self.time_unit:
            dataset = Dataset(dataset.covariates, np.ceil(dataset.times / self.time_unit), dataset.events, dataset.feature_names)
        if full_data_scaling and dataset.d:
            dataset = Standardizer().fit(dataset).transform(dataset)
        return dataset


@dataclass(frozen=True)
class BenchVariant:
    """A model variant; starred variants tune their config by random search on each training split."""

    spec: ModelSpec
    search: bool = False

    @property
    def name(self) -> str:
        return self.spec.name

    @classmethod
    def from_entry(cls, entry: str | Mapping[str, Any]) -> BenchVariant:
        entry = {"name": entry} if isinstance(entry, str) else dict(entry)
        name = str(entry.get("name", entry.get("kind", "")))
        search = bool(entry.pop("search", name.endswith("*")))
        entry.setdefault("kind", name.rstrip("*"))
        return cls(ModelSpec.from_dict({**entry, "name": name}), search)

    def to_dict(self) -> dict[str, Any]:
        return {**self.spec.to_dict(), "search": self.search}


@dataclass(frozen=True)
class SearchSettings:
    space: SearchSpace = field(default_factory=SearchSpace)
    folds: int = 5
    metric: ScoreKind = ScoreKind.CONCORDANCE
    raw: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> SearchSettings:
        raw = dict(raw or {})
        folds = int(raw.pop("folds", 5))
        metric = raw.pop("metric", ScoreKind.CONCORDANCE)
        if folds < 2:
            raise ConfigError(f"search.folds={folds} must be at least 2")
        try:
            metric = ScoreKind(metric)
        except ValueError:
            raise ConfigError(f"search.metric: unknown metric {metric!r}") from None
        return cls(SearchSpace.from_dict(raw), folds, metric, {**raw, "folds": folds, "metric": metric.value})


@dataclass(frozen=True)
class EnsembleSettings:
    members: tuple[str, ...]
    config: EnsembleConfig = field(default_factory=EnsembleConfig)
    folds: int = 5


@dataclass(frozen=True)
class BenchConfig:
    datasets: tuple[DatasetSource, ...]
    models: tuple[BenchVariant, ...]
    n_splits: int = 25
    train_fraction: float = 0.8
    metrics: tuple[ScoreKind, ...] = (ScoreKind.CONCORDANCE, ScoreKind.IBS)
    search: SearchSettings = field(default_factory=SearchSettings)
    ensemble: EnsembleSettings | None = None
    master_seed: int = 0
    full_data_scaling: bool = False

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ConfigError("bench config lists no datasets")
        if not self.models:
            raise ConfigError("bench config lists no models")
        names = [v.name for v in self.models]
        if len(set(names)) != len(names) or ENSEMBLE in names or set(names) & set(RANKED):
            raise ConfigError(f"model names must be unique and not reserved, got {names}")
        if self.n_splits < 1:
            raise ConfigError(f"n_splits={self.n_splits} must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction={self.train_fraction} must lie in (0, 1)")
        if ScoreKind.BRIER in self.metrics:
            raise ConfigError("metrics: brier is evaluated at a single time; use concordance or ibs")
        if self.ensemble is not None:
            missing = sorted(set(self.ensemble.members) - set(names))
            if missing:
                raise ConfigError(f"ensemble members {missing} are not model variants")
            if len(self.ensemble.members) < 2:
                raise ConfigError("the ensemble needs at least 2 members")

    def variant(self, name: str) -> BenchVariant:
        return next(v for v in self.models if v.name == name)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | None = None) -> BenchConfig:
        known = {
            "datasets", "models", "n_splits", "train_fraction", "metrics", "search", "ensemble", "master_seed", "full_data_scaling"
        }
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"bench config: unknown keys {unknown}")
        models = tuple(BenchVariant.from_entry(m) for m in raw.get("models", ()))
        try:
            metrics = tuple(ScoreKind(m) for m in raw.get("metrics", cls.metrics))
        except ValueError as error:
            raise ConfigError(f"metrics: {error}") from None
        ensemble = None
        ensemble_raw = raw.get("ensemble", {})
        if ensemble_raw is not None:
            ensemble_raw = dict(ensemble_raw)
            members = ensemble_raw.pop("members", None) or [v.name for v in models if not v.search]
            folds = int(ensemble_raw.pop("folds", 5))
            if len(members) >= 2 or "ensemble" in raw:
                ensemble = EnsembleSettings(tuple(members), EnsembleConfig.from_dict(ensemble_raw), folds)
        return cls(
            datasets=tuple(DatasetSource.from_entry(d, base_dir) for d in raw.get("datasets", ())),
            models=models,
            n_splits=int(raw.get("n_splits", 25)),
            train_fraction=float(raw.get("train_fraction", 0.8)),
            metrics=metrics,
            search=SearchSettings.from_dict(raw.get("search")),
            ensemble=ensemble,
            master_seed=int(raw.get("master_seed", 0)),
            full_data_scaling=bool(raw.get("full_data_scaling", False)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> BenchConfig:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as error:
            raise ConfigError(f"cannot read bench config {path}: {error}") from error
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict[str, Any]:
        ensemble = None
        if self.ensemble is not None:
            ensemble = {
                "members": list(self.ensemble.members),
                "folds": self.ensemble.folds,
                "eta": self.ensemble.config.eta,
                "max_iter": self.ensemble.config.max_iter,
                "stop_tol": self.ensemble.config.stop_tol,
                "horizon": self.ensemble.config.horizon,
            }
        return {
            "datasets": [json.loads(json.dumps(d.raw, default=str)) for d in self.datasets],
            "models": [v.to_dict() for v in self.models],
            "n_splits": self.n_splits,
            "train_fraction": self.train_fraction,
            "metrics": [m.value for m in self.metrics],
            "search": json.loads(json.dumps(dict(self.search.raw), default=str)),
            "ensemble": ensemble,
            "master_seed": self.master_seed,
            "full_data_scaling": self.full_data_scaling,
        }


@dataclass(frozen=True)
class BenchCell:
    dataset: str
    model: str
    split: int
    metric: str
    value: float


@dataclass(frozen=True)
class CellFailure:
    dataset: str
    split: int
    model: str
    error: str


@dataclass(frozen=True)
class Aggregate:
    """``scope`` is "dataset" (one dataset's mean over splits), "overall" (mean of dataset means) or "ranked"."""

    scope: str
    dataset: str
    model: str
    metric: str
    mean: float
    sd: float
    count: int


@dataclass(frozen=True)
class EnsembleRecord:
    dataset: str
    split: int
    members: tuple[str, ...]
    weights: tuple[float, ...]
    fold_weights: tuple[tuple[float, ...], ...]
    # (iteration, objective) pairs per fold, log-thinned
    traces: tuple[tuple[tuple[int, float], ...], ...]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> EnsembleRecord:
        return cls(
            dataset=raw["dataset"],
            split=int(raw["split"]),
            members=tuple(raw["members"]),
            weights=tuple(raw["weights"]),
            fold_weights=tuple(tuple(w) for w in raw["fold_weights"]),
            traces=tuple(tuple((int(i), float(v)) for i, v in trace) for trace in raw["traces"]),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "split": self.split,
            "members": list(self.members),
            "weights": list(self.weights),
            "fold_weights": [list(w) for w in self.fold_weights],
            "traces": [[list(p) for p in trace] for trace in self.traces],
        }


@dataclass(frozen=True)
class BenchReport:
    config: dict[str, Any]
    datasets: tuple[dict[str, Any], ...]
    cells: tuple[BenchCell, ...]
    failures: tuple[CellFailure, ...]
    aggregates: tuple[Aggregate, ...]
    ensembles: tuple[EnsembleRecord, ...]
    metadata: dict[str, Any]

    report_kind = "bench"

    def aggregate(self, scope: str, model: str, metric: str, dataset: str = "*") -> Aggregate:
        for row in self.aggregates:
            if (row.scope, row.dataset, row.model, row.metric) == (scope, dataset, model, metric):
                return row
        raise KeyError((scope, dataset, model, metric))

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_kind": self.report_kind,
            "metadata": self.metadata,
            "config": self.config,
            "datasets": list(self.datasets),
            "cells": [vars(c) for c in self.cells],
            "failures": [vars(f) for f in self.failures],
            "aggregates": [vars(a) for a in self.aggregates],
            "ensembles": [e.to_dict() for e in self.ensembles],
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> BenchReport:
        if raw.get("report_kind") != cls.report_kind:
            raise ConfigError(f"not a bench report (report_kind={raw.get('report_kind')!r})")
        return cls(
            config=raw["config"],
            datasets=tuple(raw["datasets"]),
            cells=tuple(BenchCell(**c) for c in raw["cells"]),
            failures=tuple(CellFailure(**f) for f in raw["failures"]),
            aggregates=tuple(Aggregate(**a) for a in raw["aggregates"]),
            ensembles=tuple(EnsembleRecord.from_dict(e) for e in raw["ensembles"]),
            metadata=raw["metadata"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)


def thin_trace(trace: Sequence[float], points: int = TRACE_POINTS) -> tuple[tuple[int, float], ...]:
    """Keep at most ``points`` log-spaced iterations, always including the first and the last."""
    if not trace:
        return ()
    keep = np.unique(np.round(np.geomspace(1, len(trace), num=min(points, len(trace)))).astype(int) - 1)
    return tuple((int(i), float(trace[i])) for i in keep)


def split_seeds(master_seed: int, dataset_index: int, split_index: int) -> tuple[int, int, int]:
    """(split, search, ensemble fold) seeds from SeedSequence([master, dataset, split])."""
    words = np.random.SeedSequence([master_seed, dataset_index, split_index]).generate_state(3)
    return int(words[0]), int(words[1]), int(words[2])


def _failure(dataset: str, split_index: int, model: str, error: Exception) -> CellFailure:
    return CellFailure(dataset, split_index, model, f"{type(error).__name__}: {error}")


def _run_split(
    config: BenchConfig, name: str, dataset: Dataset, dataset_index: int, split_index: int
) -> tuple[list[BenchCell], list[CellFailure], EnsembleRecord | None]:
    split_seed, search_seed, ensemble_seed = split_seeds(config.master_seed, dataset_index, split_index)
    try:
        train, validation = split(dataset, config.train_fraction, split_seed)
    except SurvivalError as error:
        return [], [_failure(name, split_index, "*", error)], None
    if not config.full_data_scaling:
        scaler = Standardizer().fit(train)
        train, validation = scaler.transform(train), scaler.transform(validation)

    cells: list[BenchCell] = []
    failures: list[CellFailure] = []
    fitted: dict[str, Any] = {}
    chosen: dict[str, Mapping[str, Any]] = {}
    for variant in config.models:
        try:
            model_config = variant.spec.config
            if variant.search:
                result = random_search(
                    variant.spec.kind,
                    config.search.space,
                    train,
                    config.search.metric,
                    config.search.folds,
                    search_seed,
                    base_config=model_config,
                )
                model_config = result.best_config
            model = fit_model(variant.spec.kind, train, model_config)
            scores = evaluate_predictor(model, validation, config.metrics)
        except (SurvivalError, np.linalg.LinAlgError) as error:
            failures.append(_failure(name, split_index, variant.name, error))
            continue
        fitted[variant.name], chosen[variant.name] = model, model_config
        cells.extend(BenchCell(name, variant.name, split_index, m.value, float(scores[m])) for m in config.metrics)

    if config.ensemble is None:
        return cells, failures, None
    members = config.ensemble.members
    try:
        absent = [m for m in members if m not in fitted]
        if absent:
            raise SurvivalError(f"members {absent} failed to fit")
        result = cross_fitted_weights(
            [(config.variant(m).spec.kind, chosen[m]) for m in members],
            train,
            config.ensemble.config,
            config.ensemble.folds,
            ensemble_seed,
        )
        ensemble = EnsembleModel(tuple(fitted[m] for m in members), result.weights, horizon=config.ensemble.config.horizon)
        scores = evaluate_predictor(ensemble, validation, config.metrics)
    except (SurvivalError, np.linalg.LinAlgError) as error:
        failures.append(_failure(name, split_index, ENSEMBLE, error))
        return cells, failures, None
    cells.extend(BenchCell(name, ENSEMBLE, split_index, m.value, float(scores[m])) for m in config.metrics)
    record = EnsembleRecord(
        dataset=name,
        split=split_index,
        members=tuple(members),
        weights=tuple(result.weights.values.tolist()),
        fold_weights=tuple(tuple(w.values.tolist()) for w in result.fold_weights),
        traces=tuple(thin_trace(t) for t in result.fold_traces),
    )
    return cells, failures, record


def _summary(values: Sequence[float]) -> tuple[float, float, int]:
    values = np.asarray(values, dtype=float)
    if not values.size:
        return float("nan"), float("nan"), 0
    return float(values.mean()), float(values.std(ddof=1)) if values.size > 1 else 0.0, int(values.size)


def aggregate_cells(
    cells: Sequence[BenchCell], datasets: Sequence[str], models: Sequence[str], metrics: Sequence[ScoreKind]
) -> list[Aggregate]:
    """Per-dataset mean/sd, the mean of dataset means per model, and the rank-k best base model averaged over datasets."""
    rows: list[Aggregate] = []
    means: dict[tuple[str, str, str], float] = {}
    for dataset in datasets:
        for model in models:
            for metric in metrics:
                values = [c.value for c in cells if (c.dataset, c.model, c.metric) == (dataset, model, metric.value)]
                mean, sd, count = _summary(values)
                means[dataset, model, metric.value] = mean
                rows.append(Aggregate("dataset", dataset, model, metric.value, mean, sd, count))
    for model in models:
        for metric in metrics:
            per_dataset = [means[d, model, metric.value] for d in datasets]
            mean, sd, count = _summary(per_dataset)
            rows.append(Aggregate("overall", "*", model, metric.value, mean, sd, count))
    base = [m for m in models if m != ENSEMBLE]
    for metric in metrics:
        higher_better = metric is ScoreKind.CONCORDANCE
        ranked_per_dataset = []
        for dataset in datasets:
            scores = [means[dataset, m, metric.value] for m in base if np.isfinite(means[dataset, m, metric.value])]
            ranked_per_dataset.append(sorted(scores, reverse=higher_better))
        for rank, label in enumerate(RANKED[: len(base)]):
            picked = [scores[rank] for scores in ranked_per_dataset if len(scores) > rank]
            mean, sd, count = _summary(picked)
            rows.append(Aggregate("ranked", "*", label, metric.value, mean, sd, count))
    return rows


def _environment() -> dict[str, str]:
    import joblib
    import pandas
    import scipy
    import sklearn
    import torch

    return {
        "survensemble": survensemble.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pandas.__version__,
        "scikit-learn": sklearn.__version__,
        "joblib": joblib.__version__,
        "torch": torch.__version__,
    }


def run_benchmark(config: BenchConfig, n_jobs: int | None = None) -> BenchReport:
    """Every (dataset, split) cell runs as one job; the report is assembled in job order."""
    n_jobs = n_jobs or get_settings().workers
    loaded = [(source.name, source.load(config.full_data_scaling)) for source in config.datasets]
    for name, dataset in loaded:
        logger.info("%s: %d subjects, %d covariates, %.1f%% censored", name, dataset.n, dataset.d, 100 * dataset.censoring_rate)
    jobs = [(i, s) for i in range(len(loaded)) for s in range(config.n_splits)]
    outputs = Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_run_split)(config, loaded[i][0], loaded[i][1], i, s) for i, s in jobs
    )
    cells: list[BenchCell] = []
    failures: list[CellFailure] = []
    ensembles: list[EnsembleRecord] = []
    for split_cells, split_failures, record in track(outputs, total=len(jobs), description="benchmark", transient=True):
        for failure in split_failures:
            logger.warning("%s split %d: %s failed: %s", failure.dataset, failure.split, failure.model, failure.error)
        cells.extend(split_cells)
        failures.extend(split_failures)
        if record is not None:
            ensembles.append(record)

    model_names = [v.name for v in config.models] + ([ENSEMBLE] if config.ensemble is not None else [])
    names = [name for name, _ in loaded]
    return BenchReport(
        config=config.to_dict(),
        datasets=tuple(
            {"name": name, "n": d.n, "d": d.d, "censoring_rate": d.censoring_rate, "feature_names": list(d.feature_names)}
            for name, d in loaded
        ),
        cells=tuple(cells),
        failures=tuple(failures),
        aggregates=tuple(aggregate_cells(cells, names, model_names, config.metrics)),
        ensembles=tuple(ensembles),
        metadata={
            "master_seed": config.master_seed,
            "n_splits": config.n_splits,
            "train_fraction": config.train_fraction,
            "full_data_scaling": config.full_data_scaling,
            "standardization": "full data" if config.full_data_scaling else "train split",
            "versions": _environment(),
        },
    )

"""Synthetic right-censored data generators and the samples / features / censorship sweep scenarios."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from rich.progress import track

from survensemble.bench.splits import split
from survensemble.config import get_settings
from survensemble.core import Dataset
from survensemble.errors import ConfigError, InsufficientFeatures, SurvivalError
from survensemble.models import ModelSpec
from survensemble.scoring import ScoreKind, evaluate_predictor

logger = logging.getLogger(__name__)

CALIBRATION_STEPS = 30

# failure modes: decreasing hazard (assembly defects) then two wear-out modes
MULTIMODE_SHAPES = (0.003, 3.0, 6.0)
MULTIMODE_SCALES = (1.0, 1.2e4, 4e3)
MULTIMODE_BASE_RATE = 100.0
MULTIMODE_SHIFT = 100.0


class GeneratorKind(StrEnum):
    COX_STYLE = "cox_style"
    AFT_STYLE = "aft_style"
    MULTIMODE_WEIBULL = "multimode_weibull"


class ScenarioAxis(StrEnum):
    SAMPLES = "samples"
    FEATURES = "features"
    CENSORSHIP = "censorship"


def _enum(enum_cls: type[StrEnum], value: Any, key: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError:
        raise ConfigError(f"{key}={value!r}; expected one of {[e.value for e in enum_cls]}") from None


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    n: int = 1000
    d: int = 12
    censor_target: float = 0.5
    seed: int = 0
    truth: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", _enum(GeneratorKind, self.kind, "generator.kind"))
        if self.n < 2:
            raise ConfigError(f"generator.n={self.n} must be at least 2")
        if self.d < 0:
            raise ConfigError(f"generator.d={self.d} must be nonnegative")
        if not 0 <= self.censor_target < 1:
            raise ConfigError(f"generator.censor_target={self.censor_target} must lie in [0, 1)")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> GeneratorSpec:
        unknown = sorted(set(raw) - {"kind", "n", "d", "censor_target", "seed", "truth"})
        if unknown:
            raise ConfigError(f"generator: unknown keys {unknown}")
        return cls(**{**raw, "truth": dict(raw.get("truth") or {})})

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n": self.n,
            "d": self.d,
            "censor_target": self.censor_target,
            "seed": self.seed,
            "truth": dict(self.truth),
        }


@dataclass(frozen=True, eq=False)
class SimulatedData:
    dataset: Dataset
    truth: dict[str, Any]


def _coefficients(spec: GeneratorSpec, key: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Coefficients from the truth record, or N(0, 0.5) draws when absent."""
    if key in spec.truth:
        values = np.asarray(spec.truth[key], dtype=float)
        if values.shape != (size,):
            raise ConfigError(f"generator.truth.{key} needs {size} entries, got {values.size}")
        return values
    return rng.normal(0.0, 0.5, size)


def calibrate_censoring(event_times: np.ndarray, uniforms: np.ndarray, target: float) -> tuple[np.ndarray, float]:
    """Censoring times L * V with L bisected (geometrically) so that the censored share matches ``target``."""
    if target <= 0:
        return np.full(event_times.shape, np.inf), float("inf")
    finite = event_times[np.isfinite(event_times) & (event_times > 0)]
    lo = np.log(finite.min() * 1e-6)
    hi = np.log(finite.max() * 1e6)
    for _ in range(CALIBRATION_STEPS):
        mid = 0.5 * (lo + hi)
        if np.mean(np.exp(mid) * uniforms < event_times) > target:
            lo = mid
        else:
            hi = mid
    scale = float(np.exp(0.5 * (lo + hi)))
    return scale * uniforms, scale


def _censored(
    spec: GeneratorSpec, X: np.ndarray, event_times: np.ndarray, rng: np.random.Generator, truth: dict[str, Any]
) -> SimulatedData:
    censor_times, scale = calibrate_censoring(event_times, rng.uniform(size=spec.n), spec.censor_target)
    observed = np.minimum(event_times, censor_times)
    events = event_times <= censor_times
    truth |= {"event_times": event_times, "censor_times": censor_times, "censor_scale": scale}
    return SimulatedData(Dataset(X, observed, events, tuple(f"x{j}" for j in range(spec.d))), truth)


def gen_cox_style(spec: GeneratorSpec) -> SimulatedData:
    """Standard normal covariates and proportional hazards on a Weibull baseline (shape 1.5, scale 1 by default)."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    X = rng.standard_normal((spec.n, spec.d))
    beta = _coefficients(spec, "beta", spec.d, rng)
    shape = float(spec.truth.get("baseline_shape", 1.5))
    scale = float(spec.truth.get("baseline_scale", 1.0))
    # Lambda_0(T) exp(eta) = E with E ~ Exp(1)
    event_times = scale * (rng.exponential(size=spec.n) * np.exp(-(X @ beta))) ** (1.0 / shape)
    truth = {"beta": beta, "baseline_shape": shape, "baseline_scale": scale}
    return _censored(spec, X, event_times, rng, truth)


def gen_aft_style(spec: GeneratorSpec) -> SimulatedData:
    """Standard normal covariates, Weibull times with scale exp(beta0 + beta @ x) and shape 2 by default."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    X = rng.standard_normal((spec.n, spec.d))
    beta = _coefficients(spec, "beta", spec.d, rng)
    beta0 = float(spec.truth.get("beta0", 1.0))
    shape = float(spec.truth.get("shape", 2.0))
    event_times = np.exp(beta0 + X @ beta) * rng.exponential(size=spec.n) ** (1.0 / shape)
    truth = {"beta0": beta0, "beta": beta, "shape": shape}
    return _censored(spec, X, event_times, rng, truth)


def multimode_features(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Round-robin families: N(1, 0.3), U(0, 1) and a 3-level categorical coded 0, 1, 2."""
    X = np.empty((n, d))
    for j in range(d):
        match j % 3:
            case 0:
                X[:, j] = rng.normal(1.0, 0.3, n)
            case 1:
                X[:, j] = rng.uniform(0.0, 1.0, n)
            case _:
                X[:, j] = rng.integers(0, 3, n)
    return X


def shifted_weibull_inverse(
    draws: np.ndarray, log_multiplier: np.ndarray, shape: float, scale: float, base_rate: float, shift: float
) -> np.ndarray:
    """Solve base * exp(eta) * [((t + shift)/s)^k - (shift/s)^k] = E for t."""
    inner = draws * np.exp(-log_multiplier) / base_rate + (shift / scale) ** shape
    with np.errstate(over="ignore"):
        return np.exp(np.log(scale) + np.log(inner) / shape) - shift


def gen_multimode_weibull(spec: GeneratorSpec) -> SimulatedData:
    """Three competing Weibull failure modes; the first one to occur is the observed event."""
    if spec.d < 3:
        raise InsufficientFeatures(f"multimode generator needs d >= 3 (one feature per family), got {spec.d}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    X = multimode_features(spec.n, spec.d, rng)
    groups = np.array_split(np.arange(spec.d), len(MULTIMODE_SHAPES))
    coefficients = []
    candidates = np.empty((spec.n, len(MULTIMODE_SHAPES)))
    for m, (shape, scale, group) in enumerate(zip(MULTIMODE_SHAPES, MULTIMODE_SCALES, groups)):
        coef = _coefficients(spec, f"mode{m}_coefficients", group.size, rng)
        coefficients.append(coef)
        candidates[:, m] = shifted_weibull_inverse(
            rng.exponential(size=spec.n), X[:, group] @ coef, shape, scale, MULTIMODE_BASE_RATE, MULTIMODE_SHIFT
        )
    event_times = candidates.min(axis=1)
    truth = {
        "shapes": list(MULTIMODE_SHAPES),
        "scales": list(MULTIMODE_SCALES),
        "groups": [g.tolist() for g in groups],
        **{f"mode{m}_coefficients": c for m, c in enumerate(coefficients)},
        "candidates": candidates,
        "failure_mode": candidates.argmin(axis=1),
    }
    return _censored(spec, X, event_times, rng, truth)


GENERATORS = {
    GeneratorKind.COX_STYLE: gen_cox_style,
    GeneratorKind.AFT_STYLE: gen_aft_style,
    GeneratorKind.MULTIMODE_WEIBULL: gen_multimode_weibull,
}


def generate(spec: GeneratorSpec) -> SimulatedData:
    return GENERATORS[spec.kind](spec)


@dataclass(frozen=True)
class ScenarioSpec:
    axis: ScenarioAxis
    grid: tuple[float, ...]
    fixed: Mapping[str, float] = field(default_factory=dict)
    replications: int = 100
    metrics: tuple[ScoreKind, ...] = (ScoreKind.CONCORDANCE, ScoreKind.IBS)
    master_seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", _enum(ScenarioAxis, self.axis, "scenario.axis"))
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "metrics", tuple(_enum(ScoreKind, m, "scenario.metrics") for m in self.metrics))
        steps = np.diff(self.grid)
        if not self.grid or not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError(f"scenario.grid must be non-empty and sorted, got {list(self.grid)}")
        if ScoreKind.BRIER in self.metrics:
            raise ConfigError("scenario.metrics: brier is evaluated at a single time; use concordance or ibs")
        if self.replications < 1:
            raise ConfigError(f"scenario.replications={self.replications} must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"scenario.train_fraction={self.train_fraction} must lie in (0, 1)")
        unknown = sorted(set(self.fixed) - {"n", "d", "censor_target"})
        if unknown:
            raise ConfigError(f"scenario.fixed: unknown keys {unknown}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ScenarioSpec:
        known = {"axis", "grid", "fixed", "replications", "metrics", "master_seed", "train_fraction"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"scenario: unknown keys {unknown}")
        return cls(**{**raw, "grid": tuple(raw["grid"]), "metrics": tuple(raw.get("metrics", cls.metrics))})

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis.value,
            "grid": list(self.grid),
            "fixed": dict(self.fixed),
            "replications": self.replications,
            "metrics": [m.value for m in self.metrics],
            "master_seed": self.master_seed,
            "train_fraction": self.train_fraction,
        }

    def generator_at(self, generator: GeneratorSpec, value: float, seed: int) -> GeneratorSpec:
        """The generator for one grid point; the features axis always generates the largest grid width."""
        settings = {**self.fixed}
        match self.axis:
            case ScenarioAxis.SAMPLES:
                settings["n"] = value
            case ScenarioAxis.FEATURES:
                settings["d"] = max(self.grid)
            case ScenarioAxis.CENSORSHIP:
                settings["censor_target"] = value
        return replace(
            generator,
            n=int(settings.get("n", generator.n)),
            d=int(settings.get("d", generator.d)),
            censor_target=float(settings.get("censor_target", generator.censor_target)),
            seed=seed,
        )


@dataclass(frozen=True)
class ScenarioCell:
    grid_value: float
    model: str
    metric: str
    mean: float
    sd: float
    count: int


@dataclass(frozen=True)
class ReplicationFailure:
    grid_value: float
    replication: int
    model: str
    error: str


@dataclass(frozen=True)
class ScenarioResult:
    scenario: ScenarioSpec
    generator: GeneratorSpec
    models: tuple[str, ...]
    cells: tuple[ScenarioCell, ...]
    failures: tuple[ReplicationFailure, ...] = ()
    realized_censoring: tuple[float, ...] = ()

    def cell(self, grid_value: float, model: str, metric: str) -> ScenarioCell:
        for cell in self.cells:
            if cell.grid_value == grid_value and cell.model == model and cell.metric == metric:
                return cell
        raise KeyError((grid_value, model, metric))

    def means(self, model: str, metric: str) -> np.ndarray:
        """Mean score along the grid for one model; NaN where every replication failed."""
        return np.array([self.cell(g, model, metric).mean for g in self.scenario.grid])

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_kind": "scenario",
            "scenario": self.scenario.to_dict(),
            "generator": self.generator.to_dict(),
            "models": list(self.models),
            "cells": [vars(c) for c in self.cells],
            "failures": [vars(f) for f in self.failures],
            "realized_censoring": list(self.realized_censoring),
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ScenarioResult:
        return cls(
            scenario=ScenarioSpec.from_dict(raw["scenario"]),
            generator=GeneratorSpec.from_dict(raw["generator"]),
            models=tuple(raw["models"]),
            cells=tuple(ScenarioCell(**c) for c in raw["cells"]),
            failures=tuple(ReplicationFailure(**f) for f in raw.get("failures", ())),
            realized_censoring=tuple(raw.get("realized_censoring", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)


def replication_seeds(master_seed: int, slot: int, replication: int) -> tuple[int, int]:
    """(data seed, split seed) as the two state words of SeedSequence([master, slot, replication]).

    ``slot`` is grid_index + 1, or 0 for a draw shared by every grid point.
    """
    words = np.random.SeedSequence([master_seed, slot, replication]).generate_state(2)
    return int(words[0]), int(words[1])


def _run_replication(
    scenario: ScenarioSpec, generator: GeneratorSpec, models: Sequence[ModelSpec], grid_index: int, replication: int
) -> tuple[float | None, dict[str, dict[str, float]], list[ReplicationFailure]]:
    value = scenario.grid[grid_index]
    # the features axis reuses one draw per replication so lower grid points remove columns of the same subjects
    data_index = -1 if scenario.axis is ScenarioAxis.FEATURES else grid_index
    data_seed, split_seed = replication_seeds(scenario.master_seed, data_index + 1, replication)
    try:
        dataset = generate(scenario.generator_at(generator, value, data_seed)).dataset
        if scenario.axis is ScenarioAxis.FEATURES:
            dataset = dataset.select_features(int(value))
        train, test = split(dataset, scenario.train_fraction, split_seed)
    except SurvivalError as error:
        return None, {}, [ReplicationFailure(value, replication, "*", f"{type(error).__name__}: {error}")]
    scores: dict[str, dict[str, float]] = {}
    failures: list[ReplicationFailure] = []
    for spec in models:
        try:
            model = spec.fit(train)
            scores[spec.name] = evaluate_predictor(model, test, scenario.metrics)
        except (SurvivalError, np.linalg.LinAlgError) as error:
            failures.append(ReplicationFailure(value, replication, spec.name, f"{type(error).__name__}: {error}"))
    return dataset.censoring_rate, scores, failures


def run_scenario(
    scenario: ScenarioSpec, generator: GeneratorSpec, models: Sequence[ModelSpec], n_jobs: int | None = None
) -> ScenarioResult:
    n_jobs = n_jobs or get_settings().workers
    jobs = [(g, r) for g in range(len(scenario.grid)) for r in range(scenario.replications)]
    outputs = Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_run_replication)(scenario, generator, models, g, r) for g, r in jobs
    )
    collected = list(track(outputs, total=len(jobs), description=f"{scenario.axis.value} sweep", transient=True))
    cells: list[ScenarioCell] = []
    failures: list[ReplicationFailure] = []
    censoring: list[float] = []
    for g, value in enumerate(scenario.grid):
        runs = [collected[i] for i, (gi, _) in enumerate(jobs) if gi == g]
        for rate, _, run_failures in runs:
            for failure in run_failures:
                logger.warning(
                    "replication %d at %s=%s failed for %s: %s",
                    failure.replication,
                    scenario.axis.value,
                    value,
                    failure.model,
                    failure.error,
                )
            failures.extend(run_failures)
        rates = [rate for rate, _, _ in runs if rate is not None]
        censoring.append(float(np.mean(rates)) if rates else float("nan"))
        for spec in models:
            for metric in scenario.metrics:
                values = np.array([s[spec.name][metric] for _, s, _ in runs if spec.name in s])
                cells.append(
                    ScenarioCell(
                        grid_value=value,
                        model=spec.name,
                        metric=metric.value,
                        mean=float(values.mean()) if values.size else float("nan"),
                        sd=float(values.std(ddof=1)) if values.size > 1 else 0.0,
                        count=int(values.size),
                    )
                )
    return ScenarioResult(
        scenario=scenario,
        generator=generator,
        models=tuple(spec.name for spec in models),
        cells=tuple(cells),
        failures=tuple(failures),
        realized_censoring=tuple(censoring),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """A scenario config file: one generator, one sweep and the models to compare."""

    generator: GeneratorSpec
    scenario: ScenarioSpec
    models: tuple[ModelSpec, ...]

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ScenarioConfig:
        unknown = sorted(set(raw) - {"generator", "scenario", "models"})
        if unknown:
            raise ConfigError(f"scenario config: unknown keys {unknown}")
        models = tuple(ModelSpec.from_dict(m) for m in raw.get("models", ()))
        if not models:
            raise ConfigError("scenario config lists no models")
        return cls(GeneratorSpec.from_dict(raw["generator"]), ScenarioSpec.from_dict(raw["scenario"]), models)

    @classmethod
    def from_file(cls, path: str | Path) -> ScenarioConfig:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as error:
            raise ConfigError(f"cannot read scenario config {path}: {error}") from error
        return cls.from_dict(raw)

    def run(self, n_jobs: int | None = None) -> ScenarioResult:
        return run_scenario(self.scenario, self.generator, self.models, n_jobs)

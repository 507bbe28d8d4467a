"""Data model for right-censored survival data and step-function survival curves."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from survensemble.errors import AllCensored, DimensionMismatch, NegativeTime, NonFiniteValue

RawRow = tuple[Sequence[float], float, bool | int]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Subject:
    covariates: np.ndarray
    observed_time: float
    event: bool


@dataclass(frozen=True)
class RiskScore:
    """Scalar mortality risk; higher means earlier expected failure. Only the ranking is meaningful."""

    value: float


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous step function t -> S(t|x) on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise DimensionMismatch(f"curve times {times.shape} and values {values.shape} must be aligned 1-d arrays")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise NonFiniteValue("curve contains non-finite entries")
        if times.size and times[0] < 0:
            raise NegativeTime(f"curve grid starts at {times[0]}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("curve grid must be strictly increasing")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("curve values must lie in [0, 1]")
        if np.any(np.diff(values) > 0):
            raise ValueError("curve values must be non-increasing")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))

    def __call__(self, t: float | np.ndarray) -> float | np.ndarray:
        return survival_at(self, t)


def step_values(times: np.ndarray, values: np.ndarray, t: float | np.ndarray, before: float = 1.0) -> np.ndarray:
    """Evaluate right-continuous step functions stored row-wise in ``values`` at ``t``.

    ``values`` may be 1-d (one function) or 2-d (one function per row, all on ``times``).
    Points before the first knot take ``before``; points past the last knot keep the last value.
    """
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(times, t, side="right") - 1
    values = np.asarray(values, dtype=float)
    padded = np.concatenate([np.full(values.shape[:-1] + (1,), before), values], axis=-1)
    return padded[..., idx + 1]


def survival_at(curve: SurvivalCurve, t: float | np.ndarray) -> float | np.ndarray:
    result = step_values(curve.times, curve.values, t)
    return float(result) if np.ndim(result) == 0 else result


def restricted_mean(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Integral of the step curve(s) over [0, last grid time]; 1 before the first knot."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros(np.shape(values)[:-1])
    widths = np.diff(np.concatenate([[0.0], times]))
    heights = np.concatenate([np.ones(np.shape(values)[:-1] + (1,)), np.asarray(values)[..., :-1]], axis=-1)
    return (heights * widths).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class Dataset:
    covariates: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        covariates = np.asarray(self.covariates, dtype=float)
        times = np.asarray(self.times, dtype=float)
        events = np.asarray(self.events).astype(bool)
        if covariates.ndim != 2:
            raise DimensionMismatch(f"covariates must be 2-d, got shape {covariates.shape}")
        n = times.shape[0]
        if n == 0:
            raise ValueError("dataset must contain at least one subject")
        if covariates.shape[0] != n or events.shape != (n,):
            raise DimensionMismatch(
                f"covariates {covariates.shape}, times {times.shape} and events {events.shape} disagree on n"
            )
        if not np.all(np.isfinite(times)):
            raise NonFiniteValue(f"row {int(np.flatnonzero(~np.isfinite(times))[0])}: observed_time is not finite")
        if np.any(times < 0):
            raise NegativeTime(f"row {int(np.flatnonzero(times < 0)[0])}: observed_time is negative")
        if not np.all(np.isfinite(covariates)):
            row, col = np.argwhere(~np.isfinite(covariates))[0]
            raise NonFiniteValue(f"row {row}: covariates[{col}] is not finite")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(covariates.shape[1]))
        if len(names) != covariates.shape[1]:
            raise DimensionMismatch(f"{len(names)} feature names for {covariates.shape[1]} covariates")
        object.__setattr__(self, "covariates", _frozen(covariates))
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "events", _frozen(events))
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def event_count(self) -> int:
        return int(self.events.sum())

    @property
    def censoring_rate(self) -> float:
        return 1.0 - self.event_count / len(self)

    @property
    def subjects(self) -> Iterator[Subject]:
        for x, y, delta in zip(self.covariates, self.times, self.events):
            yield Subject(covariates=x, observed_time=float(y), event=bool(delta))

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        indices = np.asarray(indices)
        return Dataset(self.covariates[indices], self.times[indices], self.events[indices], self.feature_names)

    def select_features(self, k: int) -> Dataset:
        return Dataset(self.covariates[:, :k], self.times, self.events, self.feature_names[:k])

    def with_covariates(self, covariates: np.ndarray) -> Dataset:
        return Dataset(covariates, self.times, self.events, self.feature_names)

    def require_events(self) -> None:
        if not self.events.any():
            raise AllCensored("every subject is censored; at least one observed event is required")


def risk_set(dataset: Dataset, t: float) -> np.ndarray:
    """Indices of subjects still at risk after ``t`` (observed time strictly greater than t)."""
    return np.flatnonzero(dataset.times > t)


def validate_dataset(rows: Iterable[RawRow], feature_names: Sequence[str] | None = None) -> Dataset:
    covariates: list[np.ndarray] = []
    times: list[float] = []
    events: list[bool] = []
    width: int | None = None
    for i, (x, y, delta) in enumerate(rows):
        x = np.asarray(x, dtype=float).ravel()
        if width is None:
            width = x.size
        elif x.size != width:
            raise DimensionMismatch(f"row {i}: covariates has {x.size} entries, expected {width}")
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise NonFiniteValue(f"row {i}: covariates[{bad[0]}] is not finite")
        y = float(y)
        if not np.isfinite(y):
            raise NonFiniteValue(f"row {i}: observed_time is not finite")
        if y < 0:
            raise NegativeTime(f"row {i}: observed_time is {y}")
        covariates.append(x)
        times.append(y)
        events.append(bool(delta))
    if width is None:
        raise ValueError("no rows to validate")
    dataset = Dataset(
        np.vstack(covariates) if width else np.empty((len(times), 0)),
        np.asarray(times),
        np.asarray(events),
        tuple(feature_names) if feature_names is not None else (),
    )
    dataset.require_events()
    return dataset


def event_grid(times: np.ndarray, events: np.ndarray) -> np.ndarray:
    return np.unique(np.asarray(times)[np.asarray(events, dtype=bool)])


def counts_at(times: np.ndarray, events: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Event counts d_k and at-risk counts n_k (y >= t_k) at each grid time."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    ordered = np.sort(times)
    at_risk = times.size - np.searchsorted(ordered, grid, side="left")
    event_times = np.sort(times[events])
    deaths = np.searchsorted(event_times, grid, side="right") - np.searchsorted(event_times, grid, side="left")
    return deaths.astype(float), at_risk.astype(float)


def nelson_aalen_increments(
    times: np.ndarray, events: np.ndarray, grid: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    grid = event_grid(times, events) if grid is None else np.asarray(grid, dtype=float)
    deaths, at_risk = counts_at(times, events, grid)
    increments = np.divide(deaths, at_risk, out=np.zeros_like(deaths), where=at_risk > 0)
    return grid, increments


def nelson_aalen(times: np.ndarray, events: np.ndarray, grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nelson-Aalen cumulative hazard on ``grid`` (default: the unique event times)."""
    grid, increments = nelson_aalen_increments(times, events, grid)
    return grid, np.cumsum(increments)


def kaplan_meier(times: np.ndarray, events: np.ndarray) -> SurvivalCurve:
    """Product-limit estimator of the survival of ``events`` on its unique event times."""
    grid = event_grid(times, events)
    deaths, at_risk = counts_at(times, events, grid)
    factors = 1.0 - deaths / at_risk
    values = np.clip(np.cumprod(factors), 0.0, 1.0)
    return SurvivalCurve(grid, np.minimum.accumulate(values) if values.size else values)

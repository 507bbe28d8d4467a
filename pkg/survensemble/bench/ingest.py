"""Load delimited survival tables into Datasets: one-hot categoricals, drop incomplete rows, standardize."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from survensemble.core import Dataset
from survensemble.errors import ConfigError, IoFailure, MissingColumn, ParseFailure

logger = logging.getLogger(__name__)

# a numeric column losing more than this share of its values to coercion is treated as undeclared text
COERCION_LIMIT = 0.5


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    path: Path
    time_column: str
    event_column: str
    categorical_columns: tuple[str, ...] = ()
    drop_columns: tuple[str, ...] = ()
    event_values: tuple[Any, ...] | None = None
    separator: str = ","

    def __post_init__(self) -> None:
        if self.time_column == self.event_column:
            raise ConfigError(f"{self.name}: time_column and event_column must differ")
        clash = {self.time_column, self.event_column} & (set(self.categorical_columns) | set(self.drop_columns))
        if clash:
            raise ConfigError(f"{self.name}: columns {sorted(clash)} cannot be both outcome and covariate/dropped")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | None = None) -> DatasetManifest:
        unknown = sorted(set(raw) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"manifest: unknown keys {unknown}")
        path = Path(raw["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        event_values = raw.get("event_values")
        return cls(
            name=raw["name"],
            path=path,
            time_column=raw["time_column"],
            event_column=raw["event_column"],
            categorical_columns=tuple(raw.get("categorical_columns", ())),
            drop_columns=tuple(raw.get("drop_columns", ())),
            event_values=tuple(event_values) if event_values is not None else None,
            separator=raw.get("separator", ","),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> DatasetManifest:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as error:
            raise ConfigError(f"cannot read manifest {path}: {error}") from error
        return cls.from_dict(raw, base_dir=path.parent)


def _numeric(frame: pd.DataFrame, column: str) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    lost = values.isna() & frame[column].notna()
    if lost.mean() > COERCION_LIMIT:
        raise ParseFailure(f"column {column!r} is not numeric (row {int(np.flatnonzero(lost)[0])}); declare it categorical")
    return values


def ingest(manifest: DatasetManifest, full_data_scaling: bool = False) -> Dataset:
    """Read and encode ``manifest``; with ``full_data_scaling`` covariates are standardized on the full table."""
    try:
        frame = pd.read_csv(manifest.path, sep=manifest.separator, skipinitialspace=True)
    except OSError as error:
        raise IoFailure(f"cannot read {manifest.path}: {error}") from error
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise ParseFailure(f"{manifest.path}: {error}") from error
    required = [manifest.time_column, manifest.event_column, *manifest.categorical_columns, *manifest.drop_columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MissingColumn(f"{manifest.name}: columns {missing} not found in {manifest.path}")
    frame = frame.drop(columns=list(manifest.drop_columns))

    covariate_columns = [c for c in frame.columns if c not in (manifest.time_column, manifest.event_column)]
    numeric_columns = [c for c in covariate_columns if c not in manifest.categorical_columns]
    table = pd.DataFrame({c: _numeric(frame, c) for c in numeric_columns}, index=frame.index)
    table["__time"] = _numeric(frame, manifest.time_column)
    if manifest.event_values is not None:
        table["__event"] = frame[manifest.event_column].isin(manifest.event_values).where(
            frame[manifest.event_column].notna()
        )
    else:
        codes = _numeric(frame, manifest.event_column)
        table["__event"] = codes.ne(0).where(codes.notna())
    for column in manifest.categorical_columns:
        table[column] = frame[column]

    complete = table.dropna()
    dropped = len(table) - len(complete)
    if dropped:
        logger.warning("%s: dropped %d of %d rows with missing values", manifest.name, dropped, len(table))
    encoded = pd.get_dummies(
        complete.drop(columns=["__time", "__event"]),
        columns=list(manifest.categorical_columns),
        drop_first=True,
        dtype=float,
    )
    covariates = encoded.to_numpy(dtype=float)
    if full_data_scaling and covariates.size:
        covariates = StandardScaler().fit_transform(covariates)
    dataset = Dataset(
        covariates,
        complete["__time"].to_numpy(dtype=float),
        complete["__event"].to_numpy(dtype=bool),
        tuple(str(c) for c in encoded.columns),
    )
    dataset.require_events()
    logger.info(
        "%s: %d subjects, %d covariates, %.1f%% censored", manifest.name, dataset.n, dataset.d, 100 * dataset.censoring_rate
    )
    return dataset


@dataclass
class Standardizer:
    """Zero-mean unit-variance scaling with statistics taken from one split only."""

    scaler: StandardScaler = field(default_factory=StandardScaler)

    def fit(self, dataset: Dataset) -> Standardizer:
        if dataset.d:
            self.scaler.fit(dataset.covariates)
        return self

    def transform(self, dataset: Dataset) -> Dataset:
        if not dataset.d:
            return dataset
        return dataset.with_covariates(self.scaler.transform(dataset.covariates))

"""Write bench and scenario reports as JSON, flat CSV, or long-format tables for plotting."""

from __future__ import annotations

import json
import logging
from enum import StrEnum
from pathlib import Path

import pandas as pd

from survensemble.bench.protocol import BenchReport
from survensemble.errors import ConfigError, IoFailure
from survensemble.simulate import ScenarioResult

logger = logging.getLogger(__name__)

Report = BenchReport | ScenarioResult


class ReportFormat(StrEnum):
    JSON = "json"
    CSV = "csv"
    PLOTDATA = "plotdata"


def load_report(path: str | Path) -> Report:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as error:
        raise IoFailure(f"cannot read report {path}: {error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path} is not a JSON report: {error}") from error
    match raw.get("report_kind"):
        case "bench":
            return BenchReport.from_dict(raw)
        case "scenario":
            return ScenarioResult.from_dict(raw)
        case other:
            raise ConfigError(f"{path}: unknown report_kind {other!r}")


def bench_rows(report: BenchReport) -> pd.DataFrame:
    """One row per scored cell followed by one row per aggregate."""
    rows = [{"row_type": "cell", **vars(c), "sd": None, "count": 1} for c in report.cells]
    rows += [
        {
            "row_type": a.scope,
            "dataset": a.dataset,
            "model": a.model,
            "split": None,
            "metric": a.metric,
            "value": a.mean,
            "sd": a.sd,
            "count": a.count,
        }
        for a in report.aggregates
    ]
    return pd.DataFrame(rows, columns=["row_type", "dataset", "model", "split", "metric", "value", "sd", "count"])


def sweep_rows(result: ScenarioResult) -> pd.DataFrame:
    """One row per (grid point, model, metric)."""
    frame = pd.DataFrame([vars(c) for c in result.cells], columns=["grid_value", "model", "metric", "mean", "sd", "count"])
    frame.insert(0, "axis", result.scenario.axis.value)
    return frame


def trace_rows(report: BenchReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"dataset": e.dataset, "split": e.split, "fold": fold, "iteration": i, "objective": v}
            for e in report.ensembles
            for fold, trace in enumerate(e.traces)
            for i, v in trace
        ],
        columns=["dataset", "split", "fold", "iteration", "objective"],
    )


def weight_rows(report: BenchReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"dataset": e.dataset, "split": e.split, "member": m, "weight": w}
            for e in report.ensembles
            for m, w in zip(e.members, e.weights)
        ],
        columns=["dataset", "split", "member", "weight"],
    )


def _tables(report: Report, fmt: ReportFormat) -> dict[str, pd.DataFrame]:
    if isinstance(report, ScenarioResult):
        if fmt is ReportFormat.CSV:
            return {"scenario": sweep_rows(report)}
        return {"sweep": sweep_rows(report)}
    if fmt is ReportFormat.CSV:
        return {"bench": bench_rows(report)}
    rows = bench_rows(report)
    return {
        "boxplot": rows[rows["row_type"] == "cell"].drop(columns=["row_type", "sd", "count"]),
        "overall": rows[rows["row_type"].isin(["overall", "ranked"])].drop(columns=["dataset", "split"]),
        "ensemble_trace": trace_rows(report),
        "ensemble_weights": weight_rows(report),
    }


def emit_report(report: Report, fmt: ReportFormat | str, out_dir: str | Path, stem: str | None = None) -> list[Path]:
    """Write ``report`` under ``out_dir`` and return the paths written."""
    fmt = ReportFormat(fmt)
    out_dir = Path(out_dir)
    stem = stem or ("bench" if isinstance(report, BenchReport) else "scenario")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt is ReportFormat.JSON:
            path = out_dir / f"{stem}.json"
            path.write_text(report.to_json())
            paths = [path]
        else:
            paths = []
            for name, table in _tables(report, fmt).items():
                path = out_dir / (f"{stem}.csv" if fmt is ReportFormat.CSV else f"{stem}_{name}.csv")
                table.to_csv(path, index=False)
                paths.append(path)
    except OSError as error:
        raise IoFailure(f"cannot write {fmt.value} report to {out_dir}: {error}") from error
    for path in paths:
        logger.info("wrote %s", path)
    return paths

"""``bench`` command line: run a benchmark, run a simulation sweep, or re-emit a stored report."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

import rich
from rich.table import Table

from survensemble.bench.protocol import BenchConfig, BenchReport, run_benchmark
from survensemble.bench.report import ReportFormat, emit_report, load_report
from survensemble.config import configure_logging, get_settings
from survensemble.errors import ConfigError, IoFailure, SurvivalError
from survensemble.simulate import ScenarioConfig, ScenarioResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CELLS = 1
EXIT_BAD_INPUT = 2


def _format(value: float) -> str:
    return "-" if math.isnan(value) else f"{value:.4f}"


def bench_table(report: BenchReport) -> Table:
    metrics = report.config["metrics"]
    table = Table(title="Overall mean across datasets")
    table.add_column("Model")
    for metric in metrics:
        table.add_column(metric, justify="right")
    for scope in ("overall", "ranked"):
        for model in dict.fromkeys(a.model for a in report.aggregates if a.scope == scope):
            table.add_row(model, *(_format(report.aggregate(scope, model, m).mean) for m in metrics))
    return table


def scenario_table(result: ScenarioResult) -> Table:
    table = Table(title=f"{result.scenario.axis.value} sweep ({result.generator.kind.value})")
    table.add_column(result.scenario.axis.value, justify="right")
    for model in result.models:
        for metric in result.scenario.metrics:
            table.add_column(f"{model} {metric.value}", justify="right")
    for value in result.scenario.grid:
        table.add_row(
            str(value),
            *(_format(result.cell(value, m, k.value).mean) for m in result.models for k in result.scenario.metrics),
        )
    return table


def _emit(report: BenchReport | ScenarioResult, formats: Sequence[str], out_dir: Path, stem: str) -> None:
    for fmt in formats:
        for path in emit_report(report, fmt, out_dir, stem):
            rich.print(f"[green]wrote[/green] {path}")


def _failures_exit(count: int, total: int) -> int:
    if count:
        rich.print(f"[red]{count} of {total} cells failed[/red]; see the report's failures list")
        return EXIT_FAILED_CELLS
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = BenchConfig.from_file(args.config)
    report = run_benchmark(config, n_jobs=args.workers)
    rich.print(bench_table(report))
    _emit(report, args.format, args.out, Path(args.config).stem)
    return _failures_exit(len(report.failures), len(report.cells) + len(report.failures))


def cmd_simulate(args: argparse.Namespace) -> int:
    config = ScenarioConfig.from_file(args.config)
    result = config.run(n_jobs=args.workers)
    rich.print(scenario_table(result))
    _emit(result, args.format, args.out, Path(args.config).stem)
    total = len(result.scenario.grid) * result.scenario.replications * len(result.models)
    return _failures_exit(len(result.failures), total)


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    rich.print(bench_table(report) if isinstance(report, BenchReport) else scenario_table(report))
    _emit(report, args.format, args.out, Path(args.report).stem)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    parser.add_argument(
        "--workers", type=int, default=settings.workers, help="parallel jobs, -1 for all cores (SURVENSEMBLE_WORKERS)"
    )
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (SURVENSEMBLE_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)
    formats = [f.value for f in ReportFormat]

    run = commands.add_parser("run", help="run a benchmark config")
    run.add_argument("config", type=Path)
    run.set_defaults(handler=cmd_run, default_format=["json"])

    simulate = commands.add_parser("simulate", help="run a simulation scenario config")
    simulate.add_argument("config", type=Path)
    simulate.set_defaults(handler=cmd_simulate, default_format=["json"])

    report = commands.add_parser("report", help="re-emit a stored bench or scenario report")
    report.add_argument("report", type=Path)
    report.set_defaults(handler=cmd_report, default_format=["csv"])

    for command in (run, simulate, report):
        command.add_argument("--format", action="append", choices=formats, help="output format, repeatable")
        command.add_argument("--out", type=Path, default=settings.output_dir, help="output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except ConfigError as error:
        rich.print(f"[red]configuration error:[/red] {error}")
        return EXIT_BAD_INPUT
    args = parser.parse_args(argv)
    args.format = args.format or args.default_format
    configure_logging(args.log_level.upper())
    try:
        return args.handler(args)
    except (ConfigError, IoFailure) as error:
        logger.error("%s: %s", type(error).__name__, error)
        return EXIT_BAD_INPUT
    except SurvivalError as error:
        # dataset-level problems (unreadable columns, no events) stop the run before any cell is scored
        logger.error("%s: %s", type(error).__name__, error)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())

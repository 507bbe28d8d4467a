import json
import logging
import warnings

import numpy as np
import pandas as pd
import pytest
from sklearn.model_selection import StratifiedKFold

from survensemble.bench.ingest import DatasetManifest, Standardizer, ingest
from survensemble.bench.protocol import (
    ENSEMBLE,
    BenchCell,
    BenchConfig,
    BenchReport,
    DatasetSource,
    aggregate_cells,
    run_benchmark,
    split_seeds,
    thin_trace,
)
from survensemble.bench.report import ReportFormat, bench_rows, emit_report, load_report, sweep_rows
from survensemble.bench.search import SearchSpace, cross_validated_score, random_search
from survensemble.bench.splits import split, split_indices
from survensemble.errors import (
    AllCensored,
    ConfigError,
    IoFailure,
    MissingColumn,
    ParseFailure,
    TooSmall,
)
from survensemble.models import ModelSpec
from survensemble.scoring import ScoreKind
from survensemble.simulate import GeneratorSpec, ScenarioAxis, ScenarioSpec, run_scenario
from tests.conftest import make_dataset

# splits


@pytest.fixture
def forty_events():
    rng = np.random.default_rng(0)
    events = np.zeros(100, dtype=bool)
    events[rng.choice(100, 40, replace=False)] = True
    return make_dataset(rng.exponential(size=100), events, rng.normal(size=(100, 2)))


def test_split_keeps_the_event_share(forty_events):
    train, validation = split(forty_events, 0.8, seed=1)
    assert (train.n, validation.n) == (80, 20)
    assert abs(train.event_count - 32) <= 2
    assert abs(train.censoring_rate - validation.censoring_rate) <= 0.05


def test_split_is_a_reproducible_partition(forty_events):
    train, validation = split_indices(forty_events, 0.8, seed=3)
    again = split_indices(forty_events, 0.8, seed=3)
    np.testing.assert_array_equal(train, again[0])
    assert not set(train) & set(validation)
    assert sorted(set(train) | set(validation)) == list(range(100))
    assert not np.array_equal(split_indices(forty_events, 0.8, seed=4)[0], train)


def test_too_few_events_to_split():
    events = np.zeros(10, dtype=bool)
    events[:2] = True
    with pytest.raises(TooSmall):
        split(make_dataset(np.arange(1.0, 11.0), events), 0.8, seed=0)


def test_split_fraction_must_be_proper(forty_events):
    with pytest.raises(ConfigError):
        split(forty_events, 1.5, seed=0)


# ingest

TABLE = """time,status,age,stage,id
5,1,60,a,1
8,0,55,b,2
3,1,,c,3
10,1,70,a,4
12,0,65,c,5
7,1,50,b,6
"""


def manifest_for(tmp_path, text=TABLE, **overrides):
    path = tmp_path / "table.csv"
    path.write_text(text)
    raw = {
        "name": "toy",
        "path": "table.csv",
        "time_column": "time",
        "event_column": "status",
        "categorical_columns": ["stage"],
        "drop_columns": ["id"],
        **overrides,
    }
    (tmp_path / "toy.json").write_text(json.dumps(raw))
    return DatasetManifest.from_file(tmp_path / "toy.json")


def test_ingest_encodes_and_drops_incomplete_rows(tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="survensemble.bench.ingest"):
        dataset = ingest(manifest_for(tmp_path))
    assert dataset.n == 5
    assert dataset.feature_names == ("age", "stage_b", "stage_c")
    assert dataset.events.tolist() == [True, False, True, False, True]
    np.testing.assert_array_equal(dataset.covariates[:, 1:], [[0, 0], [1, 0], [0, 0], [0, 1], [1, 0]])
    assert "dropped 1 of 6 rows" in caplog.text


def test_ingest_maps_event_labels(tmp_path):
    text = TABLE.replace(",1,", ",Yes,").replace(",0,", ",No,")
    dataset = ingest(manifest_for(tmp_path, text, event_values=["Yes"]))
    assert dataset.event_count == 3


def test_ingest_can_standardize_on_the_full_table(tmp_path):
    dataset = ingest(manifest_for(tmp_path), full_data_scaling=True)
    np.testing.assert_allclose(dataset.covariates.mean(axis=0), 0.0, atol=1e-12)


def test_ingest_missing_column(tmp_path):
    with pytest.raises(MissingColumn):
        ingest(manifest_for(tmp_path, time_column="duration"))


def test_ingest_undeclared_text_column(tmp_path):
    with pytest.raises(ParseFailure, match="declare it categorical"):
        ingest(manifest_for(tmp_path, categorical_columns=[]))


def test_ingest_all_censored(tmp_path):
    text = TABLE.replace(",1,", ",0,")
    with pytest.raises(AllCensored):
        ingest(manifest_for(tmp_path, text))


def test_ingest_unreadable_file(tmp_path):
    manifest = manifest_for(tmp_path)
    (tmp_path / "table.csv").unlink()
    with pytest.raises(IoFailure):
        ingest(manifest)


def test_manifest_rejects_outcome_as_covariate(tmp_path):
    with pytest.raises(ConfigError):
        manifest_for(tmp_path, categorical_columns=["status"])


def test_standardizer_uses_training_statistics(forty_events):
    train, validation = split(forty_events, 0.8, seed=0)
    scaler = Standardizer().fit(train)
    np.testing.assert_allclose(scaler.transform(train).covariates.mean(axis=0), 0.0, atol=1e-12)
    expected = (validation.covariates - train.covariates.mean(axis=0)) / train.covariates.std(axis=0)
    np.testing.assert_allclose(scaler.transform(validation).covariates, expected)


# search


def test_single_draw_budget(cox_data):
    space = SearchSpace(budget=1)
    result = random_search("cox", space, cox_data, seed=2)
    assert len(result.candidates) == 1
    assert result.best_config == result.candidates[0].config
    assert random_search("cox", space, cox_data, seed=2).best_config == result.best_config


def test_failed_configs_score_worst(cox_data, caplog):
    space = SearchSpace.from_dict({"budget": 2, "spaces": {"cox": {"max_iter": [1, 100]}}})
    with caplog.at_level(logging.WARNING, logger="survensemble.bench.search"):
        result = random_search("cox", space, cox_data, folds=3)
    assert result.best_config["max_iter"] == 100
    errors = [c.error for c in result.candidates if c.error]
    assert len(errors) == 1 and errors[0].startswith("NonConvergence")
    assert "failed" in caplog.text


def test_candidate_scores_are_cross_validated(cox_data):
    space = SearchSpace.from_dict({"budget": 3, "spaces": {"aalen": {"penalizer": [0.0, 1.0, 10.0]}}})
    result = random_search("aalen", space, cox_data, metric="ibs", folds=3, seed=4)
    folds = StratifiedKFold(n_splits=3, shuffle=True, random_state=4)
    for candidate in result.candidates:
        assert candidate.score == pytest.approx(cross_validated_score("aalen", candidate.config, cox_data, ScoreKind.IBS, folds))
    assert result.best_score == min(c.score for c in result.candidates)


@pytest.mark.parametrize(
    "raw",
    [
        {"budget": 0},
        {"spaces": {"cox": {"ridge_alpha": []}}},
        {"spaces": {"cox": {"ridge_alpha": {"distribution": "beta"}}}},
        {"spaces": {"svm": {"c": [1]}}},
        {"rounds": 3},
    ],
)
def test_invalid_search_spaces(raw):
    with pytest.raises(ConfigError):
        SearchSpace.from_dict(raw)


# protocol


def test_trace_thinning_keeps_the_ends():
    trace = list(np.linspace(1.0, 0.0, 10_000))
    thinned = thin_trace(trace)
    assert len(thinned) <= 64
    assert thinned[0] == (0, 1.0)
    assert thinned[-1][0] == 9999
    short = thin_trace([3.0, 2.0, 1.0, 0.5, 0.25])
    assert short[0][0] == 0 and short[-1][0] == 4
    assert thin_trace([]) == ()


def test_split_seeds_depend_on_every_coordinate():
    seeds = {split_seeds(0, d, s) for d in range(3) for s in range(5)}
    assert len(seeds) == 15
    assert split_seeds(7, 1, 2) == split_seeds(7, 1, 2)


def test_aggregates_by_hand():
    values = {
        ("A", "m1"): [0.6, 0.8],
        ("A", "m2"): [0.6],
        ("A", "m3"): [0.5],
        ("A", ENSEMBLE): [0.75],
        ("B", "m1"): [0.5],
        ("B", "m2"): [0.9],
        ("B", "m3"): [0.7],
        ("B", ENSEMBLE): [0.85],
    }
    cells = [
        BenchCell(d, m, i, "concordance", v) for (d, m), vs in values.items() for i, v in enumerate(vs)
    ]
    rows = aggregate_cells(cells, ["A", "B"], ["m1", "m2", "m3", ENSEMBLE], [ScoreKind.CONCORDANCE])
    report = BenchReport({}, (), tuple(cells), (), tuple(rows), (), {})
    assert report.aggregate("dataset", "m1", "concordance", "A").mean == pytest.approx(0.7)
    overall = report.aggregate("overall", "m1", "concordance")
    assert overall.mean == pytest.approx(0.6)
    assert overall.sd == pytest.approx(np.std([0.7, 0.5], ddof=1))
    assert report.aggregate("ranked", "First", "concordance").mean == pytest.approx(0.8)
    assert report.aggregate("ranked", "Second", "concordance").mean == pytest.approx(0.65)
    assert report.aggregate("ranked", "Third", "concordance").mean == pytest.approx(0.5)
    assert report.aggregate("overall", ENSEMBLE, "concordance").mean == pytest.approx(0.8)


def test_ranked_ibs_prefers_lower():
    cells = [BenchCell("A", m, 0, "ibs", v) for m, v in (("m1", 0.2), ("m2", 0.1), ("m3", 0.3))]
    rows = aggregate_cells(cells, ["A"], ["m1", "m2", "m3"], [ScoreKind.IBS])
    first = next(r for r in rows if r.scope == "ranked" and r.model == "First")
    assert first.mean == pytest.approx(0.1)


def generator_entry(name, kind):
    return {"name": name, "generator": {"kind": kind, "n": 150, "d": 3, "censor_target": 0.3}}


@pytest.fixture(scope="module")
def bench_config():
    return BenchConfig.from_dict(
        {
            "datasets": [generator_entry("toy_cox", "cox_style"), generator_entry("toy_aft", "aft_style")],
            "models": ["cox", "weibull_aft", "aalen", "cox*"],
            "n_splits": 2,
            "search": {"budget": 2, "folds": 2},
            "ensemble": {"folds": 2, "max_iter": 200},
        }
    )


@pytest.fixture(scope="module")
def bench_report(bench_config):
    return run_benchmark(bench_config, n_jobs=1)


def test_config_defaults(bench_config):
    assert bench_config.variant("cox*").search
    assert bench_config.variant("cox*").spec.kind == "cox"
    assert bench_config.ensemble.members == ("cox", "weibull_aft", "aalen")
    assert bench_config.metrics == (ScoreKind.CONCORDANCE, ScoreKind.IBS)
    assert BenchConfig.from_dict(bench_config.to_dict()).to_dict() == bench_config.to_dict()


def test_benchmark_scores_every_cell(bench_report):
    assert bench_report.failures == ()
    assert len(bench_report.cells) == 2 * 2 * 5 * 2
    assert {c.model for c in bench_report.cells} == {"cox", "weibull_aft", "aalen", "cox*", ENSEMBLE}
    assert len(bench_report.ensembles) == 4
    for record in bench_report.ensembles:
        assert sum(record.weights) == pytest.approx(1.0)
        assert len(record.fold_weights) == len(record.traces) == 2
        assert all(0 < len(trace) <= 64 for trace in record.traces)
    assert bench_report.aggregate("overall", ENSEMBLE, "ibs").count == 2
    assert bench_report.aggregate("ranked", "Third", "concordance").count == 2
    assert bench_report.metadata["standardization"] == "train split"


def test_benchmark_is_reproducible(bench_config, bench_report):
    assert run_benchmark(bench_config, n_jobs=1).to_json() == bench_report.to_json()


def test_report_json_round_trip(bench_report, tmp_path):
    (path,) = emit_report(bench_report, "json", tmp_path, stem="toy")
    assert path.name == "toy.json"
    assert load_report(path) == bench_report


def test_report_csv_has_a_row_per_cell_and_aggregate(bench_report, tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("error", FutureWarning)
        (path,) = emit_report(bench_report, ReportFormat.CSV, tmp_path)
    frame = pd.read_csv(path)
    assert len(frame) == len(bench_report.cells) + len(bench_report.aggregates)
    rows = bench_rows(bench_report)
    assert list(frame.columns) == list(rows.columns)
    assert rows["split"].isna().sum() == len(bench_report.aggregates)


def test_report_plotdata_files(bench_report, tmp_path):
    paths = emit_report(bench_report, "plotdata", tmp_path, stem="toy")
    assert sorted(p.name for p in paths) == [
        "toy_boxplot.csv",
        "toy_ensemble_trace.csv",
        "toy_ensemble_weights.csv",
        "toy_overall.csv",
    ]
    weights = pd.read_csv(tmp_path / "toy_ensemble_weights.csv")
    assert len(weights) == 4 * 3
    np.testing.assert_allclose(weights.groupby(["dataset", "split"])["weight"].sum(), 1.0)


def test_scenario_plotdata(tmp_path):
    result = run_scenario(
        ScenarioSpec(ScenarioAxis.SAMPLES, (80, 120), replications=1),
        GeneratorSpec("cox_style", d=2, censor_target=0.3),
        (ModelSpec.from_dict("cox"),),
        n_jobs=1,
    )
    (path,) = emit_report(result, "plotdata", tmp_path, stem="sweep")
    assert path.name == "sweep_sweep.csv"
    assert len(pd.read_csv(path)) == len(sweep_rows(result)) == 2 * 2
    (json_path,) = emit_report(result, "json", tmp_path, stem="sweep")
    assert load_report(json_path).to_dict() == result.to_dict()


def test_load_report_errors(tmp_path):
    with pytest.raises(IoFailure):
        load_report(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_report(tmp_path / "bad.json")
    (tmp_path / "other.json").write_text(json.dumps({"report_kind": "audit"}))
    with pytest.raises(ConfigError):
        load_report(tmp_path / "other.json")


@pytest.mark.parametrize(
    "raw",
    [
        {"datasets": ["pbc"], "models": ["cox"], "seeds": 3},
        {"datasets": ["pbc"], "models": ["cox", "cox"]},
        {"datasets": ["pbc"], "models": ["ensemble"]},
        {"datasets": ["pbc"], "models": ["cox", "aalen"], "metrics": ["brier"]},
        {"datasets": ["pbc"], "models": ["cox", "aalen"], "metrics": ["auc"]},
        {"datasets": ["pbc"], "models": ["cox"], "ensemble": {}},
        {"datasets": ["pbc"], "models": ["cox", "aalen"], "ensemble": {"members": ["cox", "rsf"]}},
        {"datasets": [], "models": ["cox"]},
        {"datasets": [{"standin": "metabric"}], "models": ["cox"]},
        {"datasets": [{"standin": "pbc", "generator": {"kind": "cox_style"}}], "models": ["cox"]},
    ],
)
def test_invalid_bench_configs(raw):
    with pytest.raises(ConfigError):
        BenchConfig.from_dict(raw)


def test_single_model_has_no_ensemble():
    config = BenchConfig.from_dict({"datasets": ["pbc"], "models": ["cox", "cox*"]})
    assert config.ensemble is None


def test_standins_match_the_reference_tables():
    pbc = DatasetSource.from_entry("pbc").load()
    assert (pbc.n, pbc.d) == (276, 17)
    assert pbc.censoring_rate == pytest.approx(0.598, abs=0.1)
    tlcm = DatasetSource.from_entry({"standin": "tlcm", "seed": 1}).load()
    assert (tlcm.n, tlcm.d) == (7043, 19)
    np.testing.assert_array_equal(tlcm.times, np.ceil(tlcm.times))
    assert tlcm.times.min() >= 1


def test_manifest_dataset_entry(tmp_path):
    manifest_for(tmp_path)
    source = DatasetSource.from_entry({"manifest": "toy.json"}, base_dir=tmp_path)
    assert source.name == "toy"
    assert source.load().n == 5

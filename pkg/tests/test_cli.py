import csv
import math
import time

import pytest

from app.core.exceptions import EXIT_INPUT_ERROR, EXIT_OK, EXIT_REFUSED
from app.main import main
from app.models.reports import EstimationReport
from app.models.scenario import ScenarioConfig
from app.services.storage import read_json
from app.utils.helpers import aggregate_reports
from tests.helpers.builders import crash_formula, tuned_gap_pem

pytestmark = pytest.mark.integration

SMALL_RUN = "[scenario]\npreset = small\n[run]\nsamples = 200\n"


@pytest.fixture
def small_run(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL_RUN)
    return path


def _report(mu_hat: float, seed: int, stalled: bool = False) -> EstimationReport:
    return EstimationReport(
        method="adaptive",
        metric="classical",
        seed=seed,
        mu_hat=mu_hat,
        standard_error=0.0,
        failures=1,
        total=10,
        failure_fraction=0.1,
        stalled=stalled,
    )


def test_single_seed_aggregate_has_zero_error():
    aggregate = aggregate_reports([_report(1e-4, 0)])
    assert aggregate.mean_mu_hat == 1e-4
    assert aggregate.standard_error == 0.0
    assert aggregate.seeds == [0]


def test_aggregate_standard_error_of_the_mean():
    aggregate = aggregate_reports([_report(1e-4, 0), _report(3e-4, 1, stalled=True)])
    assert aggregate.mean_mu_hat == pytest.approx(2e-4)
    assert aggregate.standard_error == pytest.approx(1e-4)
    assert aggregate.stalled_runs == 1


def test_mc_estimate_writes_reports(tmp_path, small_run):
    out = tmp_path / "results"
    argv = ["estimate", str(small_run), "--method", "mc", "--seed", "0", "--seed", "1"]
    assert main([*argv, "--out", str(out)]) == EXIT_OK

    schema = read_json(out / "report.schema.json")
    assert schema == EstimationReport.model_json_schema(mode="serialization")
    for seed in (0, 1):
        report = read_json(out / f"seed_{seed}" / "report.json")
        EstimationReport.model_validate(report)
        assert set(report) <= set(schema["properties"])
        assert set(schema["required"]) <= set(report)
        assert report["method"] == "mc"
        assert report["seed"] == seed
        assert report["total"] == 200

    aggregate = read_json(out / "aggregate.json")
    assert aggregate["seeds"] == [0, 1]
    # horizon 12 is inside the enumeration cap, so the exact value is attached
    oracle = read_json(out / "oracle.json")
    assert aggregate["oracle_mu"] == oracle["mu"]
    assert oracle["n_total"] == 2**11


def test_estimate_files_are_identical_across_reruns(tmp_path, small_run):
    for name in ("first", "second"):
        argv = ["estimate", str(small_run), "--method", "naive-flat"]
        assert main([*argv, "--out", str(tmp_path / name)]) == EXIT_OK
    first = (tmp_path / "first" / "seed_0" / "report.json").read_text()
    second = (tmp_path / "second" / "seed_0" / "report.json").read_text()
    assert first == second


def test_dumped_traces_can_be_ranked(tmp_path, small_run):
    out = tmp_path / "results"
    argv = ["estimate", str(small_run), "--method", "mc", "--dump-traces"]
    assert main([*argv, "--out", str(out)]) == EXIT_OK
    traces = out / "seed_0" / "traces"
    assert len(list(traces.glob("trace_*.csv"))) == 200

    ranking = tmp_path / "ranking.csv"
    code = main(["rank", str(small_run), str(traces), "--out", str(ranking)])
    assert code == EXIT_OK
    with ranking.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    values = [float(row["robustness"]) for row in rows]
    assert values == sorted(values)


def test_rank_skips_unreadable_and_incomplete_traces(tmp_path, small_run):
    out = tmp_path / "results"
    argv = ["estimate", str(small_run), "--method", "mc", "--samples", "3"]
    assert main([*argv, "--dump-traces", "--out", str(out)]) == EXIT_OK
    traces = out / "seed_0" / "traces"
    (traces / "binary.csv").write_bytes(b"\x89PNG\r\n\x1a\n\xff\xfe\x00")
    (traces / "no_gap.csv").write_text("step,time_s,ego_speed_mps\n0,0.0,19.4\n")
    (traces / "short.csv").write_text("step,time_s,dist_m\n0,0.0,10.2\n1,0.3,10.2\n")

    ranking = tmp_path / "ranking.csv"
    code = main(["rank", str(small_run), str(traces), "--out", str(ranking)])
    assert code == EXIT_OK
    with ranking.open() as fh:
        names = {row["file"] for row in csv.DictReader(fh)}
    assert names == {"trace_0000.csv", "trace_0001.csv", "trace_0002.csv"}


def test_rank_on_empty_directory_writes_header_only(tmp_path):
    traces = tmp_path / "traces"
    traces.mkdir()
    ranking = tmp_path / "ranking.csv"
    assert main(["rank", str(traces), "--out", str(ranking)]) == EXIT_OK
    assert ranking.read_text() == "file,robustness\n"


def test_small_adaptive_run(tmp_path):
    run = tmp_path / "run.ini"
    run.write_text(
        "[scenario]\npreset = small\n"
        "[cem]\nstages = 2\nsamples_per_stage = 20\neval_samples = 20\n"
        "pretrain_samples = 10\noptimizer_epochs = 20\n"
        "[pem]\nbias = 2.0\n"
    )
    out = tmp_path / "results"
    assert main(["estimate", str(run), "--out", str(out)]) == EXIT_OK
    report = read_json(out / "seed_0" / "report.json")
    assert report["method"] == "adaptive"
    assert (out / "seed_0" / "diagnostics.jsonl").is_file()
    assert (out / "seed_0" / "proposal_curve.csv").is_file()
    assert (out / "seed_0" / "proposal_curve_stage_2.csv").is_file()


def test_oracle_writes_exact_probability(tmp_path, small_run):
    out = tmp_path / "oracle"
    code = main(["oracle", str(small_run), "--out", str(out), "--table"])
    assert code == EXIT_OK
    result = read_json(out / "oracle.json")
    assert 0.0 < result["mu"] < 1.0
    assert result["log10_mu"] == pytest.approx(math.log10(result["mu"]))
    lines = (out / "oracle_table.csv").read_text().splitlines()
    assert len(lines) == 2**11 + 1


def test_oracle_refuses_long_horizon(tmp_path):
    run = tmp_path / "run.ini"
    run.write_text("[scenario]\npreset = small\nhorizon = 40\n")
    out = tmp_path / "oracle"
    assert main(["oracle", str(run), "--out", str(out)]) == EXIT_REFUSED
    assert not (out / "oracle.json").exists()


def test_malformed_detection_log_is_an_input_error(tmp_path):
    log = tmp_path / "detections.jsonl"
    log.write_text('{"detected": true\n')
    code = main(["train-pem", str(log), "--out", str(tmp_path / "pem.json")])
    assert code == EXIT_INPUT_ERROR
    assert not (tmp_path / "pem.json").exists()


def test_missing_run_file_is_an_input_error(tmp_path):
    code = main(["estimate", str(tmp_path / "absent.ini"), "--out", str(tmp_path)])
    assert code == EXIT_INPUT_ERROR


def test_invalid_run_value_is_an_input_error(tmp_path):
    run = tmp_path / "run.ini"
    run.write_text("[cem]\nquantile = 0.5\n")
    assert main(["estimate", str(run), "--out", str(tmp_path)]) == EXIT_INPUT_ERROR


def test_unknown_method_exits_through_argparse():
    with pytest.raises(SystemExit) as excinfo:
        main(["estimate", "--method", "exhaustive"])
    assert excinfo.value.code == 2


def test_synthetic_log_trains_a_usable_pem(tmp_path):
    log = tmp_path / "detections.jsonl"
    assert main(["gen-synthetic-log", "--out", str(log), "--n", "400"]) == EXIT_OK
    planted = read_json(tmp_path / "planted.json")
    assert planted["n"] == 400
    assert 0.5 < planted["roc_auc"] <= 1.0

    model = tmp_path / "pem.json"
    argv = ["train-pem", str(log), "--out", str(model), "--widths", "4"]
    assert main([*argv, "--epochs", "20", "--folds", "2"]) == EXIT_OK
    assert model.is_file()
    assert read_json(tmp_path / "pem_calibration.json")["bce"] > 0.0

    table = tmp_path / "calibration"
    argv = ["calibrate", str(log), "--out", str(table), "--widths", "4"]
    assert main([*argv, "--epochs", "20", "--folds", "2"]) == EXIT_OK
    models = [row["model"] for row in read_json(table / "calibration.json")]
    assert models == ["ml-nn", "logistic", "guess-mu"]
    assert (table / "pem_guess-mu.json").is_file()

    run = tmp_path / "run.ini"
    run.write_text(f"[scenario]\npreset = small\n[pem]\npath = {model}\n")
    out = tmp_path / "results"
    argv = ["estimate", str(run), "--method", "mc", "--samples", "50"]
    assert main([*argv, "--out", str(out)]) == EXIT_OK
    assert read_json(out / "seed_0" / "report.json")["total"] == 50


def test_unknown_run_key_is_an_input_error(tmp_path):
    run = tmp_path / "run.ini"
    run.write_text("[cem]\nstage = 3\n")
    assert main(["estimate", str(run), "--out", str(tmp_path)]) == EXIT_INPUT_ERROR


def test_compare_metrics_writes_a_row_per_metric(tmp_path):
    run = tmp_path / "run.ini"
    run.write_text(
        "[scenario]\npreset = small\n"
        "[cem]\nstages = 2\nsamples_per_stage = 20\neval_samples = 20\n"
        "pretrain_samples = 10\noptimizer_epochs = 20\n"
        "[pem]\nbias = 2.0\n"
    )
    out = tmp_path / "compare"
    assert main(["compare-metrics", str(run), "--out", str(out)]) == EXIT_OK

    rows = read_json(out / "compare_metrics.json")
    assert [row["metric"] for row in rows] == ["classical", "agm", "smooth"]
    assert all(row["seeds"] == [0] for row in rows)
    with (out / "compare_metrics.csv").open() as fh:
        assert [row["metric"] for row in csv.DictReader(fh)] == [
            "classical",
            "agm",
            "smooth",
        ]
    for metric in ("classical", "agm", "smooth"):
        assert (out / metric / "seed_0" / "report.json").is_file()


def test_oracle_on_small_scenario_is_fast(tmp_path, small_run):
    started = time.perf_counter()
    code = main(["oracle", str(small_run), "--out", str(tmp_path / "oracle")])
    assert code == EXIT_OK
    assert time.perf_counter() - started < 10.0


@pytest.mark.slow
def test_flat_sampler_failures_are_far_less_likely_than_adaptive_ones(tmp_path):
    scenario = ScenarioConfig.small()
    pem, _ = tuned_gap_pem(scenario, crash_formula(scenario.horizon), -7.0)
    bias = float(pem.params[pem.output_bias_index()])
    run = tmp_path / "run.ini"
    run.write_text(
        f"[scenario]\npreset = small\n[pem]\nbias = {bias!r}\n"
        "[cem]\nsamples_per_stage = 200\neval_samples = 200\n"
        "[run]\nsamples = 2000\n"
    )
    seeds = ["--seed", "0", "--seed", "1", "--seed", "2"]

    nll = {}
    for method in ("naive-flat", "adaptive"):
        out = tmp_path / method
        argv = ["estimate", str(run), "--method", method, *seeds]
        assert main([*argv, "--out", str(out)]) == EXIT_OK
        nll[method] = read_json(out / "aggregate.json")["mean_failure_nll"]

    assert nll["adaptive"] is not None
    assert nll["naive-flat"] is not None
    assert nll["naive-flat"] > nll["adaptive"] + 5.0

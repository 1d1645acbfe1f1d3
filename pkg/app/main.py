import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from app import __version__ as app_version
from app.core.exceptions import EXIT_OK, handle_cli_error
from app.core.logging import (
    build_run_id,
    get_structured_logger,
    set_run_id,
    setup_logging,
)
from app.core.settings import load_run_config, settings
from app.models.config import Metric, OptimizerConfig, RunConfig
from app.models.pem import MlpSpec
from app.services.pem.synthetic import PlantedLogistic
from app.services.stl.parser import parse_formula
from app.utils.helpers import resolve_formula

logger = get_structured_logger(__name__)

METHODS = ("mc", "naive-flat", "adaptive")
METRICS = tuple(m.value for m in Metric)


def _widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid layer widths '{text}'") from exc


def _run_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Apply command-line flags on top of a run file; the result is re-validated."""
    payload = config.model_dump()
    if getattr(args, "method", None):
        payload["method"] = args.method
    if getattr(args, "metric", None):
        payload["metric"] = {**payload["metric"], "metric": args.metric}
    if getattr(args, "seed", None):
        payload["seeds"] = args.seed
    if getattr(args, "samples", None):
        payload["samples"] = args.samples
    if getattr(args, "formula", None):
        payload["formula"] = args.formula
    if getattr(args, "out_dir", None):
        payload["output_dir"] = args.out_dir
    return RunConfig.model_validate(payload)


def _config(args: argparse.Namespace) -> RunConfig:
    return _run_overrides(load_run_config(args.config), args)


def _optimizer(args: argparse.Namespace) -> OptimizerConfig:
    payload = settings.PEM_TRAINING.model_dump()
    if args.epochs is not None:
        payload["epochs"] = args.epochs
    if args.learning_rate is not None:
        payload["learning_rate"] = args.learning_rate
    return OptimizerConfig(**payload)


def cmd_train_pem(args: argparse.Namespace) -> int:
    from app.jobs.pem_training import pem_training_job

    spec = MlpSpec(widths=(*args.widths, 1), activation=args.activation)
    pem_training_job.run(
        args.log, args.out, spec, _optimizer(args), folds=args.folds, seed=args.seed
    )
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    from app.jobs.pem_training import calibration_job

    spec = MlpSpec(widths=(*args.widths, 1), activation=args.activation)
    calibration_job.run(
        args.log, args.out, spec, _optimizer(args), folds=args.folds, seed=args.seed
    )
    return EXIT_OK


def cmd_gen_synthetic_log(args: argparse.Namespace) -> int:
    from app.jobs.pem_training import synthetic_log_job

    planted = PlantedLogistic()
    if args.bias is not None:
        planted = PlantedLogistic(bias=args.bias)
    synthetic_log_job.run(args.out, args.n, seed=args.seed, planted=planted)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    from app.jobs.estimation import estimation_job

    config = _config(args)
    aggregate = estimation_job.run(
        config, config.output_dir, dump_traces=args.dump_traces
    )
    logger.info(
        "estimation finished",
        method=aggregate.method,
        mean_mu_hat=aggregate.mean_mu_hat,
        standard_error=aggregate.standard_error,
    )
    return EXIT_OK


def cmd_compare_metrics(args: argparse.Namespace) -> int:
    from app.jobs.estimation import metric_comparison_job

    config = _config(args)
    metric_comparison_job.run(config, config.output_dir)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    from app.jobs.oracle_run import oracle_job

    config = _config(args)
    oracle_job.run(config, config.output_dir, keep_table=args.table)
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    from app.jobs.ranking import ranking_job

    config = _config(args)
    formula = parse_formula(args.formula) if args.formula else resolve_formula(config)
    ranking_job.run(args.traces_dir, formula, config.metric, args.out)
    return EXIT_OK


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("log", type=Path, help="JSON-lines detection log")
    parser.add_argument(
        "--widths", type=_widths, default=(20, 20, 20), help="Hidden widths"
    )
    parser.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)


def _add_run_flags(parser: argparse.ArgumentParser, out_dir: bool = True) -> None:
    parser.add_argument(
        "config", type=Path, nargs="?", default=None, help="INI run file"
    )
    parser.add_argument("--metric", choices=METRICS)
    parser.add_argument(
        "--seed", type=int, action="append", help="Repeat for several seeds"
    )
    parser.add_argument(
        "--formula", help="Prefix STL formula, default: never closer than crash"
    )
    if out_dir:
        parser.add_argument("--out", dest="out_dir", type=Path, help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pemrisk",
        description="Failure-probability estimation with perception error models",
    )
    parser.add_argument("--version", action="version", version=app_version)
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train-pem", help="Fit a pem on a detection log")
    _add_training_flags(train)
    train.add_argument("--out", type=Path, default=Path("pem.json"), help="Model file")
    train.set_defaults(handler=cmd_train_pem)

    calibrate = commands.add_parser(
        "calibrate", help="Compare ML-NN, logistic and Guess-mu"
    )
    _add_training_flags(calibrate)
    calibrate.add_argument("--out", type=Path, default=settings.OUTPUT_DIR)
    calibrate.set_defaults(handler=cmd_calibrate)

    synthetic = commands.add_parser(
        "gen-synthetic-log", help="Planted-logistic detection log"
    )
    synthetic.add_argument("--out", type=Path, default=Path("detections.jsonl"))
    synthetic.add_argument("--n", type=int, default=20000)
    synthetic.add_argument("--seed", type=int, default=0)
    synthetic.add_argument("--bias", type=float, default=None)
    synthetic.set_defaults(handler=cmd_gen_synthetic_log)

    estimate = commands.add_parser("estimate", help="Estimate the failure probability")
    _add_run_flags(estimate)
    estimate.add_argument("--method", choices=METHODS)
    estimate.add_argument("--samples", type=int, help="Rollouts for mc and naive-flat")
    estimate.add_argument(
        "--dump-traces", action="store_true", help="Write the final batch"
    )
    estimate.set_defaults(handler=cmd_estimate)

    compare = commands.add_parser(
        "compare-metrics", help="Adaptive runs under every metric"
    )
    _add_run_flags(compare)
    compare.set_defaults(handler=cmd_compare_metrics)

    oracle = commands.add_parser(
        "oracle", help="Exact failure probability by enumeration"
    )
    _add_run_flags(oracle)
    oracle.add_argument(
        "--table", action="store_true", help="Also write every sequence"
    )
    oracle.set_defaults(handler=cmd_oracle)

    rank = commands.add_parser("rank", help="Rank trace CSVs, least safe first")
    _add_run_flags(rank, out_dir=False)
    rank.add_argument("traces_dir", type=Path, help="Directory of trace CSVs")
    rank.add_argument(
        "--out", type=Path, default=Path("ranking.csv"), help="Ranking CSV"
    )
    rank.set_defaults(handler=cmd_rank)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging(use_json=settings.LOG_JSON, level=settings.LOG_LEVEL)
    parser = build_parser()
    args = parser.parse_args(argv)
    set_run_id(build_run_id(args.command))
    try:
        return args.handler(args)
    except Exception as exc:
        return handle_cli_error(exc)


if __name__ == "__main__":
    sys.exit(main())

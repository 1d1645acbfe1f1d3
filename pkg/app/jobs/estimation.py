import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.core.exceptions import HorizonRefusalError
from app.core.execution import SeedExecutionManager
from app.core.logging import build_run_id, get_run_id, get_structured_logger, set_run_id
from app.core.settings import settings
from app.models.config import Metric, RunConfig
from app.models.reports import AggregateReport, EnumerationResult, EstimationReport
from app.models.trajectory import Trajectory
from app.schemas import estimation_report_schema
from app.services.ais.cem import adaptive_est
from app.services.ais.estimators import is_estimate, mc_estimate
from app.services.ais.proposal import rollout_seeds
from app.services.oracle.enumeration import exact_mu
from app.services.sim.rollout import simulate
from app.services.sim.sources import ConstantSource, PemSource
from app.services.storage.traces import write_trajectory_csv
from app.services.storage.writers import write_csv, write_json, write_jsonl
from app.utils.helpers import aggregate_reports, resolve_formula, resolve_pem

logger = logging.getLogger(__name__)
progress = get_structured_logger(__name__)

CURVE_HEADER = ("gap_m", "proposal_p", "pem_p", "sampler_p")


@dataclass(frozen=True)
class SeedTask:
    config: RunConfig
    seed: int
    out_dir: Path
    dump_traces: bool = False


def seed_dir(out_dir: Path, seed: int) -> Path:
    return out_dir / f"seed_{seed}"


def _write_curve(path: Path, points) -> None:
    write_csv(
        path,
        CURVE_HEADER,
        ([p.gap_m, p.proposal_p, p.pem_p, p.sampler_p] for p in points),
    )


def _dump_traces(directory: Path, trajectories: list[Trajectory], dt: float) -> None:
    for index, trajectory in enumerate(trajectories):
        write_trajectory_csv(directory / f"trace_{index:04d}.csv", trajectory, dt)


def run_seed(task: SeedTask) -> EstimationReport:
    """One seeded estimation run; writes its own report files and returns the report."""
    previous_run_id = get_run_id()
    set_run_id(build_run_id("estimate", task.seed))
    try:
        return _run_seed(task)
    finally:
        if previous_run_id is not None:
            set_run_id(previous_run_id)


def _run_seed(task: SeedTask) -> EstimationReport:
    config = task.config
    scenario = config.scenario
    pem = resolve_pem(config.pem)
    formula = resolve_formula(config)
    target = PemSource(pem)
    directory = seed_dir(task.out_dir, task.seed)
    started = time.perf_counter()

    if config.method == "adaptive":
        result = adaptive_est(
            pem,
            formula,
            scenario,
            config.cem,
            config.metric,
            seed=task.seed,
            curve_stages=config.snapshot_stages,
        )
        report = result.report
        trajectories = result.final_trajectories
        write_jsonl(directory / "diagnostics.jsonl", result.stages)
        _write_curve(directory / "proposal_curve.csv", result.curve)
        for stage, points in sorted(result.curves.items()):
            _write_curve(directory / f"proposal_curve_stage_{stage}.csv", points)
    else:
        seeds = rollout_seeds(np.random.SeedSequence(task.seed), config.samples)
        if config.method == "mc":
            trajectories = simulate(target, target, scenario, seeds)
            report = mc_estimate(trajectories, formula, config.metric, config.cem.gamma)
        else:
            sampler = ConstantSource(config.flat_probability)
            trajectories = simulate(sampler, target, scenario, seeds)
            report = is_estimate(
                trajectories,
                formula,
                config.metric,
                config.cem.gamma,
                method="naive-flat",
            )
        report = report.model_copy(
            update={"seed": task.seed, "wall_clock_s": time.perf_counter() - started}
        )

    write_json(directory / "report.json", report)
    if task.dump_traces:
        _dump_traces(directory / "traces", trajectories, scenario.dt)

    progress.info(
        "estimate complete",
        method=report.method,
        metric=report.metric,
        mu_hat=report.mu_hat,
        failures=report.failures,
        total=report.total,
        stalled=report.stalled,
        wall_clock_s=round(report.wall_clock_s, 3),
    )
    return report


def oracle_for(config: RunConfig, workers: int = 1) -> EnumerationResult | None:
    """Exact failure probability when the horizon is within the enumeration cap."""
    try:
        return exact_mu(
            resolve_pem(config.pem),
            config.scenario,
            resolve_formula(config),
            config.metric,
            config.cem.gamma,
            horizon_cap=settings.ORACLE.horizon_cap,
            workers=workers,
            chunk_size=settings.ORACLE.chunk_size,
        )
    except HorizonRefusalError:
        logger.debug("Horizon %s too long for an oracle run", config.scenario.horizon)
        return None


class EstimationJob:
    def __init__(self) -> None:
        self.executor = SeedExecutionManager(settings.WORKERS)

    def run(
        self, config: RunConfig, out_dir: Path | None = None, dump_traces: bool = False
    ) -> AggregateReport:
        out_dir = Path(out_dir or config.output_dir)
        logger.info(
            "Running %s estimation over %s seeds into %s",
            config.method,
            len(config.seeds),
            out_dir,
        )
        tasks = [SeedTask(config, seed, out_dir, dump_traces) for seed in config.seeds]
        reports = self.executor.map(run_seed, tasks)

        oracle = oracle_for(config, settings.WORKERS)
        if oracle is not None:
            write_json(out_dir / "oracle.json", oracle)
        oracle_mu = oracle.mu if oracle is not None else None
        aggregate = aggregate_reports(reports, oracle_mu)
        write_json(out_dir / "aggregate.json", aggregate)
        write_json(out_dir / "report.schema.json", estimation_report_schema())

        if aggregate.stalled_runs:
            logger.warning(
                "%s of %s runs stalled; their reports carry partial results",
                aggregate.stalled_runs,
                len(reports),
            )
        return aggregate


class MetricComparisonJob:
    """Adaptive runs under every robustness metric with identical seeds."""

    HEADER = (
        "metric",
        "mean_mu_hat",
        "standard_error",
        "mean_failure_fraction",
        "mean_failure_nll",
        "stalled_runs",
    )

    def __init__(self) -> None:
        self.estimation = EstimationJob()

    def run(
        self, config: RunConfig, out_dir: Path | None = None
    ) -> list[AggregateReport]:
        out_dir = Path(out_dir or config.output_dir)
        rows: list[AggregateReport] = []
        for metric in Metric:
            variant = config.model_copy(
                update={
                    "method": "adaptive",
                    "metric": config.metric.model_copy(update={"metric": metric}),
                }
            )
            rows.append(self.estimation.run(variant, out_dir / metric.value))

        write_json(out_dir / "compare_metrics.json", rows)
        write_csv(
            out_dir / "compare_metrics.csv",
            self.HEADER,
            (
                [
                    row.metric,
                    row.mean_mu_hat,
                    row.standard_error,
                    row.mean_failure_fraction,
                    "" if row.mean_failure_nll is None else row.mean_failure_nll,
                    row.stalled_runs,
                ]
                for row in rows
            ),
        )
        return rows


estimation_job = EstimationJob()
metric_comparison_job = MetricComparisonJob()

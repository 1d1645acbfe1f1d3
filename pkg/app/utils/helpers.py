import logging
import math
from collections.abc import Sequence

import numpy as np

from app.models.config import PemSourceConfig, RunConfig
from app.models.reports import AggregateReport, EstimationReport
from app.models.trajectory import DIST
from app.services.pem.network import PemModel
from app.services.stl.formula import Formula, never_closer_than
from app.services.stl.parser import parse_formula

logger = logging.getLogger(__name__)


def resolve_pem(source: PemSourceConfig) -> PemModel:
    """Load the target pem: a model file, a constant, or the planted gap logistic."""
    if source.path is not None:
        logger.info("Loading pem from %s", source.path)
        return PemModel.load(source.path)
    if source.constant is not None:
        return PemModel.constant(source.constant)
    return PemModel.gap_logistic(source.gap_weight, source.bias)


def resolve_formula(config: RunConfig) -> Formula:
    """The configured formula, or 'never closer than the crash threshold'."""
    if config.formula:
        return parse_formula(config.formula)
    scenario = config.scenario
    return never_closer_than(DIST, scenario.crash_threshold, scenario.horizon)


def aggregate_reports(
    reports: Sequence[EstimationReport], oracle_mu: float | None = None
) -> AggregateReport:
    """Mean estimate across seeds with the standard error of that mean."""
    mu = np.array([r.mu_hat for r in reports])
    nll = [r.mean_failure_nll for r in reports if r.mean_failure_nll is not None]
    standard_error = 0.0
    if len(mu) > 1:
        standard_error = float(np.std(mu, ddof=1) / math.sqrt(len(mu)))
    return AggregateReport(
        method=reports[0].method,
        metric=reports[0].metric,
        seeds=[r.seed if r.seed is not None else -1 for r in reports],
        mean_mu_hat=float(mu.mean()),
        standard_error=standard_error,
        mean_failure_fraction=float(np.mean([r.failure_fraction for r in reports])),
        mean_failure_nll=float(np.mean(nll)) if nll else None,
        stalled_runs=sum(1 for r in reports if r.stalled),
        oracle_mu=oracle_mu,
    )

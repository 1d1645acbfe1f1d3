"""Monte-Carlo and importance-sampling failure-probability estimators.

Importance weights stay in the log domain throughout; the estimate is
assembled as exp(shift) * mean(indicator * exp(log_w - shift)) with the
shift taken from the largest failing log weight.
"""

import math
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from app.core.exceptions import ArgumentError
from app.models.config import MetricSettings
from app.models.reports import EstimationReport
from app.models.trajectory import Trajectory, stack_channels
from app.services.sim.rollout import rollout_log_probability
from app.services.stl.formula import Formula
from app.services.stl.robustness import batch_robustness, semantics_for

_LN10 = math.log(10.0)


def batch_robustness_of(
    trajectories: Sequence[Trajectory], formula: Formula, metric: MetricSettings
) -> np.ndarray:
    """Robustness per trajectory, cached on the trajectory per (formula, metric)."""
    key = (formula, metric.cache_key)
    missing = [i for i, traj in enumerate(trajectories) if key not in traj.robustness]
    if missing:
        values = batch_robustness(
            stack_channels([trajectories[i] for i in missing]),
            formula,
            semantics_for(metric),
        )
        for i, value in zip(missing, values, strict=True):
            trajectories[i].robustness[key] = float(value)
    return np.array([traj.robustness[key] for traj in trajectories])


def log_weight(trajectory: Trajectory) -> float:
    """sum_t ln p_t - ln q_t over the realized actions."""
    if trajectory.target_p is None or trajectory.proposal_p is None:
        raise ArgumentError("log weight needs both target and proposal streams")
    return float(np.sum(np.log(trajectory.target_p) - np.log(trajectory.proposal_p)))


def required_samples(mu: float, rel_err: float) -> int:
    """Plain Monte-Carlo runs needed for relative error ``rel_err`` at ``mu``."""
    if not 0.0 < mu <= 1.0:
        raise ArgumentError(f"mu must lie in (0, 1], got {mu}")
    if not rel_err > 0:
        raise ArgumentError(f"relative error must be positive, got {rel_err}")
    value = 1.0 / (rel_err**2 * mu)
    nearest = round(value)
    if math.isclose(value, nearest, rel_tol=1e-9):
        return int(nearest)
    return math.ceil(value)


def _summarize(
    failed: np.ndarray, log_weights: np.ndarray, target_log_likelihood: np.ndarray
) -> dict:
    n = len(failed)
    n_fail = int(failed.sum())
    fields: dict = {
        "failures": n_fail,
        "total": n,
        "failure_fraction": n_fail / n,
        "n_simulations": n,
    }
    if n_fail == 0:
        return {**fields, "mu_hat": 0.0, "standard_error": 0.0}

    shift = float(np.max(log_weights[failed]))
    scaled = np.where(failed, np.exp(log_weights - shift), 0.0)
    scale = math.exp(shift) if shift < 709.0 else math.inf
    mean_scaled = float(np.sum(scaled)) / n
    mu_hat = scale * mean_scaled
    deviation = float(np.std(scaled, ddof=1)) if n > 1 else 0.0
    standard_error = scale * deviation / math.sqrt(n) if deviation > 0 else 0.0

    log_mu = float(logsumexp(log_weights[failed])) - math.log(n)
    nll = float(-np.mean(target_log_likelihood[failed]))
    fields.update(
        mu_hat=min(mu_hat, 1.0),
        log10_mu_hat=log_mu / _LN10,
        standard_error=standard_error,
        mean_failure_nll=nll if math.isfinite(nll) else None,
    )
    # From the shifted weights alone; finite when exp(shift) underflows
    rel_err = deviation / math.sqrt(n) / mean_scaled
    fields["relative_error"] = rel_err
    if deviation > 0:
        log_se = shift + math.log(deviation) - 0.5 * math.log(n)
        fields["log10_standard_error"] = log_se / _LN10
        if 0 < mu_hat <= 1.0:
            fields["mc_samples_for_same_error"] = required_samples(mu_hat, rel_err)
    return fields


def _check_batch(trajectories: Sequence[Trajectory]) -> None:
    if not trajectories:
        raise ArgumentError("cannot estimate from an empty batch")


def _target_log_likelihoods(trajectories: Sequence[Trajectory]) -> np.ndarray:
    return np.array(
        [
            rollout_log_probability(t, "target") if t.target_p is not None else np.nan
            for t in trajectories
        ]
    )


def mc_estimate(
    trajectories: Sequence[Trajectory],
    formula: Formula,
    metric: MetricSettings,
    gamma: float = 0.0,
    method: str = "mc",
) -> EstimationReport:
    """Fraction of rollouts with robustness <= gamma."""
    _check_batch(trajectories)
    failed = batch_robustness_of(trajectories, formula, metric) <= gamma
    fields = _summarize(
        failed, np.zeros(len(trajectories)), _target_log_likelihoods(trajectories)
    )
    return EstimationReport(
        method=method, metric=metric.metric.value, gamma=gamma, **fields
    )


def is_estimate(
    trajectories: Sequence[Trajectory],
    formula: Formula,
    metric: MetricSettings,
    gamma: float = 0.0,
    method: str = "is",
) -> EstimationReport:
    """Importance-weighted failure probability for rollouts drawn under a proposal."""
    _check_batch(trajectories)
    failed = batch_robustness_of(trajectories, formula, metric) <= gamma
    log_weights = np.array([log_weight(t) for t in trajectories])
    fields = _summarize(failed, log_weights, _target_log_likelihoods(trajectories))
    return EstimationReport(
        method=method, metric=metric.metric.value, gamma=gamma, **fields
    )

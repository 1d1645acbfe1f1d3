"""Exact failure probabilities by enumerating every detection sequence.

Dynamics are deterministic given the actions, so the T-1 binary actions
index every possible rollout. The 2^(T-1) sequences are split by their
leading actions into chunks that are evaluated independently and merged
by log-sum-exp.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from app.core.exceptions import (
    ArgumentError,
    HorizonRefusalError,
    UndefinedProposalError,
)
from app.core.execution import SeedExecutionManager
from app.core.settings import ORACLE_HARD_CAP
from app.models.config import MetricSettings
from app.models.reports import EnumerationResult
from app.models.scenario import ScenarioConfig
from app.services.pem.network import PemModel
from app.services.sim.rollout import realized, replay, target_log_likelihood
from app.services.sim.sources import DetectionSource, PemSource
from app.services.stl.formula import Formula
from app.services.stl.robustness import batch_robustness, semantics_for

logger = logging.getLogger(__name__)

DEFAULT_CAP = 14
DEFAULT_CHUNK = 1 << 14


def action_block(n_actions: int, prefix: int, prefix_len: int) -> np.ndarray:
    """All sequences whose first ``prefix_len`` actions spell ``prefix``.

    Bit j of a code is the action at step j.
    """
    suffix_len = n_actions - prefix_len
    codes = (np.arange(1 << suffix_len, dtype=np.int64) << prefix_len) | prefix
    return ((codes[:, None] >> np.arange(n_actions)) & 1).astype(bool)


def sequence_label(actions: np.ndarray) -> str:
    return "".join("1" if a else "0" for a in actions)


@dataclass(frozen=True)
class _Task:
    prefix: int
    prefix_len: int
    target: DetectionSource
    cfg: ScenarioConfig
    formula: Formula
    metric: MetricSettings
    gamma: float
    proposal: DetectionSource | None
    keep_table: bool


@dataclass
class _ChunkResult:
    log_mass: float
    log_is_mass: float
    n_fail: int
    mean_nll: float
    table: list[tuple[str, float, float]] | None
    failing: list[tuple[str, float]]


def _evaluate(task: _Task) -> _ChunkResult:
    cfg = task.cfg
    actions = action_block(cfg.n_actions, task.prefix, task.prefix_len)
    history = replay(actions, cfg)
    log_p = target_log_likelihood(history, actions, task.target)
    semantics = semantics_for(task.metric)
    robustness = batch_robustness(history.channels(), task.formula, semantics)
    failed = robustness <= task.gamma
    n_fail = int(failed.sum())

    log_mass = float(logsumexp(log_p[failed])) if n_fail else -math.inf
    mean_nll = 0.0
    if n_fail:
        share = np.exp(log_p[failed] - log_mass)
        mean_nll = float(np.sum(share * -log_p[failed]))

    log_is_mass = -math.inf
    if task.proposal is not None and n_fail:
        log_q = np.zeros(len(actions))
        for t in range(cfg.n_actions):
            q = task.proposal.probabilities(history.batch_at(t))
            log_q += np.log(realized(q, actions[:, t]))
        log_w = log_p - log_q
        log_is_mass = float(logsumexp(log_q[failed] + log_w[failed]))

    table = None
    if task.keep_table:
        table = [
            (sequence_label(a), float(np.exp(lp)), float(r))
            for a, lp, r in zip(actions, log_p, robustness, strict=True)
        ]
    failing = [
        (sequence_label(actions[i]), float(log_p[i])) for i in np.flatnonzero(failed)
    ]
    return _ChunkResult(log_mass, log_is_mass, n_fail, mean_nll, table, failing)


class Enumerator:
    """Splits the action space into prefix chunks and merges their sums."""

    def __init__(
        self,
        horizon_cap: int = DEFAULT_CAP,
        chunk_size: int = DEFAULT_CHUNK,
        workers: int = 1,
    ):
        self.horizon_cap = min(horizon_cap, ORACLE_HARD_CAP)
        self.chunk_size = chunk_size
        self.executor = SeedExecutionManager(workers)

    def run(
        self,
        target: DetectionSource,
        cfg: ScenarioConfig,
        formula: Formula,
        metric: MetricSettings,
        gamma: float = 0.0,
        proposal: DetectionSource | None = None,
        keep_table: bool = False,
    ) -> list[_ChunkResult]:
        if cfg.horizon > self.horizon_cap:
            raise HorizonRefusalError(cfg.horizon, self.horizon_cap)
        n = cfg.n_actions
        suffix_len = min(n, max(0, int(math.log2(max(self.chunk_size, 1)))))
        prefix_len = n - suffix_len
        tasks = [
            _Task(
                prefix,
                prefix_len,
                target,
                cfg,
                formula,
                metric,
                gamma,
                proposal,
                keep_table,
            )
            for prefix in range(1 << prefix_len)
        ]
        logger.debug("Enumerating %s sequences in %s chunks", 1 << n, len(tasks))
        return self.executor.map(_evaluate, tasks)


def as_source(model: PemModel | DetectionSource) -> DetectionSource:
    if isinstance(model, PemModel):
        return PemSource(model)
    return model


def _merge_log(values: list[float]) -> float:
    finite = [v for v in values if v > -math.inf]
    return float(logsumexp(finite)) if finite else -math.inf


def exact_mu(
    pem: PemModel | DetectionSource,
    cfg: ScenarioConfig,
    formula: Formula,
    metric: MetricSettings,
    gamma: float = 0.0,
    horizon_cap: int = ORACLE_HARD_CAP,
    workers: int = 1,
    keep_table: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
) -> EnumerationResult:
    """Sum of p(sequence) over all failing sequences."""
    chunks = Enumerator(horizon_cap, chunk_size, workers).run(
        as_source(pem), cfg, formula, metric, gamma, keep_table=keep_table
    )
    log_mu = _merge_log([c.log_mass for c in chunks])
    n_fail = sum(c.n_fail for c in chunks)
    mean_nll = None
    if n_fail:
        mean_nll = float(
            sum(
                math.exp(c.log_mass - log_mu) * c.mean_nll
                for c in chunks
                if c.n_fail
            )
        )
    table = None
    if keep_table:
        table = [row for c in chunks for row in (c.table or [])]
    return EnumerationResult(
        mu=min(math.exp(log_mu), 1.0) if n_fail else 0.0,
        log10_mu=log_mu / math.log(10.0) if n_fail else None,
        n_fail_sequences=n_fail,
        n_total=1 << cfg.n_actions,
        mean_failure_nll=mean_nll,
        table=table,
    )


def exact_is_expectation(
    pem: PemModel | DetectionSource,
    proposal: PemModel | DetectionSource,
    cfg: ScenarioConfig,
    formula: Formula,
    metric: MetricSettings,
    gamma: float = 0.0,
    horizon_cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> float:
    """E_q[1{fail} p/q], summed exactly over every sequence."""
    chunks = Enumerator(horizon_cap, workers=workers).run(
        as_source(pem), cfg, formula, metric, gamma, proposal=as_source(proposal)
    )
    log_value = _merge_log([c.log_is_mass for c in chunks])
    return math.exp(log_value) if log_value > -math.inf else 0.0


def perfect_proposal_mass(
    pem: PemModel | DetectionSource,
    cfg: ScenarioConfig,
    formula: Formula,
    metric: MetricSettings,
    gamma: float = 0.0,
    horizon_cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> list[tuple[str, float]]:
    """q*(sequence) = p(sequence) / mu on failing sequences."""
    chunks = Enumerator(horizon_cap, workers=workers).run(
        as_source(pem), cfg, formula, metric, gamma
    )
    log_mu = _merge_log([c.log_mass for c in chunks])
    if log_mu == -math.inf:
        raise UndefinedProposalError(
            "no failing sequence: the perfect proposal is undefined"
        )
    return [
        (label, math.exp(log_p - log_mu)) for c in chunks for label, log_p in c.failing
    ]


def exact_event_probability(
    detect_probabilities: np.ndarray,
    event: Callable[[np.ndarray], np.ndarray],
    chunk_size: int = DEFAULT_CHUNK,
) -> float:
    """Natural log of P(event) for independent per-step detections.

    ``event`` maps a (batch, n) boolean detection array to a boolean mask.
    """
    probs = np.asarray(detect_probabilities, dtype=float)
    n = len(probs)
    if n > ORACLE_HARD_CAP:
        raise HorizonRefusalError(n, ORACLE_HARD_CAP)
    if n == 0:
        raise ArgumentError("need at least one step")
    suffix_len = min(n, int(math.log2(chunk_size)))
    prefix_len = n - suffix_len
    masses: list[float] = []
    for prefix in range(1 << prefix_len):
        actions = action_block(n, prefix, prefix_len)
        log_p = np.sum(np.log(np.where(actions, probs, 1.0 - probs)), axis=1)
        hit = np.asarray(event(actions), dtype=bool)
        if hit.any():
            masses.append(float(logsumexp(log_p[hit])))
    return _merge_log(masses)

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from app.core.exceptions import ArgumentError, StallError
from app.core.logging import get_structured_logger
from app.models.config import CemConfig, MetricSettings
from app.models.reports import EstimationReport, ProposalCurvePoint, StageDiagnostics
from app.models.scenario import ScenarioConfig
from app.models.trajectory import Trajectory
from app.services.ais.estimators import batch_robustness_of, is_estimate, log_weight
from app.services.ais.proposal import (
    ProposalModel,
    ProposalSource,
    adaptable_states,
    default_gap_grid,
    pretrain_proposal,
    proposal_curve,
    rollout_seeds,
)
from app.services.pem.network import PemModel
from app.services.pem.training import fit
from app.services.sim.rollout import simulate
from app.services.sim.sources import PemSource
from app.services.stl.formula import Formula

logger = logging.getLogger(__name__)
progress = get_structured_logger(__name__)

_INDEX_EPS = 1e-9


def cem_threshold(
    sorted_values: Sequence[float] | np.ndarray,
    sigma: float,
    gamma: float = 0.0,
    n: int | None = None,
    tail: Literal["upper", "lower"] = "upper",
) -> float:
    """Intermediate level: max(gamma, value at index floor(sigma * n)).

    With ``tail="lower"`` the index is floor((1 - sigma) * n), the level below
    which the least robust (1 - sigma) share of the batch falls.
    """
    values = np.asarray(sorted_values, dtype=float)
    if not 0.95 <= sigma < 1.0:
        raise ArgumentError(f"quantile must lie in [0.95, 1), got {sigma}")
    n = len(values) if n is None else n
    share = sigma if tail == "upper" else 1.0 - sigma
    index = math.floor(share * n + _INDEX_EPS)
    if not 0 <= index < len(values):
        raise ArgumentError(f"quantile index {index} outside batch of {len(values)}")
    return max(gamma, float(values[index]))


def smoothed_weights(log_weights: np.ndarray, alpha: float) -> np.ndarray:
    """w^alpha rescaled so the largest weight is 1."""
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.size == 0:
        return log_weights
    return np.exp(alpha * (log_weights - np.max(log_weights)))


def elite_quota(
    n: int, sigma: float, tail: Literal["upper", "lower"] = "upper"
) -> int:
    """Rollouts at or below the level when robustness values are all distinct."""
    share = sigma if tail == "upper" else 1.0 - sigma
    return math.floor(share * n + _INDEX_EPS) + 1


def select_elite(
    robustness: np.ndarray, gamma_k: float, quota: int | None = None
) -> np.ndarray:
    """Indices of rollouts with robustness <= gamma_k.

    When ties at gamma_k push the count past ``quota``, only the rollouts
    strictly below the level are kept, provided there are any.
    """
    robustness = np.asarray(robustness, dtype=float)
    elite = np.flatnonzero(robustness <= gamma_k)
    if quota is not None and elite.size > quota:
        below = np.flatnonzero(robustness < gamma_k)
        if below.size:
            return below
    return elite


@dataclass
class KlTrainingSet:
    features: np.ndarray
    actions: np.ndarray
    weights: np.ndarray
    elite: np.ndarray


def kl_training_set(
    trajectories: Sequence[Trajectory],
    robustness: np.ndarray,
    gamma_k: float,
    alpha: float,
    elite: np.ndarray | None = None,
    emergency_range: float | None = None,
) -> KlTrainingSet:
    """Step rows of the elite rollouts: gap, realized action, smoothed weight.

    The elite defaults to every rollout with robustness <= gamma_k. With an
    emergency range only steps where a detection could still start braking
    contribute rows.
    """
    if elite is None:
        elite = select_elite(robustness, gamma_k)
    if elite.size == 0:
        raise StallError(f"no rollout reaches the level {gamma_k:g}")
    log_w = np.array([log_weight(trajectories[i]) for i in elite])
    weights = smoothed_weights(log_w, alpha)
    features, actions, row_weights = [], [], []
    for w, i in zip(weights, elite, strict=True):
        traj = trajectories[i]
        braking = None if traj.braking is None else traj.braking[:-1]
        rows = adaptable_states(traj.gap[:-1], braking, emergency_range)
        features.append(traj.gap[:-1][rows])
        actions.append(traj.actions[rows].astype(float))
        row_weights.append(np.full(int(rows.sum()), w))
    if not sum(len(a) for a in actions):
        raise StallError(f"elite rollouts at level {gamma_k:g} have no adaptable step")
    return KlTrainingSet(
        features=np.concatenate(features)[:, None],
        actions=np.concatenate(actions),
        weights=np.concatenate(row_weights),
        elite=elite,
    )


def smoothed_kl_loss(
    trajectories: Sequence[Trajectory],
    proposal: ProposalModel,
    gamma_k: float,
    alpha: float,
    formula: Formula,
    metric: MetricSettings,
    params: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """-sum_i w_i^alpha sum_t ln q(a_it | h(s_it)) over rollouts with r <= gamma_k.

    Weights come from the probabilities recorded at sampling time and are
    constants with respect to the proposal parameters.
    """
    robustness = batch_robustness_of(trajectories, formula, metric)
    data = kl_training_set(trajectories, robustness, gamma_k, alpha)
    return proposal.loss_and_gradient(
        proposal.params if params is None else params,
        data.features,
        data.actions,
        sample_weight=data.weights,
        reduction="sum",
    )


@dataclass
class AdaptiveResult:
    report: EstimationReport
    stages: list[StageDiagnostics]
    proposal: ProposalModel
    curve: list[ProposalCurvePoint] = field(default_factory=list)
    curves: dict[int, list[ProposalCurvePoint]] = field(default_factory=dict)
    final_trajectories: list[Trajectory] = field(default_factory=list)


class AdaptiveEstimator:
    """State-dependent cross-entropy adaptation of a gap-conditioned proposal.

    Each stage samples a batch under the current proposal, takes the level
    gamma_k from the least robust share of the batch and refits the proposal
    to the elite rollouts. On a robustness plateau the elite is the set of
    rollouts strictly below it. Adaptation stops once the level has neither
    dropped nor gained rollouts below it for ``patience`` stages.
    """

    def __init__(
        self,
        pem: PemModel,
        formula: Formula,
        scenario: ScenarioConfig,
        cem: CemConfig,
        metric: MetricSettings,
        curve_stages: Sequence[int] = (),
    ):
        self.pem = pem
        self.formula = formula
        self.scenario = scenario
        self.cem = cem
        self.metric = metric
        self.curve_stages = set(curve_stages) or {cem.stages}
        self.target = PemSource(pem)
        self.quota = elite_quota(
            cem.samples_per_stage, cem.quantile, cem.quantile_tail
        )

    def sampler(self, proposal: ProposalModel) -> ProposalSource:
        return ProposalSource(
            proposal,
            self.target,
            self.scenario.emergency_range,
            self.cem.attenuate_only,
        )

    def _sample(self, proposal: ProposalModel, seq: np.random.SeedSequence, n: int):
        return simulate(
            self.sampler(proposal), self.target, self.scenario, rollout_seeds(seq, n)
        )

    def _curve(
        self, proposal: ProposalModel, gaps: np.ndarray
    ) -> list[ProposalCurvePoint]:
        return proposal_curve(proposal, self.pem, gaps, self.sampler(proposal))

    def _training_set(
        self, trajectories: list[Trajectory], robustness: np.ndarray, gamma_k: float
    ) -> KlTrainingSet:
        quota = self.quota if gamma_k > self.cem.gamma else None
        return kl_training_set(
            trajectories,
            robustness,
            gamma_k,
            self.cem.alpha,
            elite=select_elite(robustness, gamma_k, quota),
            emergency_range=self.scenario.emergency_range,
        )

    def run(self, seed: int) -> AdaptiveResult:
        cem = self.cem
        started = time.perf_counter()
        root = np.random.SeedSequence(seed)
        pretrain_seq, final_seq, *stage_seqs = root.spawn(cem.stages + 2)

        proposal = pretrain_proposal(self.pem, self.scenario, cem, pretrain_seq)
        gaps = default_gap_grid(self.scenario)
        curves: dict[int, list[ProposalCurvePoint]] = {}
        if 0 in self.curve_stages:
            curves[0] = self._curve(proposal, gaps)

        stages: list[StageDiagnostics] = []
        best_level, best_below = math.inf, 0
        non_improving = 0
        stalled = False
        n_simulations = cem.pretrain_samples

        for k, stage_seq in enumerate(stage_seqs, start=1):
            batch_seq, retry_seq = stage_seq.spawn(2)
            trajectories = self._sample(proposal, batch_seq, cem.samples_per_stage)
            n_simulations += len(trajectories)
            robustness = batch_robustness_of(trajectories, self.formula, self.metric)
            ordered = robustness[np.argsort(robustness, kind="stable")]
            gamma_k = cem_threshold(
                ordered, cem.quantile, cem.gamma, tail=cem.quantile_tail
            )

            resampled = False
            try:
                data = self._training_set(trajectories, robustness, gamma_k)
            except StallError:
                resampled = True
                trajectories = self._sample(proposal, retry_seq, cem.samples_per_stage)
                n_simulations += len(trajectories)
                robustness = batch_robustness_of(
                    trajectories, self.formula, self.metric
                )
                try:
                    data = self._training_set(trajectories, robustness, gamma_k)
                except StallError:
                    logger.warning(
                        "Stage %s stalled at level %.4f after resampling", k, gamma_k
                    )
                    stalled = True
                    break

            result = fit(
                proposal,
                data.features,
                data.actions,
                cem.optimizer,
                sample_weight=data.weights,
                reduction="sum",
            )
            log_weights = np.array([log_weight(t) for t in trajectories])
            below = int(np.sum(robustness < gamma_k))
            diagnostics = StageDiagnostics(
                stage=k,
                gamma_k=gamma_k,
                n_fail=int(np.sum(robustness <= cem.gamma)),
                n_elite=int(data.elite.size),
                n_below=below,
                mean_log_weight=float(np.mean(log_weights)),
                loss=result.final_loss,
                resampled=resampled,
            )
            stages.append(diagnostics)
            progress.info(
                "stage complete",
                stage=k,
                gamma_k=round(gamma_k, 6),
                n_fail=diagnostics.n_fail,
                n_elite=diagnostics.n_elite,
                loss=round(result.final_loss, 6),
            )
            proposal = proposal.with_params(result.params)
            if k in self.curve_stages:
                curves[k] = self._curve(proposal, gaps)

            if gamma_k <= cem.gamma:
                continue
            if gamma_k < best_level or (gamma_k == best_level and below > best_below):
                best_level, best_below, non_improving = gamma_k, below, 0
            else:
                non_improving += 1
            if non_improving >= cem.patience:
                logger.warning(
                    "Level stuck at %.4f for %s stages, stopping adaptation",
                    gamma_k,
                    non_improving,
                )
                stalled = True
                break

        final = self._sample(proposal, final_seq, cem.eval_samples)
        n_simulations += len(final)
        report = is_estimate(
            final, self.formula, self.metric, cem.gamma, method="adaptive"
        )
        report = report.model_copy(
            update={
                "seed": seed,
                "stage_thresholds": [s.gamma_k for s in stages],
                "stage_failure_fractions": [
                    s.n_fail / cem.samples_per_stage for s in stages
                ],
                "stalled": stalled,
                "n_simulations": n_simulations,
                "wall_clock_s": time.perf_counter() - started,
            }
        )
        return AdaptiveResult(
            report=report,
            stages=stages,
            proposal=proposal,
            curve=self._curve(proposal, gaps),
            curves=curves,
            final_trajectories=final,
        )


def adaptive_est(
    pem: PemModel,
    formula: Formula,
    scenario: ScenarioConfig,
    cem: CemConfig,
    metric: MetricSettings,
    seed: int = 0,
    curve_stages: Sequence[int] = (),
) -> AdaptiveResult:
    estimator = AdaptiveEstimator(pem, formula, scenario, cem, metric, curve_stages)
    return estimator.run(seed)

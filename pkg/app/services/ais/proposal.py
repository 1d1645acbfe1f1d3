import logging

import numpy as np

from app.models.config import CemConfig
from app.models.pem import MlpSpec
from app.models.reports import ProposalCurvePoint
from app.models.scenario import ScenarioConfig
from app.models.trajectory import Trajectory
from app.services.pem.network import FeedForwardScorer, PemModel
from app.services.pem.training import train_scorer
from app.services.sim.dynamics import KinematicBatch
from app.services.sim.rollout import simulate
from app.services.sim.sources import PemSource

logger = logging.getLogger(__name__)

PROPOSAL_SPEC = MlpSpec(widths=(32, 32, 1), activation="relu")


class ProposalModel(FeedForwardScorer):
    """Detection probability as a function of the inter-vehicle gap only."""

    kind = "proposal"

    @classmethod
    def untrained(cls) -> "ProposalModel":
        return cls(PROPOSAL_SPEC, 1)

    def at_gaps(self, gaps: np.ndarray) -> np.ndarray:
        return self.predict(np.asarray(gaps, dtype=float).reshape(-1, 1))


def adaptable_states(
    gaps: np.ndarray, braking: np.ndarray | None, emergency_range: float | None
) -> np.ndarray:
    """States at which a detection can still start emergency braking."""
    gaps = np.asarray(gaps, dtype=float)
    mask = np.ones(gaps.shape, dtype=bool)
    if emergency_range is not None:
        mask &= gaps < emergency_range
    if braking is not None:
        mask &= ~np.asarray(braking, dtype=bool)
    return mask


class ProposalSource:
    """Detection sampler built on a proposal model.

    With a target pem the proposal is only consulted where a detection can
    still start braking; the pem's probability is used everywhere else. With
    ``attenuate_only`` the sampler never detects more readily than the pem.
    """

    def __init__(
        self,
        proposal: ProposalModel,
        target: PemSource | None = None,
        emergency_range: float | None = None,
        attenuate_only: bool = False,
    ):
        self.proposal = proposal
        self.target = target
        self.emergency_range = emergency_range
        self.attenuate_only = attenuate_only

    def _blend(
        self, gaps: np.ndarray, braking: np.ndarray | None, p: np.ndarray
    ) -> np.ndarray:
        q = self.proposal.at_gaps(gaps)
        if self.attenuate_only:
            q = np.minimum(q, p)
        return np.where(adaptable_states(gaps, braking, self.emergency_range), q, p)

    def probabilities(self, batch: KinematicBatch) -> np.ndarray:
        if self.target is None:
            return self.proposal.at_gaps(batch.gap)
        p = self.target.probabilities(batch)
        return self._blend(batch.gap, batch.braking, p)

    def at_gaps(self, gaps: np.ndarray) -> np.ndarray:
        """Sampling probability at each gap for a car that is not yet braking."""
        gaps = np.asarray(gaps, dtype=float)
        if self.target is None:
            return self.proposal.at_gaps(gaps)
        return self._blend(gaps, None, self.target.at_gaps(gaps))


def visited_gaps(trajectories: list[Trajectory]) -> np.ndarray:
    """Gaps of every state at which an action was drawn."""
    return np.concatenate([traj.gap[:-1] for traj in trajectories])


def rollout_seeds(seq: np.random.SeedSequence, n: int) -> list[int]:
    return [int(s) for s in seq.generate_state(n)]


def pretrain_proposal(
    pem: PemModel,
    scenario: ScenarioConfig,
    cem: CemConfig,
    seed: int | np.random.SeedSequence = 0,
) -> ProposalModel:
    """Fit the proposal to the pem's detection probabilities on visited states.

    States come from ``cem.pretrain_samples`` rollouts sampled from the pem
    itself; the pem probability at each state is the (soft) label.
    """
    if isinstance(seed, np.random.SeedSequence):
        seq = seed
    else:
        seq = np.random.SeedSequence(seed)
    sample_seq, init_seq = seq.spawn(2)
    target = PemSource(pem)
    trajectories = simulate(
        target, target, scenario, rollout_seeds(sample_seq, cem.pretrain_samples)
    )
    gaps = visited_gaps(trajectories)
    labels = target.at_gaps(gaps)

    proposal, result = train_scorer(
        ProposalModel, gaps[:, None], labels, PROPOSAL_SPEC, cem.optimizer, init_seq
    )
    logger.debug(
        "Pre-trained proposal on %s states: loss %.5f -> %.5f",
        len(gaps),
        result.initial_loss,
        result.final_loss,
    )
    return proposal  # type: ignore[return-value]


def proposal_curve(
    proposal: ProposalModel,
    pem: PemModel,
    gaps: np.ndarray,
    sampler: ProposalSource | None = None,
) -> list[ProposalCurvePoint]:
    """Network, sampler and pem detection probabilities along a gap grid.

    Without a sampler the sampled probability is the network's own.
    """
    gaps = np.asarray(gaps, dtype=float)
    q = proposal.at_gaps(gaps)
    s = q if sampler is None else sampler.at_gaps(gaps)
    p = PemSource(pem).at_gaps(gaps)
    return [
        ProposalCurvePoint(
            gap_m=float(g), proposal_p=float(qi), sampler_p=float(si), pem_p=float(pi)
        )
        for g, qi, si, pi in zip(gaps, q, s, p, strict=True)
    ]


def default_gap_grid(scenario: ScenarioConfig, points: int = 101) -> np.ndarray:
    return np.linspace(0.0, scenario.initial_gap, points)

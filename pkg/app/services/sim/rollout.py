import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.exceptions import ArgumentError
from app.models.scenario import ScenarioConfig
from app.models.trajectory import (
    DIST,
    EGO_POS,
    EGO_SPEED,
    LEAD_POS,
    LEAD_SPEED,
    Trajectory,
)
from app.services.pem.network import clamp_probability
from app.services.sim.dynamics import KinematicBatch, advance
from app.services.sim.sources import DetectionSource
from app.services.stl.trace import Trace

logger = logging.getLogger(__name__)


@dataclass
class KinematicHistory:
    """State arrays of shape (batch, T)."""

    ego_pos: np.ndarray
    ego_speed: np.ndarray
    lead_pos: np.ndarray
    lead_speed: np.ndarray
    braking: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.lead_pos - self.ego_pos

    def channels(self) -> dict[str, np.ndarray]:
        return {
            DIST: self.gap,
            EGO_SPEED: self.ego_speed,
            LEAD_SPEED: self.lead_speed,
            EGO_POS: self.ego_pos,
            LEAD_POS: self.lead_pos,
        }

    def batch_at(
        self, step: int, rows: slice | np.ndarray = slice(None)
    ) -> KinematicBatch:
        return KinematicBatch(
            step=step,
            ego_pos=self.ego_pos[rows, step],
            ego_speed=self.ego_speed[rows, step],
            lead_pos=self.lead_pos[rows, step],
            lead_speed=self.lead_speed[rows, step],
            braking=self.braking[rows, step],
        )


Decide = Callable[[int, KinematicBatch], np.ndarray]


def _run(
    cfg: ScenarioConfig, size: int, decide: Decide
) -> tuple[KinematicHistory, np.ndarray]:
    shape = (size, cfg.horizon)
    history = KinematicHistory(
        ego_pos=np.empty(shape),
        ego_speed=np.empty(shape),
        lead_pos=np.empty(shape),
        lead_speed=np.empty(shape),
        braking=np.empty(shape, dtype=bool),
    )
    actions = np.empty((size, cfg.n_actions), dtype=bool)

    batch = KinematicBatch.initial(cfg, size)
    for t in range(cfg.horizon):
        history.ego_pos[:, t] = batch.ego_pos
        history.ego_speed[:, t] = batch.ego_speed
        history.lead_pos[:, t] = batch.lead_pos
        history.lead_speed[:, t] = batch.lead_speed
        history.braking[:, t] = batch.braking
        if t == cfg.n_actions:
            break
        actions[:, t] = decide(t, batch)
        batch = advance(batch, actions[:, t], cfg)
    return history, actions


def replay(actions: np.ndarray, cfg: ScenarioConfig) -> KinematicHistory:
    """States reached by fixed action sequences of shape (batch, T-1)."""
    actions = np.atleast_2d(np.asarray(actions, dtype=bool))
    if actions.shape[1] != cfg.n_actions:
        raise ArgumentError(
            f"expected {cfg.n_actions} actions per sequence, got {actions.shape[1]}"
        )
    history, _ = _run(cfg, actions.shape[0], lambda t, _batch: actions[:, t])
    return history


def realized(probabilities: np.ndarray, detected: np.ndarray) -> np.ndarray:
    """Probability of the action that was taken: p if detected, else 1 - p."""
    return clamp_probability(np.where(detected, probabilities, 1.0 - probabilities))


def target_log_likelihood(
    history: KinematicHistory, actions: np.ndarray, target: DetectionSource
) -> np.ndarray:
    """Per-sequence log p(actions) under the target, shape (batch,)."""
    total = np.zeros(actions.shape[0])
    for t in range(actions.shape[1]):
        p = target.probabilities(history.batch_at(t))
        total += np.log(realized(p, actions[:, t]))
    return total


def simulate(
    sampler: DetectionSource,
    target: DetectionSource,
    cfg: ScenarioConfig,
    seeds: Sequence[int],
) -> list[Trajectory]:
    """Vectorized rollouts, one independent random stream per seed.

    Detection at each step is drawn from ``sampler``; both the sampler's and
    the target's probability of the realized action are recorded.
    """
    size = len(seeds)
    if size == 0:
        return []
    uniforms = np.stack(
        [np.random.default_rng(seed).random(cfg.n_actions) for seed in seeds]
    )
    proposal_p = np.empty((size, cfg.n_actions))
    target_p = np.empty((size, cfg.n_actions))

    def decide(t: int, batch: KinematicBatch) -> np.ndarray:
        q = sampler.probabilities(batch)
        p = q if target is sampler else target.probabilities(batch)
        detected = uniforms[:, t] < q
        proposal_p[:, t] = realized(q, detected)
        target_p[:, t] = realized(p, detected)
        return detected

    history, actions = _run(cfg, size, decide)
    return [
        Trajectory(
            ego_pos=history.ego_pos[i],
            ego_speed=history.ego_speed[i],
            lead_pos=history.lead_pos[i],
            lead_speed=history.lead_speed[i],
            actions=actions[i],
            target_p=target_p[i],
            proposal_p=proposal_p[i],
            braking=history.braking[i],
            seed=int(seeds[i]),
        )
        for i in range(size)
    ]


def rollout(
    sampler: DetectionSource, target: DetectionSource, cfg: ScenarioConfig, seed: int
) -> Trajectory:
    return simulate(sampler, target, cfg, [seed])[0]


def rollout_log_probability(
    trajectory: Trajectory, which: Literal["target", "proposal"] = "target"
) -> float:
    """log prod_t of the realized-action probabilities of one stream."""
    if which not in ("target", "proposal"):
        raise ArgumentError(f"unknown probability stream '{which}'")
    stream = trajectory.target_p if which == "target" else trajectory.proposal_p
    if stream is None:
        raise ArgumentError(f"trajectory has no {which} probability stream")
    return float(np.sum(np.log(stream)))


def trajectory_trace(trajectory: Trajectory, dt: float) -> Trace:
    return Trace(trajectory.channels(), dt)

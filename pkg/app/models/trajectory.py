from dataclasses import dataclass, field
from typing import Any

import numpy as np

# Channel names exposed to formulas and trace files
DIST = "dist_m"
EGO_SPEED = "ego_speed_mps"
LEAD_SPEED = "lead_speed_mps"
EGO_POS = "ego_pos_m"
LEAD_POS = "lead_pos_m"
CHANNELS = (DIST, EGO_SPEED, LEAD_SPEED, EGO_POS, LEAD_POS)


@dataclass
class Trajectory:
    """One rollout: T states, T-1 detection actions and their likelihoods.

    target_p and proposal_p hold the probability of the action that was
    actually taken at each step, under the pem and the sampler respectively.
    """

    ego_pos: np.ndarray
    ego_speed: np.ndarray
    lead_pos: np.ndarray
    lead_speed: np.ndarray
    actions: np.ndarray
    target_p: np.ndarray | None = None
    proposal_p: np.ndarray | None = None
    braking: np.ndarray | None = None
    seed: int | None = None
    robustness: dict[Any, float] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        n_states = len(self.ego_pos)
        if n_states < 2:
            raise ValueError("a trajectory needs at least two states")
        for name in ("ego_speed", "lead_pos", "lead_speed"):
            if len(getattr(self, name)) != n_states:
                raise ValueError(f"{name} length differs from ego_pos")
        if len(self.actions) != n_states - 1:
            raise ValueError("expected one action per transition")
        for name in ("target_p", "proposal_p"):
            stream = getattr(self, name)
            if stream is not None and len(stream) != n_states - 1:
                raise ValueError(f"{name} length differs from actions")

    @property
    def horizon(self) -> int:
        return len(self.ego_pos)

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


def stack_channels(trajectories: list[Trajectory]) -> dict[str, np.ndarray]:
    """Channel arrays of shape (batch, T) for vectorized robustness."""
    if not trajectories:
        return {}
    per_traj = [traj.channels() for traj in trajectories]
    return {name: np.stack([ch[name] for ch in per_traj]) for name in per_traj[0]}

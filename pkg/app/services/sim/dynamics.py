from dataclasses import dataclass

import numpy as np

from app.models.scenario import Action, ScenarioConfig, SimState


@dataclass(frozen=True)
class KinematicBatch:
    """States of a batch of independent rollouts at the same step."""

    step: int
    ego_pos: np.ndarray
    ego_speed: np.ndarray
    lead_pos: np.ndarray
    lead_speed: np.ndarray
    braking: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.lead_pos - self.ego_pos

    @property
    def size(self) -> int:
        return len(self.ego_pos)

    @classmethod
    def initial(cls, cfg: ScenarioConfig, size: int) -> "KinematicBatch":
        return cls(
            step=0,
            ego_pos=np.zeros(size),
            ego_speed=np.full(size, cfg.initial_speed),
            lead_pos=np.full(size, cfg.initial_gap),
            lead_speed=np.full(size, cfg.initial_speed),
            braking=np.zeros(size, dtype=bool),
        )

    @classmethod
    def from_state(cls, state: SimState) -> "KinematicBatch":
        return cls(
            step=state.step,
            ego_pos=np.array([state.ego_pos]),
            ego_speed=np.array([state.ego_speed]),
            lead_pos=np.array([state.lead_pos]),
            lead_speed=np.array([state.lead_speed]),
            braking=np.array([state.braking]),
        )

    def to_state(self, index: int = 0) -> SimState:
        return SimState(
            step=self.step,
            ego_pos=float(self.ego_pos[index]),
            ego_speed=float(self.ego_speed[index]),
            lead_pos=float(self.lead_pos[index]),
            lead_speed=float(self.lead_speed[index]),
            braking=bool(self.braking[index]),
        )


def advance(
    batch: KinematicBatch, detected: np.ndarray, cfg: ScenarioConfig
) -> KinematicBatch:
    """One explicit Euler step for every rollout in the batch.

    Positions move with the speeds held at the start of the step. Emergency
    braking starts the first time the obstacle is detected inside the
    emergency range and holds for the rest of the rollout. Before that the ego
    tracks the target speed under an acceleration limit.
    """
    dt = cfg.dt
    detected = np.asarray(detected, dtype=bool)

    lead_pos = batch.lead_pos + batch.lead_speed * dt
    ego_pos = np.minimum(batch.ego_pos + batch.ego_speed * dt, lead_pos)

    lead_speed = batch.lead_speed
    if batch.step >= cfg.lead_brake_step:
        lead_speed = np.maximum(lead_speed - cfg.lead_deceleration * dt, 0.0)

    brake = batch.braking | (detected & (batch.gap < cfg.emergency_range))
    tracking = np.clip(
        cfg.speed_gain * (cfg.target_speed - batch.ego_speed),
        -cfg.max_acceleration,
        cfg.max_acceleration,
    )
    ego_speed = np.where(
        brake,
        np.maximum(batch.ego_speed - cfg.ego_deceleration * dt, 0.0),
        np.maximum(batch.ego_speed + tracking * dt, 0.0),
    )
    return KinematicBatch(
        step=batch.step + 1,
        ego_pos=ego_pos,
        ego_speed=ego_speed,
        lead_pos=lead_pos,
        lead_speed=lead_speed,
        braking=brake,
    )


def step(state: SimState, action: Action, cfg: ScenarioConfig) -> SimState:
    nxt = advance(KinematicBatch.from_state(state), np.array([action.detected]), cfg)
    return nxt.to_state()

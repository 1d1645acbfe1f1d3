from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator

KMH_70 = 19.44

# Short-horizon geometry whose action space can be enumerated exhaustively.
SMALL_PRESET: dict[str, float | int] = {
    "horizon": 12,
    "dt": 0.3,
    "initial_gap": 10.2,
    "lead_brake_step": 0,
    "lead_deceleration": 3.5,
}


class ScenarioConfig(BaseModel):
    """Two-car braking scenario: a lead vehicle brakes ahead of the ego car."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    horizon: int = Field(default=100, ge=2, description="Number of states T")
    dt: float = Field(default=0.05, gt=0)
    initial_speed: float = Field(default=KMH_70, gt=0)
    initial_gap: float = Field(default=15.0, gt=0)
    lead_brake_step: int = Field(default=20, ge=0)
    lead_deceleration: float = Field(default=4.0, gt=0)
    ego_deceleration: float = Field(default=8.0, gt=0)
    emergency_range: float = Field(default=10.0, gt=0)
    crash_threshold: float = Field(default=2.0, gt=0)
    target_speed: float = Field(default=KMH_70, gt=0)
    max_acceleration: float = Field(default=3.0, gt=0)
    speed_gain: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_geometry(self) -> "ScenarioConfig":
        if not self.crash_threshold < self.emergency_range < self.initial_gap:
            raise ValueError(
                "expected crash_threshold < emergency_range < initial_gap, got "
                f"{self.crash_threshold}, {self.emergency_range}, {self.initial_gap}"
            )
        return self

    @classmethod
    def small(cls, **overrides) -> "ScenarioConfig":
        return cls(**{**SMALL_PRESET, **overrides})

    def with_horizon(self, horizon: int) -> "ScenarioConfig":
        return type(self)(**{**self.model_dump(), "horizon": horizon})

    @property
    def n_actions(self) -> int:
        return self.horizon - 1


@dataclass(frozen=True)
class SimState:
    step: int
    ego_pos: float
    ego_speed: float
    lead_pos: float
    lead_speed: float
    braking: bool = False

    @property
    def gap(self) -> float:
        return self.lead_pos - self.ego_pos

    @classmethod
    def initial(cls, cfg: ScenarioConfig) -> "SimState":
        return cls(
            step=0,
            ego_pos=0.0,
            ego_speed=cfg.initial_speed,
            lead_pos=cfg.initial_gap,
            lead_speed=cfg.initial_speed,
        )


@dataclass(frozen=True)
class Action:
    detected: bool

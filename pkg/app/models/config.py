from enum import Enum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.scenario import ScenarioConfig

PROBABILITY_CLAMP = 1e-6


class Metric(str, Enum):
    """Robustness semantics used to score a trace."""

    CLASSICAL = "classical"
    AGM = "agm"
    SMOOTH = "smooth"


class MetricSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    metric: Metric = Metric.CLASSICAL
    smooth_k: float = Field(default=10.0, gt=0)
    agm_scale: float = Field(
        default=100.0, gt=0, description="Default predicate normalization (metres)"
    )

    @property
    def cache_key(self) -> str:
        if self.metric is Metric.SMOOTH:
            return f"smooth:{self.smooth_k}"
        return self.metric.value


class OptimizerConfig(BaseModel):
    """Full-batch Adam settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    epochs: int = Field(default=300, ge=1)


class CemConfig(BaseModel):
    """Adaptive importance sampling (cross-entropy) settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    stages: int = Field(default=10, ge=1)
    samples_per_stage: int = Field(default=100, ge=2)
    eval_samples: int = Field(default=100, ge=1)
    quantile: float = Field(default=0.95)
    quantile_tail: Literal["upper", "lower"] = "lower"
    alpha: float = Field(default=0.1, ge=0, le=1)
    gamma: float = 0.0
    pretrain_samples: int = Field(default=100, ge=1)
    patience: int = Field(default=3, ge=1)
    attenuate_only: bool = True
    optimizer: OptimizerConfig = OptimizerConfig(learning_rate=1e-2, epochs=500)

    @field_validator("quantile")
    @classmethod
    def validate_quantile(cls, value: float) -> float:
        if not 0.95 <= value < 1.0:
            raise ValueError("quantile must lie in [0.95, 1.0)")
        return value


class PemSourceConfig(BaseModel):
    """Where the target perception model comes from: a model file or a planted one."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    path: Path | None = None
    constant: float | None = Field(default=None, gt=0, lt=1)
    gap_weight: float = -0.25
    bias: float = 6.5

    @model_validator(mode="after")
    def check_single_source(self) -> "PemSourceConfig":
        if self.path is not None and self.constant is not None:
            raise ValueError("set either a pem path or a constant pem, not both")
        return self


class RunConfig(BaseModel):
    """One experiment: scenario, sampler, metric, pem and seeds."""

    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioConfig = ScenarioConfig()
    cem: CemConfig = CemConfig()
    metric: MetricSettings = MetricSettings()
    pem: PemSourceConfig = PemSourceConfig()
    method: Literal["mc", "naive-flat", "adaptive"] = "adaptive"
    samples: int = Field(default=100, ge=1)
    flat_probability: float = Field(default=0.5, gt=0, lt=1)
    formula: str | None = None
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: Path = Path("results")
    curve_stages: list[int] = Field(default_factory=list)

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one seed is required")
        if any(seed < 0 for seed in value):
            raise ValueError("seeds must be non-negative")
        return value

    @model_validator(mode="after")
    def check_pem_file(self) -> "RunConfig":
        if self.pem.path is not None and not self.pem.path.is_file():
            raise ValueError(f"pem file {self.pem.path} does not exist")
        bad = [k for k in self.curve_stages if not 1 <= k <= self.cem.stages]
        if bad:
            raise ValueError(f"curve stages {bad} outside 1..{self.cem.stages}")
        return self

    @property
    def snapshot_stages(self) -> list[int]:
        return self.curve_stages or [self.cem.stages]

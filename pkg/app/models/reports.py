from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field

Fraction = Annotated[float, Field(ge=0, le=1)]


class EstimationReport(BaseModel):
    """Failure-probability estimate for one batch of rollouts."""

    model_config = ConfigDict(extra="forbid")

    method: Literal["mc", "naive-flat", "adaptive", "is"]
    metric: Literal["classical", "agm", "smooth"]
    seed: Annotated[int, Field(ge=0)] | None = None
    mu_hat: float = Field(ge=0, le=1)
    log10_mu_hat: float | None = None
    standard_error: float = Field(ge=0)
    # Stays finite when the standard error itself underflows to 0
    log10_standard_error: float | None = None
    relative_error: Annotated[float, Field(ge=0)] | None = None
    mc_samples_for_same_error: Annotated[int, Field(ge=1)] | None = None
    failures: int = Field(ge=0)
    total: int = Field(ge=0)
    failure_fraction: Fraction
    mean_failure_nll: Annotated[float, Field(ge=0)] | None = None
    gamma: float = 0.0
    stage_thresholds: list[float] = Field(default_factory=list)
    stage_failure_fractions: list[Fraction] = Field(default_factory=list)
    stalled: bool = False
    n_simulations: int = Field(default=0, ge=0)
    # Logged, never written: result files must be identical across re-runs
    wall_clock_s: float = Field(default=0.0, exclude=True)


class StageDiagnostics(BaseModel):
    stage: int
    gamma_k: float
    n_fail: int
    n_elite: int
    n_below: int = 0
    mean_log_weight: float
    loss: float | None = None
    resampled: bool = False


class AggregateReport(BaseModel):
    """Mean estimate across seeds, standard error in brackets as in a results table."""

    method: str
    metric: str
    seeds: list[int]
    mean_mu_hat: float
    standard_error: float
    mean_failure_fraction: float
    mean_failure_nll: float | None = None
    stalled_runs: int = 0
    oracle_mu: float | None = None


class EnumerationResult(BaseModel):
    mu: float = Field(ge=0, le=1)
    log10_mu: float | None = None
    n_fail_sequences: int = Field(ge=0)
    n_total: int = Field(ge=1)
    mean_failure_nll: float | None = None
    table: list[tuple[str, float, float]] | None = Field(default=None, exclude=True)


class ProposalCurvePoint(BaseModel):
    gap_m: float
    proposal_p: float
    pem_p: float
    sampler_p: float

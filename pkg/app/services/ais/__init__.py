from .cem import (
    AdaptiveEstimator,
    AdaptiveResult,
    adaptive_est,
    cem_threshold,
    elite_quota,
    kl_training_set,
    select_elite,
    smoothed_kl_loss,
    smoothed_weights,
)
from .estimators import (
    batch_robustness_of,
    is_estimate,
    log_weight,
    mc_estimate,
    required_samples,
)
from .proposal import (
    ProposalModel,
    ProposalSource,
    adaptable_states,
    pretrain_proposal,
    proposal_curve,
)

__all__ = [
    "AdaptiveEstimator",
    "AdaptiveResult",
    "ProposalModel",
    "ProposalSource",
    "adaptable_states",
    "adaptive_est",
    "batch_robustness_of",
    "cem_threshold",
    "elite_quota",
    "is_estimate",
    "kl_training_set",
    "log_weight",
    "mc_estimate",
    "pretrain_proposal",
    "proposal_curve",
    "required_samples",
    "select_elite",
    "smoothed_kl_loss",
    "smoothed_weights",
]

from .dynamics import KinematicBatch, advance, step
from .rollout import (
    KinematicHistory,
    replay,
    rollout,
    rollout_log_probability,
    simulate,
    target_log_likelihood,
    trajectory_trace,
)
from .sources import (
    ConstantSource,
    DetectionSource,
    PemSource,
    proposal_features,
    salient_matrix,
    salient_of_state,
)

__all__ = [
    "ConstantSource",
    "DetectionSource",
    "KinematicBatch",
    "KinematicHistory",
    "PemSource",
    "advance",
    "proposal_features",
    "replay",
    "rollout",
    "rollout_log_probability",
    "salient_matrix",
    "salient_of_state",
    "simulate",
    "step",
    "target_log_likelihood",
    "trajectory_trace",
]

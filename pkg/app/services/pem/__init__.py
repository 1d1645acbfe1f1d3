from .baselines import MODEL_KINDS, make_baseline
from .calibration import cross_validate
from .matching import MatchResult, assign, hungarian_match
from .metrics import bce, roc_auc
from .network import FeedForwardScorer, PemModel, clamp_probability
from .training import fit, train_pem

__all__ = [
    "MODEL_KINDS",
    "FeedForwardScorer",
    "MatchResult",
    "PemModel",
    "assign",
    "bce",
    "clamp_probability",
    "cross_validate",
    "fit",
    "hungarian_match",
    "make_baseline",
    "roc_auc",
    "train_pem",
]

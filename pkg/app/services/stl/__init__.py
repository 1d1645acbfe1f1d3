from .formula import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Pred,
    Predicate,
    TrueF,
    Until,
)
from .parser import format_formula, parse_formula
from .ranking import rank_trajectories, rank_values
from .robustness import (
    batch_robustness,
    eval_agm,
    eval_classical,
    eval_smooth,
    robustness,
    semantics_for,
)
from .trace import Trace

__all__ = [
    "Always",
    "And",
    "Eventually",
    "Formula",
    "Interval",
    "Not",
    "Or",
    "Pred",
    "Predicate",
    "Trace",
    "TrueF",
    "Until",
    "batch_robustness",
    "eval_agm",
    "eval_classical",
    "eval_smooth",
    "format_formula",
    "parse_formula",
    "rank_trajectories",
    "rank_values",
    "robustness",
    "semantics_for",
]

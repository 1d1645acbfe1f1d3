from .enumeration import (
    Enumerator,
    exact_event_probability,
    exact_is_expectation,
    exact_mu,
    perfect_proposal_mass,
)

__all__ = [
    "Enumerator",
    "exact_event_probability",
    "exact_is_expectation",
    "exact_mu",
    "perfect_proposal_mass",
]

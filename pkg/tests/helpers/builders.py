import math

import numpy as np

from app.models.config import MetricSettings
from app.models.scenario import ScenarioConfig
from app.models.trajectory import DIST, Trajectory
from app.services.oracle.enumeration import exact_mu
from app.services.pem.network import PemModel
from app.services.stl.formula import (
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
    never_closer_than,
)

CLASSICAL = MetricSettings()


def make_trajectory(
    gaps,
    target_p=None,
    proposal_p=None,
    actions=None,
) -> Trajectory:
    """A trajectory whose gap follows ``gaps``; speeds and the ego position stay 0."""
    gaps = np.asarray(gaps, dtype=float)
    n = len(gaps)
    return Trajectory(
        ego_pos=np.zeros(n),
        ego_speed=np.zeros(n),
        lead_pos=gaps.copy(),
        lead_speed=np.zeros(n),
        actions=np.ones(n - 1, dtype=bool) if actions is None else np.asarray(actions),
        target_p=None if target_p is None else np.asarray(target_p, dtype=float),
        proposal_p=None if proposal_p is None else np.asarray(proposal_p, dtype=float),
    )


def crash_formula(horizon: int, threshold: float = 2.0) -> Formula:
    return never_closer_than(DIST, threshold, horizon)


def random_formula(
    rng: np.random.Generator, channels: list[str], depth: int = 3
) -> Formula:
    """Random syntax tree with small intervals over the given channels."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.05:
            return TrueF()
        channel = channels[rng.integers(len(channels))]
        bound = float(rng.normal())
        if rng.random() < 0.5:
            return Pred(Predicate.geq(channel, bound))
        return Pred(Predicate.leq(channel, bound))

    kind = rng.integers(6)
    lo = int(rng.integers(0, 3))
    interval = Interval(lo, lo + int(rng.integers(0, 4)))

    def child() -> Formula:
        return random_formula(rng, channels, depth - 1)

    if kind == 0:
        return Not(child())
    if kind == 1:
        return And(child(), child())
    if kind == 2:
        return Or(child(), child())
    if kind == 3:
        return Always(interval, child())
    if kind == 4:
        return Eventually(interval, child())
    return Until(
        interval,
        child(),
        child(),
    )


def reference_classical(
    formula: Formula, signals: dict[str, np.ndarray], t: int
) -> float:
    """Direct recursion over the min/max definition, one step at a time."""
    if isinstance(formula, TrueF):
        return math.inf
    if isinstance(formula, Pred):
        return float(formula.predicate.margin(signals[formula.predicate.channel][t]))
    if isinstance(formula, Not):
        return -reference_classical(formula.operand, signals, t)
    if isinstance(formula, And):
        return min(
            reference_classical(formula.left, signals, t),
            reference_classical(formula.right, signals, t),
        )
    if isinstance(formula, Or):
        return max(
            reference_classical(formula.left, signals, t),
            reference_classical(formula.right, signals, t),
        )
    lo, hi = formula.interval.lo, formula.interval.hi
    window = range(t + lo, t + hi + 1)
    if isinstance(formula, Always):
        return min(reference_classical(formula.operand, signals, s) for s in window)
    if isinstance(formula, Eventually):
        return max(reference_classical(formula.operand, signals, s) for s in window)
    assert isinstance(formula, Until)
    best = -math.inf
    for s in window:
        held = min(
            reference_classical(formula.left, signals, u) for u in range(t, s + 1)
        )
        best = max(best, min(reference_classical(formula.right, signals, s), held))
    return best


def tuned_gap_pem(
    scenario: ScenarioConfig,
    formula: Formula,
    target_log10: float = -7.0,
    gap_weight: float = -0.25,
    iterations: int = 50,
) -> tuple[PemModel, float]:
    """Gap-logistic pem whose exact failure probability sits at 10**target_log10.

    Bisects the bias; the failure probability falls as the bias grows.
    """
    lo, hi = -10.0, 40.0
    for _ in range(iterations):
        bias = 0.5 * (lo + hi)
        pem = PemModel.gap_logistic(gap_weight, bias)
        result = exact_mu(pem, scenario, formula, CLASSICAL)
        log10_mu = result.log10_mu if result.log10_mu is not None else -math.inf
        if log10_mu > target_log10:
            lo = bias
        else:
            hi = bias
    bias = 0.5 * (lo + hi)
    pem = PemModel.gap_logistic(gap_weight, bias)
    return pem, exact_mu(pem, scenario, formula, CLASSICAL).mu

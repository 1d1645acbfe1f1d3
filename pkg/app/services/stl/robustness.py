"""Quantitative STL semantics evaluated over batches of signals.

Every node is turned into a robustness signal of shape (batch, L), where L is
the number of start steps at which the node is fully defined. Aggregations
over temporal windows run on ``sliding_window_view`` so a whole batch of
rollouts is scored in one pass.
"""

import logging
from collections.abc import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp

from app.core.exceptions import (
    HorizonError,
    NormalizationError,
    ParameterError,
    SchemaError,
)
from app.models.config import Metric, MetricSettings
from app.services.stl.formula import (
    Always,
    And,
    Eventually,
    Formula,
    Not,
    Or,
    Pred,
    Predicate,
    TrueF,
    Until,
)
from app.services.stl.trace import Trace

logger = logging.getLogger(__name__)

_NORMALIZATION_TOLERANCE = 1e-12


class ClassicalSemantics:
    true_value = np.inf

    def predicate(self, margin: np.ndarray, predicate: Predicate) -> np.ndarray:
        return margin

    def conj(self, values: np.ndarray) -> np.ndarray:
        return np.min(values, axis=-1)

    def disj(self, values: np.ndarray) -> np.ndarray:
        return np.max(values, axis=-1)

    def always(self, windows: np.ndarray) -> np.ndarray:
        return self.conj(windows)

    def eventually(self, windows: np.ndarray) -> np.ndarray:
        return self.disj(windows)


class AgmSemantics(ClassicalSemantics):
    """Arithmetic-geometric mean semantics over margins normalized to [-1, 1]."""

    true_value = 1.0

    def __init__(self, default_scale: float = 100.0) -> None:
        if default_scale <= 0:
            raise ParameterError(f"AGM scale must be positive, got {default_scale}")
        self.default_scale = default_scale

    def predicate(self, margin: np.ndarray, predicate: Predicate) -> np.ndarray:
        scale = predicate.scale or self.default_scale
        normalized = margin / scale
        if np.any(np.abs(normalized) > 1.0 + _NORMALIZATION_TOLERANCE):
            worst = float(np.max(np.abs(margin)))
            raise NormalizationError(
                f"margin {worst:g} of '{predicate.label}' exceeds scale {scale:g}"
            )
        return np.clip(normalized, -1.0, 1.0)

    def conj(self, values: np.ndarray) -> np.ndarray:
        all_positive = np.all(values > 0, axis=-1)
        geometric = np.expm1(np.mean(np.log1p(np.maximum(values, 0.0)), axis=-1))
        negative_mean = np.mean(np.minimum(values, 0.0), axis=-1)
        return np.where(all_positive, geometric, negative_mean)

    def disj(self, values: np.ndarray) -> np.ndarray:
        return -self.conj(-values)


class SmoothSemantics(ClassicalSemantics):
    """Log-sum-exp softmin for conjunction and always; cumulative eventually."""

    def __init__(self, k: float = 10.0) -> None:
        if not k > 0:
            raise ParameterError(f"smooth sharpness k must be positive, got {k}")
        self.k = k

    def conj(self, values: np.ndarray) -> np.ndarray:
        return -logsumexp(-self.k * values, axis=-1) / self.k

    def disj(self, values: np.ndarray) -> np.ndarray:
        return logsumexp(self.k * values, axis=-1) / self.k

    def eventually(self, windows: np.ndarray) -> np.ndarray:
        positive = np.maximum(windows, 0.0)
        cumulative = np.sum(positive, axis=-1)
        return np.where(np.any(windows > 0, axis=-1), cumulative, self.disj(windows))


Semantics = ClassicalSemantics


def semantics_for(metric: MetricSettings) -> Semantics:
    if metric.metric is Metric.AGM:
        return AgmSemantics(metric.agm_scale)
    if metric.metric is Metric.SMOOTH:
        return SmoothSemantics(metric.smooth_k)
    return ClassicalSemantics()


class SignalEvaluator:
    """Memoized bottom-up evaluation of one formula tree over a signal batch."""

    def __init__(self, semantics: Semantics, channels: Mapping[str, np.ndarray]):
        if not channels:
            raise SchemaError("no channels to evaluate against")
        self.semantics = semantics
        self.channels = {
            name: np.atleast_2d(np.asarray(values, dtype=float))
            for name, values in channels.items()
        }
        first = next(iter(self.channels.values()))
        self.batch_size, self.length = first.shape
        self._cache: dict[Formula, np.ndarray] = {}

    def signal(self, formula: Formula) -> np.ndarray:
        cached = self._cache.get(formula)
        if cached is None:
            cached = self._evaluate(formula)
            self._cache[formula] = cached
        return cached

    def _evaluate(self, formula: Formula) -> np.ndarray:
        sem = self.semantics
        if isinstance(formula, TrueF):
            return np.full((self.batch_size, self.length), sem.true_value)
        if isinstance(formula, Pred):
            name = formula.predicate.channel
            if name not in self.channels:
                raise SchemaError(
                    f"unknown channel '{name}', available: {sorted(self.channels)}"
                )
            margin = formula.predicate.margin(self.channels[name])
            return sem.predicate(margin, formula.predicate)
        if isinstance(formula, Not):
            return -self.signal(formula.operand)
        if isinstance(formula, And | Or):
            left, right = self.signal(formula.left), self.signal(formula.right)
            width = min(left.shape[-1], right.shape[-1])
            if isinstance(formula, And):
                return sem.conj(np.stack([left[:, :width], right[:, :width]], axis=-1))
            return -sem.conj(np.stack([-left[:, :width], -right[:, :width]], axis=-1))
        if isinstance(formula, Always | Eventually):
            child = self.signal(formula.operand)
            windows = self._windows(child, formula)
            if isinstance(formula, Always):
                return sem.always(windows)
            return sem.eventually(windows)
        if isinstance(formula, Until):
            return self._until(formula)
        raise SchemaError(f"unsupported formula node {type(formula).__name__}")

    def _windows(self, child: np.ndarray, formula: Always | Eventually) -> np.ndarray:
        interval = formula.interval
        if child.shape[-1] - interval.hi <= 0:
            raise HorizonError(
                f"interval [{interval.lo}, {interval.hi}] exceeds "
                f"trace length {self.length}"
            )
        return sliding_window_view(child[:, interval.lo :], interval.width, axis=-1)

    def _until(self, formula: Until) -> np.ndarray:
        sem = self.semantics
        lo, hi = formula.interval.lo, formula.interval.hi
        left, right = self.signal(formula.left), self.signal(formula.right)
        width = min(left.shape[-1], right.shape[-1]) - hi
        if width <= 0:
            raise HorizonError(
                f"until interval [{lo}, {hi}] exceeds trace length {self.length}"
            )
        terms = []
        for offset in range(lo, hi + 1):
            held = sem.conj(sliding_window_view(left, offset + 1, axis=-1)[:, :width])
            reached = right[:, offset : offset + width]
            terms.append(sem.conj(np.stack([reached, held], axis=-1)))
        return sem.disj(np.stack(terms, axis=-1))


def batch_robustness(
    channels: Mapping[str, np.ndarray],
    formula: Formula,
    semantics: Semantics,
    t: int = 0,
) -> np.ndarray:
    """Robustness at step t for every signal in a (batch, T) channel map."""
    evaluator = SignalEvaluator(semantics, channels)
    if t < 0 or t + formula.horizon() >= evaluator.length:
        raise HorizonError(
            f"formula needs {formula.horizon() + 1} steps from t={t}, "
            f"trace has {evaluator.length}"
        )
    return evaluator.signal(formula)[:, t]


def _scalar(trace: Trace, formula: Formula, semantics: Semantics, t: int) -> float:
    return float(batch_robustness(trace.batch(), formula, semantics, t)[0])


def eval_classical(trace: Trace, formula: Formula, t: int = 0) -> float:
    return _scalar(trace, formula, ClassicalSemantics(), t)


def eval_agm(trace: Trace, formula: Formula, t: int = 0, scale: float = 100.0) -> float:
    return _scalar(trace, formula, AgmSemantics(scale), t)


def eval_smooth(trace: Trace, formula: Formula, t: int = 0, k: float = 10.0) -> float:
    return _scalar(trace, formula, SmoothSemantics(k), t)


def robustness(
    trace: Trace, formula: Formula, metric: MetricSettings, t: int = 0
) -> float:
    return _scalar(trace, formula, semantics_for(metric), t)

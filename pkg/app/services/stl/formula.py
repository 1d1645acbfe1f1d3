from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.exceptions import ParameterError


@dataclass(frozen=True)
class Interval:
    """Inclusive window of step offsets [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 0 <= self.lo <= self.hi:
            raise ParameterError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class Predicate:
    """Signed margin on one channel; positive means satisfied.

    ``geq`` yields value - bound, ``leq`` yields bound - value. The optional
    scale normalizes margins into [-1, 1] for AGM semantics.
    """

    channel: str
    bound: float
    direction: Literal["geq", "leq"] = "geq"
    scale: float | None = None

    def __post_init__(self) -> None:
        if self.scale is not None and self.scale <= 0:
            raise ParameterError(f"predicate scale must be positive, got {self.scale}")
        if self.direction not in ("geq", "leq"):
            raise ParameterError(f"unknown predicate direction '{self.direction}'")

    @classmethod
    def geq(cls, channel: str, bound: float, scale: float | None = None) -> "Predicate":
        return cls(channel, float(bound), "geq", scale)

    @classmethod
    def leq(cls, channel: str, bound: float, scale: float | None = None) -> "Predicate":
        return cls(channel, float(bound), "leq", scale)

    @property
    def label(self) -> str:
        op = ">=" if self.direction == "geq" else "<="
        return f"{self.channel} {op} {self.bound:g}"

    def margin(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.direction == "geq":
            return values - self.bound
        return self.bound - values


class Formula:
    """Base of the STL syntax tree."""

    def children(self) -> tuple["Formula", ...]:
        return ()

    def horizon(self) -> int:
        """Number of steps past t the formula needs to be evaluated at t."""
        return max((child.horizon() for child in self.children()), default=0)

    def channels(self) -> set[str]:
        found: set[str] = set()
        for child in self.children():
            found |= child.channels()
        return found


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Pred(Formula):
    predicate: Predicate

    def channels(self) -> set[str]:
        return {self.predicate.channel}


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.operand,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    """Disjunction, evaluated as not(and(not left, not right))."""

    left: Formula
    right: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    operand: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.operand,)

    def horizon(self) -> int:
        return self.interval.hi + self.operand.horizon()


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    operand: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.operand,)

    def horizon(self) -> int:
        return self.interval.hi + self.operand.horizon()


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula

    def children(self) -> tuple[Formula, ...]:
        return (self.left, self.right)

    def horizon(self) -> int:
        return self.interval.hi + max(self.left.horizon(), self.right.horizon())


def never_closer_than(channel: str, threshold: float, horizon: int) -> Formula:
    """Always over the whole rollout: channel >= threshold."""
    return Always(Interval(0, horizon - 1), Pred(Predicate.geq(channel, threshold)))

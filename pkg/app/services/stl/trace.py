from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from app.core.exceptions import SchemaError


@dataclass(frozen=True)
class Trace:
    """A discrete-time signal: named channels sampled every ``dt`` seconds."""

    channels: Mapping[str, np.ndarray]
    dt: float = 1.0

    def __post_init__(self) -> None:
        if not self.channels:
            raise SchemaError("trace has no channels")
        lengths = {name: len(values) for name, values in self.channels.items()}
        if len(set(lengths.values())) != 1:
            raise SchemaError(f"trace channels differ in length: {lengths}")
        if next(iter(lengths.values())) == 0:
            raise SchemaError("trace is empty")

    @classmethod
    def from_values(cls, dt: float = 1.0, **channels: list[float]) -> "Trace":
        arrays = {name: np.asarray(v, dtype=float) for name, v in channels.items()}
        return cls(arrays, dt)

    @property
    def length(self) -> int:
        return len(next(iter(self.channels.values())))

    def batch(self) -> dict[str, np.ndarray]:
        return {
            name: np.asarray(v, dtype=float)[None, :]
            for name, v in self.channels.items()
        }

from collections.abc import Sequence

import numpy as np

from app.models.config import MetricSettings
from app.services.stl.formula import Formula
from app.services.stl.robustness import batch_robustness, semantics_for
from app.services.stl.trace import Trace


def rank_values(values: Sequence[float] | np.ndarray) -> list[tuple[int, float]]:
    """Ascending stable order; ties keep their original index order."""
    array = np.asarray(values, dtype=float)
    order = np.argsort(array, kind="stable")
    return [(int(i), float(array[i])) for i in order]


def trace_robustness(trace: Trace, formula: Formula, metric: MetricSettings) -> float:
    return float(batch_robustness(trace.batch(), formula, semantics_for(metric))[0])


def rank_trajectories(
    traces: Sequence[Trace], formula: Formula, metric: MetricSettings
) -> list[tuple[int, float]]:
    """Least safe first."""
    return rank_values([trace_robustness(t, formula, metric) for t in traces])

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from app.models.pem import (
    CATEGORIES,
    LOC_X,
    LOC_Z,
    OCCLUSIONS,
    ROT_Y,
    SALIENT_DIM,
    DetectionLogEntry,
)
from app.services.pem.network import clamp_probability


def _default_weights() -> list[float]:
    weights = np.zeros(SALIENT_DIM)
    # pedestrians and cyclists are harder to see
    weights[CATEGORIES.index("pedestrian")] = -0.8
    weights[CATEGORIES.index("cyclist")] = -0.6
    weights[len(CATEGORIES) + OCCLUSIONS.index("partial")] = -0.7
    weights[len(CATEGORIES) + OCCLUSIONS.index("mostly")] = -1.8
    weights[LOC_X] = -0.02
    weights[LOC_Z] = -0.06
    weights[ROT_Y] = 0.1
    return weights.tolist()


class PlantedLogistic(BaseModel):
    """Ground-truth generator: p(detected | x) = sigmoid(w . x + b)."""

    weights: list[float] = Field(default_factory=_default_weights)
    bias: float = 3.0

    def probability(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return clamp_probability(expit(X @ np.asarray(self.weights) + self.bias))


def sample_salient(n: int, rng: np.random.Generator) -> tuple[np.ndarray, list[dict]]:
    """Random obstacles: category, occlusion, camera-frame location, heading."""
    categories = rng.integers(0, len(CATEGORIES), size=n)
    occlusions = rng.choice(len(OCCLUSIONS), size=n, p=[0.6, 0.25, 0.15])
    loc = np.column_stack(
        [
            rng.uniform(-15.0, 15.0, n),
            rng.uniform(-1.0, 2.5, n),
            rng.uniform(2.0, 70.0, n),
        ]
    )
    rot_y = rng.uniform(-np.pi, np.pi, n)

    X = np.zeros((n, SALIENT_DIM))
    X[np.arange(n), categories] = 1.0
    X[np.arange(n), len(CATEGORIES) + occlusions] = 1.0
    X[:, LOC_X : LOC_Z + 1] = loc
    X[:, ROT_Y] = rot_y
    fields = [
        {
            "category": CATEGORIES[c],
            "occlusion": OCCLUSIONS[o],
            "loc": tuple(float(v) for v in loc[i]),
            "rot_y": float(rot_y[i]),
        }
        for i, (c, o) in enumerate(zip(categories, occlusions, strict=True))
    ]
    return X, fields


def generate_log(
    n: int, planted: PlantedLogistic, seed: int = 0
) -> tuple[list[DetectionLogEntry], np.ndarray]:
    """Detection-log entries drawn from ``planted`` plus their true probabilities."""
    rng = np.random.default_rng(seed)
    X, fields = sample_salient(n, rng)
    p = planted.probability(X)
    detected = rng.random(n) < p
    entries = [
        DetectionLogEntry(**fields[i], detected=bool(detected[i])) for i in range(n)
    ]
    return entries, p

from typing import Protocol

import numpy as np

from app.models.pem import CATEGORIES, LOC_Z, OCCLUSIONS, SALIENT_DIM
from app.models.scenario import SimState
from app.services.pem.network import PemModel, clamp_probability
from app.services.sim.dynamics import KinematicBatch

_CAR = CATEGORIES.index("car")
_UNOCCLUDED = len(CATEGORIES) + OCCLUSIONS.index("none")


class DetectionSource(Protocol):
    """Per-state probability that the obstacle is detected."""

    def probabilities(self, batch: KinematicBatch) -> np.ndarray: ...


def salient_matrix(gaps: np.ndarray) -> np.ndarray:
    """Salient rows for the lead car straight ahead at the given distances."""
    gaps = np.atleast_1d(np.asarray(gaps, dtype=float))
    X = np.zeros((len(gaps), SALIENT_DIM))
    X[:, _CAR] = 1.0
    X[:, _UNOCCLUDED] = 1.0
    X[:, LOC_Z] = gaps
    return X


def salient_of_state(state: SimState) -> np.ndarray:
    """Car, unoccluded, at (0, 0, gap) in the camera frame, heading 0."""
    return salient_matrix(np.array([state.gap]))[0]


def proposal_features(state: SimState) -> np.ndarray:
    """The proposal sees only the distance between the vehicles."""
    return np.array([state.gap])


class PemSource:
    def __init__(self, pem: PemModel):
        self.pem = pem

    def probabilities(self, batch: KinematicBatch) -> np.ndarray:
        return self.pem.predict(salient_matrix(batch.gap))

    def at_gaps(self, gaps: np.ndarray) -> np.ndarray:
        return self.pem.predict(salient_matrix(gaps))


class ConstantSource:
    """State-independent detection probability, e.g. the flat 0.5 sampler."""

    def __init__(self, probability: float):
        self.probability = float(clamp_probability(probability))

    def probabilities(self, batch: KinematicBatch) -> np.ndarray:
        return np.full(batch.size, self.probability)

from collections.abc import Sequence
from typing import Literal

from app.core.exceptions import ArgumentError
from app.models.config import OptimizerConfig
from app.models.pem import DetectionRecord, MlpSpec
from app.services.pem.network import PemModel
from app.services.pem.training import records_to_arrays, train_pem

ModelKind = Literal["ml-nn", "logistic", "guess-mu"]
MODEL_KINDS: tuple[ModelKind, ...] = ("ml-nn", "logistic", "guess-mu")


def make_baseline(
    kind: str,
    records: Sequence[DetectionRecord],
    optimizer: OptimizerConfig,
    seed: int = 0,
    spec: MlpSpec | None = None,
) -> PemModel:
    """Fit one of the comparison models on the given records.

    guess-mu predicts the training detection rate everywhere; logistic is a
    network without hidden layers; ml-nn uses ``spec`` (default 3x20 ReLU).
    """
    if kind == "guess-mu":
        X, y = records_to_arrays(records)
        return PemModel.constant(float(y.mean()), input_dim=X.shape[1])
    if kind == "logistic":
        return train_pem(records, MlpSpec.logistic(), optimizer, seed)
    if kind == "ml-nn":
        return train_pem(records, spec or MlpSpec(), optimizer, seed)
    raise ArgumentError(f"unknown model kind '{kind}', expected one of {MODEL_KINDS}")

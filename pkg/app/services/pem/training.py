import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from app.core.exceptions import ArgumentError, SchemaError, TrainingError
from app.models.config import OptimizerConfig
from app.models.pem import DetectionRecord, MlpSpec
from app.services.pem.network import (
    FeedForwardScorer,
    PemModel,
    Reduction,
    clamp_probability,
)
from app.services.pem.optimizer import Adam

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    params: np.ndarray
    initial_loss: float
    final_loss: float
    best_epoch: int
    losses: list[float] = field(default_factory=list)


def fit(
    scorer: FeedForwardScorer,
    X: np.ndarray,
    y: np.ndarray,
    optimizer: OptimizerConfig,
    params: np.ndarray | None = None,
    sample_weight: np.ndarray | None = None,
    reduction: Reduction = "mean",
) -> FitResult:
    """Full-batch Adam; returns the lowest-loss parameters seen."""
    current = np.array(scorer.params if params is None else params, dtype=float)
    adam = Adam(optimizer, scorer.n_params)

    best_params = current.copy()
    best_loss = np.inf
    best_epoch = 0
    losses: list[float] = []
    for epoch in range(optimizer.epochs + 1):
        loss, grad = scorer.loss_and_gradient(current, X, y, sample_weight, reduction)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite training loss", epoch=epoch)
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_params, best_epoch = loss, current.copy(), epoch
        if epoch < optimizer.epochs:
            current = adam.step(current, grad)

    logger.debug(
        "Fit finished: loss %.6f -> %.6f (best at epoch %s)",
        losses[0],
        best_loss,
        best_epoch,
    )
    return FitResult(
        params=best_params,
        initial_loss=losses[0],
        final_loss=float(best_loss),
        best_epoch=best_epoch,
        losses=losses,
    )


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def records_to_arrays(
    records: Sequence[DetectionRecord],
) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise ArgumentError("no detection records to train on")
    dims = {len(r.salient) for r in records}
    if len(dims) != 1:
        raise SchemaError(f"inconsistent salient dimensions {sorted(dims)}")
    X = np.stack([np.asarray(r.salient, dtype=float) for r in records])
    y = np.array([float(r.detected) for r in records])
    return X, y


def train_scorer(
    scorer_cls: type[FeedForwardScorer],
    X: np.ndarray,
    y: np.ndarray,
    spec: MlpSpec,
    optimizer: OptimizerConfig,
    seed: int | np.random.SeedSequence,
) -> tuple[FeedForwardScorer, FitResult]:
    """Standardize inputs, start the output bias at the label log-odds, fit."""
    mean, scale = standardization(X)
    scorer = scorer_cls(spec, X.shape[1], input_mean=mean, input_scale=scale)
    rng = np.random.default_rng(seed)
    params = scorer.init_params(rng)
    params[scorer.output_bias_index()] = float(logit(clamp_probability(y.mean())))
    result = fit(scorer, X, y, optimizer, params=params)
    return scorer.with_params(result.params), result


def train_pem(
    records: Sequence[DetectionRecord],
    spec: MlpSpec,
    optimizer: OptimizerConfig,
    seed: int = 0,
) -> PemModel:
    X, y = records_to_arrays(records)
    model, result = train_scorer(PemModel, X, y, spec, optimizer, seed)
    logger.info(
        "Trained pem on %s records: bce %.4f -> %.4f",
        len(records),
        result.initial_loss,
        result.final_loss,
    )
    return model  # type: ignore[return-value]

import logging
from collections.abc import Sequence

import numpy as np

from app.core.exceptions import ArgumentError, UndefinedMetricError
from app.models.config import OptimizerConfig
from app.models.pem import CalibrationReport, DetectionRecord, MlpSpec
from app.services.pem.baselines import make_baseline
from app.services.pem.metrics import bce, roc_auc
from app.services.pem.training import records_to_arrays

logger = logging.getLogger(__name__)


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if folds < 2:
        raise ArgumentError("cross validation needs at least 2 folds")
    if n < folds:
        raise ArgumentError(f"{n} records cannot be split into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, folds)


def cross_validate(
    records: Sequence[DetectionRecord],
    spec: MlpSpec,
    optimizer: OptimizerConfig,
    folds: int = 5,
    seed: int = 0,
    kind: str = "ml-nn",
) -> CalibrationReport:
    """K-fold held-out BCE and ROC-AUC.

    A fold whose held-out labels are all one class has no ROC-AUC; if no fold
    has one, the AUC is computed on the pooled held-out predictions.
    """
    X, y = records_to_arrays(records)
    splits = fold_indices(len(records), folds, seed)

    fold_bce: list[float] = []
    fold_auc: list[float | None] = []
    pooled_scores = np.empty(len(records))
    for index, held_out in enumerate(splits):
        train_mask = np.ones(len(records), dtype=bool)
        train_mask[held_out] = False
        train = [records[i] for i in np.flatnonzero(train_mask)]
        model = make_baseline(kind, train, optimizer, seed=seed + index, spec=spec)

        predictions = model.predict(X[held_out])
        pooled_scores[held_out] = predictions
        fold_bce.append(bce(predictions, y[held_out]))
        try:
            fold_auc.append(roc_auc(predictions, y[held_out]))
        except UndefinedMetricError:
            fold_auc.append(None)
        logger.debug("Fold %s/%s: bce %.4f", index + 1, folds, fold_bce[-1])

    defined = [value for value in fold_auc if value is not None]
    mean_auc = float(np.mean(defined)) if defined else roc_auc(pooled_scores, y)
    return CalibrationReport(
        model=kind,
        bce=float(np.mean(fold_bce)),
        roc_auc=mean_auc,
        folds=folds,
        fold_bce=fold_bce,
        fold_roc_auc=fold_auc,
    )

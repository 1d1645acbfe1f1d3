import logging
from pathlib import Path

from app.core.logging import get_structured_logger
from app.core.settings import settings
from app.models.config import OptimizerConfig
from app.models.pem import CalibrationReport, MlpSpec
from app.services.pem.baselines import MODEL_KINDS, make_baseline
from app.services.pem.calibration import cross_validate
from app.services.pem.detection_log import read_detection_log, write_detection_log
from app.services.pem.metrics import bernoulli_entropy, roc_auc
from app.services.pem.synthetic import PlantedLogistic, generate_log
from app.services.pem.training import train_pem
from app.services.storage.writers import write_csv, write_json

logger = logging.getLogger(__name__)
progress = get_structured_logger(__name__)


def calibration_path(model_path: Path) -> Path:
    return model_path.with_name(f"{model_path.stem}_calibration.json")


class PemTrainingJob:
    """Fit the ML-NN pem on a detection log and report held-out calibration."""

    def __init__(self) -> None:
        self.optimizer = settings.PEM_TRAINING

    def run(
        self,
        log_path: Path,
        out_path: Path,
        spec: MlpSpec | None = None,
        optimizer: OptimizerConfig | None = None,
        folds: int = 5,
        seed: int = 0,
    ) -> CalibrationReport:
        spec = spec or MlpSpec()
        optimizer = optimizer or self.optimizer
        records = read_detection_log(log_path)

        report = cross_validate(records, spec, optimizer, folds=folds, seed=seed)
        model = train_pem(records, spec, optimizer, seed)
        model.save(out_path)
        write_json(calibration_path(out_path), report)

        progress.info(
            "pem trained",
            records=len(records),
            bce=round(report.bce, 5),
            roc_auc=round(report.roc_auc, 5),
            model=str(out_path),
        )
        return report


class CalibrationJob:
    """Cross-validated comparison of the ML-NN pem against the simple baselines."""

    HEADER = ("model", "bce", "roc_auc")

    def __init__(self) -> None:
        self.optimizer = settings.PEM_TRAINING

    def run(
        self,
        log_path: Path,
        out_dir: Path,
        spec: MlpSpec | None = None,
        optimizer: OptimizerConfig | None = None,
        folds: int = 5,
        seed: int = 0,
    ) -> list[CalibrationReport]:
        spec = spec or MlpSpec()
        optimizer = optimizer or self.optimizer
        records = read_detection_log(log_path)

        reports = []
        for kind in MODEL_KINDS:
            report = cross_validate(
                records, spec, optimizer, folds=folds, seed=seed, kind=kind
            )
            reports.append(report)
            model = make_baseline(kind, records, optimizer, seed, spec)
            model.save(out_dir / f"pem_{kind}.json")
            logger.info("%s: bce %.4f, roc-auc %.4f", kind, report.bce, report.roc_auc)

        write_json(out_dir / "calibration.json", reports)
        write_csv(
            out_dir / "calibration.csv",
            self.HEADER,
            ([r.model, r.bce, r.roc_auc] for r in reports),
        )
        return reports


class SyntheticLogJob:
    """Write a detection log drawn from a planted logistic generator."""

    def run(
        self,
        out_path: Path,
        n: int,
        seed: int = 0,
        planted: PlantedLogistic | None = None,
    ) -> dict:
        planted = planted or PlantedLogistic()
        entries, probabilities = generate_log(n, planted, seed)
        write_detection_log(out_path, entries)

        labels = [entry.detected for entry in entries]
        summary = {
            "planted": planted.model_dump(),
            "n": n,
            "seed": seed,
            "entropy": bernoulli_entropy(probabilities),
            "roc_auc": roc_auc(probabilities, labels),
        }
        write_json(out_path.with_name("planted.json"), summary)
        logger.info("Wrote %s synthetic detections to %s", n, out_path)
        return summary


pem_training_job = PemTrainingJob()
calibration_job = CalibrationJob()
synthetic_log_job = SyntheticLogJob()

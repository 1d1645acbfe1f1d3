from .estimation import estimation_job, metric_comparison_job
from .oracle_run import oracle_job
from .pem_training import calibration_job, pem_training_job, synthetic_log_job
from .ranking import ranking_job

__all__ = [
    "calibration_job",
    "estimation_job",
    "metric_comparison_job",
    "oracle_job",
    "pem_training_job",
    "ranking_job",
    "synthetic_log_job",
]

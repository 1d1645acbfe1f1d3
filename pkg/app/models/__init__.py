from .config import (
    CemConfig,
    Metric,
    MetricSettings,
    OptimizerConfig,
    PemSourceConfig,
    RunConfig,
)
from .pem import DetectionLogEntry, DetectionRecord, MlpSpec
from .reports import (
    AggregateReport,
    EnumerationResult,
    EstimationReport,
    StageDiagnostics,
)
from .scenario import Action, ScenarioConfig, SimState
from .trajectory import Trajectory

__all__ = [
    "Action",
    "AggregateReport",
    "CemConfig",
    "DetectionLogEntry",
    "DetectionRecord",
    "EnumerationResult",
    "EstimationReport",
    "Metric",
    "MetricSettings",
    "MlpSpec",
    "OptimizerConfig",
    "PemSourceConfig",
    "RunConfig",
    "ScenarioConfig",
    "SimState",
    "StageDiagnostics",
    "Trajectory",
]

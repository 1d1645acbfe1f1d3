import logging
from pathlib import Path

from app.core.exceptions import PemRiskError
from app.models.config import MetricSettings
from app.services.stl.formula import Formula
from app.services.stl.ranking import rank_values, trace_robustness
from app.services.storage.traces import read_trace_csv
from app.services.storage.writers import write_csv

logger = logging.getLogger(__name__)

HEADER = ("file", "robustness")


class RankingJob:
    """Order dumped traces from least to most safe under one robustness metric.

    A trace that cannot be read or scored is skipped with a warning.
    """

    def run(
        self,
        traces_dir: Path,
        formula: Formula,
        metric: MetricSettings,
        out_path: Path,
    ) -> list[tuple[str, float]]:
        names: list[str] = []
        values: list[float] = []
        for path in sorted(Path(traces_dir).glob("*.csv")):
            try:
                value = trace_robustness(read_trace_csv(path), formula, metric)
            except (OSError, PemRiskError) as exc:
                logger.warning("Skipping trace %s: %s", path.name, exc)
                continue
            names.append(path.name)
            values.append(value)

        rows = [(names[index], value) for index, value in rank_values(values)]
        write_csv(out_path, HEADER, rows)
        logger.info("Ranked %s traces into %s", len(rows), out_path)
        return rows


ranking_job = RankingJob()

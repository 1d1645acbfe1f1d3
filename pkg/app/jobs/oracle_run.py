import logging
from pathlib import Path

from app.core.logging import get_structured_logger
from app.core.settings import settings
from app.models.config import RunConfig
from app.models.reports import EnumerationResult
from app.services.oracle.enumeration import exact_mu
from app.services.storage.writers import write_csv, write_json
from app.utils.helpers import resolve_formula, resolve_pem

logger = logging.getLogger(__name__)
progress = get_structured_logger(__name__)


class OracleJob:
    """Exact failure probability by exhaustive enumeration of detection sequences."""

    def __init__(self) -> None:
        self.config = settings.ORACLE

    def run(
        self, config: RunConfig, out_dir: Path | None = None, keep_table: bool = False
    ) -> EnumerationResult:
        out_dir = Path(out_dir or config.output_dir)
        # Refuses with HorizonRefusalError above the cap
        result = exact_mu(
            resolve_pem(config.pem),
            config.scenario,
            resolve_formula(config),
            config.metric,
            config.cem.gamma,
            horizon_cap=self.config.horizon_cap,
            workers=settings.WORKERS,
            keep_table=keep_table,
            chunk_size=self.config.chunk_size,
        )
        write_json(out_dir / "oracle.json", result)
        if keep_table and result.table is not None:
            write_csv(
                out_dir / "oracle_table.csv",
                ("actions", "probability", "robustness"),
                result.table,
            )

        progress.info(
            "oracle complete",
            horizon=config.scenario.horizon,
            mu=result.mu,
            n_fail_sequences=result.n_fail_sequences,
            n_total=result.n_total,
        )
        return result


oracle_job = OracleJob()

import configparser
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ParseError
from app.models.config import (
    CemConfig,
    MetricSettings,
    OptimizerConfig,
    PemSourceConfig,
    RunConfig,
)
from app.models.scenario import SMALL_PRESET, ScenarioConfig

ORACLE_HARD_CAP = 20


class OracleSettings(BaseModel):
    horizon_cap: int = Field(default=14, ge=2)
    chunk_size: int = Field(default=1 << 14, ge=1)

    @field_validator("horizon_cap")
    @classmethod
    def validate_cap(cls, value: int) -> int:
        if value > ORACLE_HARD_CAP:
            raise ValueError(f"horizon_cap cannot exceed {ORACLE_HARD_CAP}")
        return value


class Settings(BaseSettings):
    OUTPUT_DIR: Path = Path("results")
    LOG_JSON: bool = False
    LOG_LEVEL: str = "INFO"
    WORKERS: int = Field(default=1, ge=1)
    SCENARIO: ScenarioConfig = ScenarioConfig()
    CEM: CemConfig = CemConfig()
    METRIC: MetricSettings = MetricSettings()
    PEM_TRAINING: OptimizerConfig = OptimizerConfig()
    ORACLE: OracleSettings = OracleSettings()

    model_config = SettingsConfigDict(
        env_prefix="PEMRISK_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
    )

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        allowed = {"DEBUG", "INFO", "WARNING", "ERROR"}
        if v.upper() not in allowed:
            raise ValueError(f"LOG_LEVEL must be one of {sorted(allowed)}")
        return v.upper()


# Singleton instance
settings = Settings()


_LIST_KEYS = {"seeds", "curve_stages"}


def _section(parser: configparser.ConfigParser, name: str) -> dict[str, Any]:
    if not parser.has_section(name):
        return {}
    values: dict[str, Any] = {}
    for key, raw in parser.items(name):
        if key in _LIST_KEYS:
            values[key] = [item for item in raw.replace(",", " ").split() if item]
        else:
            values[key] = raw
    return values


def load_run_config(path: str | Path | None, base: Settings | None = None) -> RunConfig:
    """Read an INI-style run file on top of the environment defaults.

    Sections: [scenario], [cem], [metric], [pem], [run]. A missing path or an
    empty file gives the default experiment.
    """
    base = base or settings
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#")
    )
    if path is not None:
        try:
            with Path(path).open(encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ParseError(f"cannot parse run config {path}: {exc}") from exc

    scenario_values = _section(parser, "scenario")
    preset = scenario_values.pop("preset", None)
    if preset == "small":
        scenario_values = {**SMALL_PRESET, **scenario_values}
    elif preset not in (None, "default"):
        raise ParseError(f"unknown scenario preset '{preset}'")
    scenario = ScenarioConfig(**{**base.SCENARIO.model_dump(), **scenario_values})

    cem_values = _section(parser, "cem")
    optimizer_values = {
        key.removeprefix("optimizer_"): cem_values.pop(key)
        for key in list(cem_values)
        if key.startswith("optimizer_")
    }
    cem_base = base.CEM.model_dump()
    cem_base["optimizer"] = {**cem_base["optimizer"], **optimizer_values}
    cem = CemConfig(**{**cem_base, **cem_values})

    metric_values = _section(parser, "metric")
    metric = MetricSettings(**{**base.METRIC.model_dump(), **metric_values})
    pem = PemSourceConfig(**_section(parser, "pem"))

    run_values = _section(parser, "run")
    run_values.setdefault("output_dir", base.OUTPUT_DIR)
    return RunConfig(scenario=scenario, cem=cem, metric=metric, pem=pem, **run_values)

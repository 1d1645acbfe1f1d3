import logging

from pydantic import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT_ERROR = 2
EXIT_REFUSED = 3


class PemRiskError(Exception):
    """Base error class for the estimation toolkit."""

    exit_code = EXIT_INPUT_ERROR

    def __init__(
        self,
        detail: str,
        error_code: str | None = None,
        exit_code: int | None = None,
    ):
        self.detail = detail
        self.error_code = error_code or "GENERIC_ERROR"
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(detail)


class ArgumentError(PemRiskError):
    def __init__(self, detail: str):
        super().__init__(detail, "ARGUMENT_ERROR")


class ParameterError(PemRiskError):
    def __init__(self, detail: str):
        super().__init__(detail, "PARAMETER_ERROR")


class HorizonError(PemRiskError):
    """A formula reaches past the end of the trace it is evaluated on."""

    def __init__(self, detail: str):
        super().__init__(detail, "HORIZON_ERROR")


class SchemaError(PemRiskError):
    def __init__(self, detail: str, line: int | None = None):
        self.line = line
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail, "SCHEMA_ERROR")


class ParseError(PemRiskError):
    def __init__(self, detail: str, line: int | None = None):
        self.line = line
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail, "PARSE_ERROR")


class NormalizationError(PemRiskError):
    def __init__(self, detail: str):
        super().__init__(detail, "NORMALIZATION_ERROR")


class UndefinedMetricError(PemRiskError):
    def __init__(self, detail: str):
        super().__init__(detail, "UNDEFINED_METRIC")


class TrainingError(PemRiskError):
    """Optimization produced a non-finite loss."""

    def __init__(self, detail: str, epoch: int):
        self.epoch = epoch
        super().__init__(f"{detail} (epoch {epoch})", "TRAINING_DIVERGED")


class StallError(PemRiskError):
    """No rollout clears the current intermediate threshold."""

    def __init__(self, detail: str):
        super().__init__(detail, "STALLED", exit_code=EXIT_OK)


class HorizonRefusalError(PemRiskError):
    def __init__(self, horizon: int, cap: int):
        self.horizon = horizon
        self.cap = cap
        super().__init__(
            f"horizon T={horizon} exceeds the enumeration cap of {cap} steps",
            "HORIZON_REFUSED",
            exit_code=EXIT_REFUSED,
        )


class UndefinedProposalError(PemRiskError):
    def __init__(self, detail: str):
        super().__init__(detail, "UNDEFINED_PROPOSAL")


def handle_cli_error(exc: Exception) -> int:
    """Log an exception raised by a command and return the process exit code."""
    if isinstance(exc, PemRiskError):
        if exc.exit_code == EXIT_REFUSED:
            logger.warning("Refused: %s", exc.detail)
        else:
            logger.error("%s: %s", exc.error_code, exc.detail)
        return exc.exit_code

    if isinstance(exc, ValidationError):
        for error in exc.errors():
            logger.error(
                "Invalid value for %s: %s",
                ".".join(str(x) for x in error["loc"]),
                error["msg"],
            )
        return EXIT_INPUT_ERROR

    if isinstance(exc, FileNotFoundError | IsADirectoryError):
        logger.error("File error: %s", exc)
        return EXIT_INPUT_ERROR

    logger.error("Unhandled exception: %s", exc, exc_info=True)
    return EXIT_UNEXPECTED

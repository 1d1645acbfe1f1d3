from functools import cache

from app.models.reports import EstimationReport


@cache
def estimation_report_schema() -> dict:
    """The JSON schema every written estimation report conforms to."""
    return EstimationReport.model_json_schema(mode="serialization")


__all__ = ["estimation_report_schema"]

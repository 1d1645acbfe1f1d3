import json
import logging
from collections.abc import Iterable
from pathlib import Path

from pydantic import ValidationError

from app.core.exceptions import ParseError, SchemaError
from app.models.pem import Box, BoxMatchProblem, DetectionLogEntry, DetectionRecord
from app.services.storage.writers import read_json, write_jsonl

logger = logging.getLogger(__name__)


def parse_detection_log(lines: Iterable[str]) -> list[DetectionRecord]:
    records: list[DetectionRecord] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from exc
        try:
            entry = DetectionLogEntry.model_validate(payload)
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or "record"
            raise SchemaError(f"{field}: {first['msg']}", line=line_no) from exc
        records.append(entry.to_record())

    if not records:
        raise ParseError("detection log is empty")
    return records


def read_detection_log(path: str | Path) -> list[DetectionRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        records = parse_detection_log(fh)
    logger.info("Loaded %s detection records from %s", len(records), path)
    return records


def write_detection_log(path: str | Path, entries: Iterable[DetectionLogEntry]) -> Path:
    return write_jsonl(path, entries)


def read_box_match_problem(path: str | Path) -> BoxMatchProblem:
    """Box-match input.

    ``{"gt": [[x1, y1, x2, y2], ...], "pred": [[x1, y1, x2, y2, conf], ...]}``
    """
    payload = read_json(path)
    try:
        return BoxMatchProblem(
            gt=[_box(values) for values in payload.get("gt", [])],
            pred=[_box(values) for values in payload.get("pred", [])],
        )
    except (ValidationError, ValueError, TypeError) as exc:
        raise SchemaError(f"invalid box-match file {path}: {exc}") from exc


def _box(values) -> Box:
    if isinstance(values, dict):
        return Box.model_validate(values)
    return Box.from_list(list(values))

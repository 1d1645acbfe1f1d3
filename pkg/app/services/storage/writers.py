import csv
import json
import logging
import os
from collections.abc import Iterable, Sequence
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Any

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def _to_payload(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (list, tuple)):
        return [_to_payload(item) for item in obj]
    if isinstance(obj, dict):
        return {key: _to_payload(value) for key, value in obj.items()}
    return obj


def _atomic_write(path: str | Path, write) -> Path:
    """Write through a temp file next to the target, then rename over it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile(
        "w",
        newline="",
        delete=False,
        encoding="utf-8",
        dir=target.parent,
        prefix=f".{target.name}.",
        suffix=".tmp",
    ) as tmp_file:
        temp_path = Path(tmp_file.name)
        try:
            write(tmp_file)
        except Exception:
            tmp_file.close()
            temp_path.unlink(missing_ok=True)
            raise
    os.replace(temp_path, target)
    logger.debug("Wrote %s", target)
    return target


def write_json(path: str | Path, payload: Any) -> Path:
    def _write(fh):
        json.dump(_to_payload(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")

    return _atomic_write(path, _write)


def write_jsonl(path: str | Path, rows: Iterable[Any]) -> Path:
    def _write(fh):
        for row in rows:
            fh.write(json.dumps(_to_payload(row), sort_keys=True))
            fh.write("\n")

    return _atomic_write(path, _write)


def write_csv(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(value) for value in row])

    return _atomic_write(path, _write)


def _format_cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value


def read_json(path: str | Path) -> Any:
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)

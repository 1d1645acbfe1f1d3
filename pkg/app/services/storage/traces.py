import csv
import logging
from pathlib import Path

import numpy as np

from app.core.exceptions import ParseError, SchemaError
from app.models.trajectory import CHANNELS, Trajectory
from app.services.stl.trace import Trace
from app.services.storage.writers import write_csv

logger = logging.getLogger(__name__)

_INDEX_COLUMNS = ("step", "time_s")
_STREAM_COLUMNS = ("action", "target_p", "proposal_p")


def read_trace_csv(path: str | Path) -> Trace:
    """Read ``step,time_s,<channel>...``; every other column becomes a channel."""
    path = Path(path)
    try:
        return _read_trace(path)
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8 text") from exc
    except csv.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _read_trace(path: Path) -> Trace:
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise ParseError(f"{path} is empty") from exc
        if tuple(header[:2]) != _INDEX_COLUMNS:
            raise SchemaError(f"{path}: header must start with step,time_s")
        columns: dict[str, list[float]] = {name: [] for name in header[2:]}
        times: list[float] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields", line=line_no)
            try:
                times.append(float(row[1]))
                for name, value in zip(header[2:], row[2:], strict=True):
                    columns[name].append(float(value) if value != "" else np.nan)
            except ValueError as exc:
                raise ParseError(f"non-numeric value: {exc}", line=line_no) from exc

    if not times:
        raise ParseError(f"{path} has no rows")
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    return Trace({name: np.asarray(values) for name, values in columns.items()}, dt)


def write_trace_csv(path: str | Path, trace: Trace) -> Path:
    names = list(trace.channels)
    rows = (
        [step, step * trace.dt, *(float(trace.channels[n][step]) for n in names)]
        for step in range(trace.length)
    )
    return write_csv(path, [*_INDEX_COLUMNS, *names], rows)


def write_trajectory_csv(path: str | Path, trajectory: Trajectory, dt: float) -> Path:
    """Trace columns plus the realized action and both likelihood streams.

    The last state has no action, so its stream cells are empty.
    """
    channels = trajectory.channels()
    n_actions = len(trajectory.actions)

    def stream_cells(step: int) -> list:
        if step >= n_actions:
            return ["", "", ""]
        streams = (trajectory.target_p, trajectory.proposal_p)
        cells = ["" if s is None else float(s[step]) for s in streams]
        return [int(trajectory.actions[step]), *cells]

    rows = (
        [
            step,
            step * dt,
            *(float(channels[name][step]) for name in CHANNELS),
            *stream_cells(step),
        ]
        for step in range(trajectory.horizon)
    )
    return write_csv(path, [*_INDEX_COLUMNS, *CHANNELS, *_STREAM_COLUMNS], rows)

from .traces import read_trace_csv, write_trace_csv, write_trajectory_csv
from .writers import read_json, write_csv, write_json, write_jsonl

__all__ = [
    "read_json",
    "read_trace_csv",
    "write_csv",
    "write_json",
    "write_jsonl",
    "write_trace_csv",
    "write_trajectory_csv",
]

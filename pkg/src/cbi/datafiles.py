"""JSON and CSV readers and writers.

Floats are written with ``repr`` so every value survives a round trip exactly.
"""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .simulate import ObservationPath

__all__ = ["dumps_json", "read_json", "read_path_csv", "write_path_csv", "write_rows_csv"]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, non-finite floats as null, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


def write_path_csv(path: ObservationPath, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["k", "X_k"])
    for k, x in enumerate(path.values):
        writer.writerow([k, repr(float(x))])


def read_path_csv(source, scheme: str = "euler_thinning") -> ObservationPath:
    """Read a ``k, X_k`` CSV (file name or text stream); rows must be k = 0, 1, ..., n."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_path_csv(fh, scheme)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["k", "X_k"]:
        raise ValueError("path CSV must start with the header 'k,X_k'")
    values = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 columns, got {len(row)}")
        if int(row[0]) != len(values):
            raise ValueError(f"line {lineno}: expected k = {len(values)}, got {row[0]}")
        values.append(float(row[1]))
    return ObservationPath(np.array(values), scheme)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_rows_csv(header, rows, fh) -> None:
    """Generic CSV; empty cells for missing values, ``true``/``false`` for flags."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])

"""Deterministic CSV and JSON writers.

CSV uses a header row, '.' decimals and 17 significant digits, so every
float round-trips exactly. JSON is a single object carrying
``schema_version``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"

__all__ = ["SCHEMA_VERSION", "Table", "emit", "field_table", "format_value", "jsonable"]


@dataclass
class Table:
    header: list[str]
    rows: list[list]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} in results")
        return "%.17g" % float(v)
    return "" if v is None else str(v)


def jsonable(obj):
    """Plain-Python copy of ``obj`` for ``json.dump``."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value {obj} in results")
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def field_table(field, ages, xs, name: str = "value") -> Table:
    """Age-row-major ``(a, x, value)`` rows of an age-space field."""
    field = np.asarray(field, dtype=float)
    rows = [[a, x, field[j, i]] for j, a in enumerate(ages) for i, x in enumerate(xs)]
    return Table(["a", "x", name], rows)


def emit(results, fmt: str, path) -> Path:
    """Write ``results`` as ``csv`` (a :class:`Table`) or ``json`` (any mapping)."""
    path = Path(path)
    if fmt == "json":
        body = {"schema_version": SCHEMA_VERSION}
        body.update(jsonable(results))
        text = json.dumps(body, indent=2, allow_nan=False) + "\n"
        path.write_text(text)
    elif fmt == "csv":
        if not isinstance(results, Table):
            raise TypeError("csv output needs a Table")
        lines = [[format_value(v) for v in row] for row in results.rows]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(results.header)
            w.writerows(lines)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path

"""Atomic artifact writers. Floats are written with ``repr`` so they round-trip."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

__all__ = ["TRACE_COLUMNS", "atomic_write_text", "write_json", "trace_to_csv", "write_trace_csv", "read_trace_csv"]

TRACE_COLUMNS = ("k", "residual", "disagreement", "grad_sum_norm", "y_sum_norm")


def atomic_write_text(path, text: str) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def _clean(obj):
    # JSON has no nan/inf
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, data) -> Path:
    return atomic_write_text(path, json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    return repr(float(v))


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_x = bool(trace) and trace[0].x is not None
    header = list(TRACE_COLUMNS)
    if with_x:
        n, m = trace[0].x.shape
        header += [f"x_{i}_{d}" for i in range(n) for d in range(m)]
    writer.writerow(header)
    for rec in trace:
        row = [str(rec.k), _fmt(rec.residual), _fmt(rec.disagreement), _fmt(rec.grad_sum_norm), _fmt(rec.y_sum_norm)]
        if with_x:
            row += [_fmt(v) for v in rec.x.ravel()]
        writer.writerow(row)
    return buf.getvalue()


def write_trace_csv(path, trace) -> Path:
    return atomic_write_text(path, trace_to_csv(trace))


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "k" else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]

"""Deterministic CSV/JSON emission of sweep rows."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

from .experiments import ResultRow

__all__ = ["COLUMNS", "ResultsIOError", "row_record", "emit_results", "render_results"]

COLUMNS = ("scenario", "axis", "value", "fidelity", "drift", "gate_time_us", "truncation",
           "convergence_delta", "flagged")
SIG_DIGITS = 12


class ResultsIOError(OSError):
    pass


def _num(x: float | None) -> float | None:
    if x is None:
        return None
    if math.isinf(x) or math.isnan(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def row_record(row: ResultRow) -> dict:
    """Row as an ordered mapping of the emitted columns (wall time is left out)."""
    return {
        "scenario": row.scenario,
        "axis": row.axis,
        "value": _num(row.value),
        "fidelity": _num(row.fidelity),
        "drift": _num(row.drift),
        "gate_time_us": _num(row.gate_time * 1e6),
        "truncation": int(row.truncation),
        "convergence_delta": _num(row.convergence_delta),
        "flagged": int(row.flagged),
    }


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def render_results(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    records = [row_record(r) for r in rows]
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        writer.writerow([_csv_cell(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def emit_results(rows: Sequence[ResultRow], path: str | Path, fmt: str = "csv") -> Path:
    """Write ``rows`` to ``path``; the bytes depend only on the rows."""
    text = render_results(rows, fmt)
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ResultsIOError(f"cannot write results to {path}: {exc}") from exc
    return path

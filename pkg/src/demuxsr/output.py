"""CSV and JSON writers with embedded provenance metadata.

CSV files start with ``#``-prefixed ``key: value`` lines; JSON reports carry
a top-level ``schema`` field.  Floats are written with ``repr`` so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

SCHEMA = "demux-sr/v1"


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(columns, rows, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _clean(obj):
    # JSON has no NaN/inf
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def json_text(payload: dict, metadata: dict | None = None) -> str:
    doc = {"schema": SCHEMA, **(metadata or {}), **payload}
    return json.dumps(_clean(doc), indent=2) + "\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(text)
    return path

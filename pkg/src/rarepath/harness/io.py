"""Artifact writers and readers.

CSV files follow RFC 4180 (CRLF line ends, header row) after a single
leading ``# rarepath {...}`` comment line that carries the resolved config.
Readers skip lines starting with ``#``.  JSONL files start with a
``{"config": ...}`` record.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

COMMENT = "# rarepath "


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(COMMENT + header + "\r\n")
        fh.write(csv_text(columns, rows))
    return path


def csv_body(path) -> str:
    """File content without the comment header."""
    with open(path, newline="") as fh:
        return "".join(line for line in fh if not line.startswith("#"))


def read_csv(path) -> tuple[dict | None, list[dict]]:
    """Parse an artifact CSV into ``(config header, rows as dicts)``."""
    path = Path(path)
    meta = None
    with open(path, newline="") as fh:
        lines = fh.readlines()
    body = []
    for line in lines:
        if line.startswith(COMMENT):
            meta = json.loads(line[len(COMMENT):])
        elif not line.startswith("#"):
            body.append(line)
    return meta, list(csv.DictReader(body))


def write_jsonl(path, header: str, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write('{"config":' + header + "}\n")
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return path


def read_jsonl(path) -> tuple[dict, list[dict]]:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    return lines[0]["config"], lines[1:]

"""Deterministic CSV output."""
from __future__ import annotations

import csv
from pathlib import Path


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool,)):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".12g")


def write_csv(path, header, rows, comments=()) -> Path:
    """Write ``rows`` under ``header``; ``comments`` become leading ``# `` lines."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(header, rows)`` skipping ``#`` comment lines; values stay strings."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)

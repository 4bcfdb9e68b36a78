"""Serialize report tables: delimiter-separated files plus a text summary.

Output is strictly deterministic: rows arrive pre-sorted, floats are
serialized with repr (shortest round-trip), and display percentages use
one decimal with half-up rounding. Nothing time- or path-dependent is ever
written, so two runs over the same inputs produce byte-identical bundles.
"""
from __future__ import annotations

import csv
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

__all__ = [
    "format_percent",
    "fnum",
    "write_table",
    "write_json",
    "PRECISION_NOTE",
    "COMBINED_RETURNED_NOTE",
]

PRECISION_NOTE = (
    "precision values are upper estimates: at most `count` items are "
    "returned per query"
)
COMBINED_RETURNED_NOTE = (
    "combined returned = mean of the per-mode returned counts; a reporting "
    "convention, not a principled denominator"
)


def format_percent(fraction: float) -> str:
    """Render a fraction as a percentage with one decimal, half-up."""
    return str(
        Decimal(repr(fraction * 100)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    )


def fnum(value: Optional[float]) -> str:
    """Full-precision float cell; empty for absent values."""
    if value is None:
        return ""
    return repr(float(value))


def write_table(
    path: str | Path,
    fieldnames: Sequence[str],
    rows: Iterable[Mapping[str, object]],
    notes: Sequence[str] = (),
) -> None:
    """Write one table as CSV, with optional leading '#' note lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for note in notes:
            handle.write(f"# {note}\n")
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})


def _cell(value: object) -> object:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return value


def write_json(path: str | Path, payload: object) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")

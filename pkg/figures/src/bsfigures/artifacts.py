"""Readers for the artifact files the solver CLI writes.

CSV files start with ``# key: value`` metadata lines, then a header row,
then data rows.  Numeric cells use repr formatting with ``nan``/``inf``
spelled out; anything that does not parse as a float stays a string
(membership codes, for instance).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field


class SchemaError(Exception):
    """An artifact file is missing required structure."""


def _parse_cell(text: str) -> float | str:
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class Table:
    """Parsed CSV artifact: metadata, header, and typed rows."""

    path: str
    meta: dict[str, str] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)
    rows: list[list[float | str]] = field(default_factory=list)

    def column(self, name: str) -> list[float | str]:
        if name not in self.columns:
            raise SchemaError(f"{self.path} is missing column {name!r}")
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def floats(self, name: str) -> list[float]:
        out = []
        for cell in self.column(name):
            if isinstance(cell, str):
                raise SchemaError(
                    f"{self.path} column {name!r} has non-numeric cell {cell!r}"
                )
            out.append(cell)
        return out

    def require(self, *names: str) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaError(
                f"{self.path} is missing column {missing[0]!r}"
                + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else "")
            )


def read_csv(path: str) -> Table:
    """Parse one artifact CSV.  Raises SchemaError on malformed files."""
    table = Table(path=path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        text = line[1:].strip()
        if ":" in text:
            key, _, value = text.partition(":")
            table.meta[key.strip()] = value.strip()
    else:
        raise SchemaError(f"{path} has no header row")
    body = [ln for ln in lines[body_start:] if ln.strip()]
    if not body:
        raise SchemaError(f"{path} has no header row")
    table.columns = [c.strip() for c in body[0].split(",")]
    for ln in body[1:]:
        cells = [_parse_cell(c) for c in ln.split(",")]
        if len(cells) != len(table.columns):
            raise SchemaError(
                f"{path} row has {len(cells)} cells, expected {len(table.columns)}"
            )
        table.rows.append(cells)
    return table


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path} must hold a JSON object")
    return data


def require_keys(path: str, data: dict, *names: str) -> None:
    for name in names:
        if name not in data:
            raise SchemaError(f"{path} is missing key {name!r}")


def finite(values: list[float]) -> list[float]:
    return [v for v in values if isinstance(v, float) and math.isfinite(v)]


# Filename conventions used by render_all to classify a directory.

def classify_artifact(name: str) -> str | None:
    """Map a file name to a figure kind, or None if unrecognized.

    Companion files (events, brackets, monitor JSON) return the pseudo
    kind "companion": they feed other figures and get no figure of
    their own.
    """
    base = os.path.basename(name)
    if base == "trajectory.csv":
        return "profile"
    if base.startswith("trace_") and base.endswith(".csv"):
        return "trace"
    if base == "sweep.csv":
        return "sweep"
    if base == "check.json":
        return "margins"
    if base in ("events.json", "brackets.json", "monitor.json"):
        return "companion"
    return None

"""Deterministic CSV/JSON artifact writers.

Every file carries the config hash and tool version; floats are written
with shortest round-trip repr so identical runs produce byte-identical
bodies.  JSON is sorted-key with non-finite floats sanitized to strings,
so every report re-parses.
"""

from __future__ import annotations

import json
import math
import os
from datetime import datetime, timezone

from . import __version__

__all__ = ["artifact_meta", "write_csv", "write_json", "read_csv", "sanitize"]


def artifact_meta(command: str, config_sha: str, *, seed=None,
                  timestamps: bool = False) -> dict:
    meta = {"tool": "boundstates", "version": __version__,
            "command": command, "config_sha256": config_sha}
    if seed is not None:
        meta["seed"] = seed
    if timestamps:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat()
    return meta


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        # coerce numpy scalars (float subclasses) to plain float so
        # repr stays a bare number
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if x is None:
        return "nan"
    return str(x)


def write_csv(path: str, columns, rows, meta: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = [f"# {k}: {meta[k]}" for k in sorted(meta)]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str):
    """(meta, columns, rows as float-or-string lists) for a file written
    by write_csv."""
    meta = {}
    columns = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    k, _, v = body.partition(":")
                    meta[k.strip()] = v.strip()
                continue
            cells = line.split(",")
            if columns is None:
                columns = cells
                continue
            parsed = []
            for c in cells:
                try:
                    parsed.append(float(c))
                except ValueError:
                    parsed.append(c)
            rows.append(parsed)
    return meta, columns or [], rows


def sanitize(obj):
    """Replace non-finite floats with strings so json round-trips with
    allow_nan=False."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    return obj


def write_json(path: str, payload: dict, meta: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"meta": meta, **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sanitize(doc), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")

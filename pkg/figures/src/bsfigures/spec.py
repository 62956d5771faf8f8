"""Figure specs: what to draw, from which artifacts, into which file."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

KINDS = ("profile", "trace", "sweep", "margins")

# inputs each kind must name -> the artifact role they play
REQUIRED_INPUTS = {
    "profile": ("trajectory",),
    "trace": ("trace",),
    "sweep": ("sweep",),
    "margins": ("check",),
}
OPTIONAL_INPUTS = {
    "profile": ("events",),
    "trace": ("monitor",),
    "sweep": ("brackets",),
    "margins": (),
}


class SpecError(Exception):
    """A figure spec is malformed or references missing files."""


@dataclass
class FigureSpec:
    kind: str
    inputs: dict[str, str]
    out: str
    title: str | None = None
    dpi: int = 110
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(
                f"unknown figure kind {self.kind!r}; expected one of {', '.join(KINDS)}"
            )
        if not self.out:
            raise SpecError("figure spec needs a non-empty 'out' path")
        for role in REQUIRED_INPUTS[self.kind]:
            if role not in self.inputs:
                raise SpecError(f"{self.kind} figure needs an input named {role!r}")
        allowed = set(REQUIRED_INPUTS[self.kind]) | set(OPTIONAL_INPUTS[self.kind])
        for role in self.inputs:
            if role not in allowed:
                raise SpecError(
                    f"{self.kind} figure does not accept an input named {role!r}"
                )
        for role, path in self.inputs.items():
            if not os.path.isfile(path):
                raise SpecError(f"input {role!r} points at missing file {path}")
        if self.dpi <= 0:
            raise SpecError("dpi must be positive")


def load_spec(path: str) -> FigureSpec:
    """Read a JSON figure spec and validate it.

    Relative input/output paths resolve against the spec file's
    directory, so a spec can travel with its artifacts.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError(f"spec {path} must hold a JSON object")
    for key in ("kind", "inputs", "out"):
        if key not in raw:
            raise SpecError(f"spec {path} is missing {key!r}")
    if not isinstance(raw["inputs"], dict):
        raise SpecError(f"spec {path} field 'inputs' must be an object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    spec = FigureSpec(
        kind=str(raw["kind"]),
        inputs={str(k): resolve(str(v)) for k, v in raw["inputs"].items()},
        out=resolve(str(raw["out"])),
        title=raw.get("title"),
        dpi=int(raw.get("dpi", 110)),
        options=dict(raw.get("options", {})),
    )
    spec.validate()
    return spec

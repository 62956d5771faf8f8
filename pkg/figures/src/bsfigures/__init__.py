"""Figures for bound-state run artifacts.

Consumes the CSV/JSON files written by the ``boundstates`` CLI and turns
them into static plots.  The two packages communicate only through those
files; nothing here imports the solver.
"""

from .artifacts import SchemaError, read_csv, read_json
from .spec import FigureSpec, SpecError, load_spec
from .render import GalleryResult, RenderResult, render, render_all

__all__ = [
    "FigureSpec",
    "GalleryResult",
    "RenderResult",
    "SchemaError",
    "SpecError",
    "load_spec",
    "read_csv",
    "read_json",
    "render",
    "render_all",
]

__version__ = "0.1.0"

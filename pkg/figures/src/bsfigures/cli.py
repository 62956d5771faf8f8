"""Command line front end.

    bsfigures render --spec FILE
    bsfigures render-all DIR [--out DIR]

Exit codes: 0 figures written (warnings allowed), 2 bad spec or
malformed artifact.
"""

from __future__ import annotations

import argparse
import sys

from .artifacts import SchemaError
from .render import render, render_all
from .spec import SpecError, load_spec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsfigures",
                                     description="render run artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one figure from a spec")
    p_render.add_argument("--spec", required=True, help="JSON figure spec")

    p_all = sub.add_parser("render-all",
                           help="render every recognized artifact in a directory")
    p_all.add_argument("directory")
    p_all.add_argument("--out", default=None, help="output directory "
                       "(default: DIR/figures)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            result = render(load_spec(args.spec))
            for note in result.notices:
                print(f"note: {note}")
            print(f"wrote {result.path}")
            return 0
        gallery = render_all(args.directory, args.out)
        for fig in gallery.figures:
            print(f"wrote {fig.path}")
        for warning in gallery.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        print(f"wrote {gallery.index_path}")
        return 0
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

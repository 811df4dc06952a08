"""Command line: render --kind <k> --in <csv...> --out <img>."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, render
from .schemas import FIGURE_KINDS, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgd-figures",
        description="render benchmark CSV outputs as figures",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render")
    p.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input CSV file(s)")
    p.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            figure_kind=args.kind,
            input_csvs=tuple(args.inputs),
            output_path=args.out,
        )
        path = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

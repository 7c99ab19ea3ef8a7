"""plots <kind> <input.csv> [more.csv ...] -o <out.png>"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plots", description="Render abho CSV outputs to static figures"
    )
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("inputs", nargs="+", help="input CSV path(s)")
    ap.add_argument("-o", "--output", required=True, help="output image path")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(PlotJob(inputs=args.inputs, kind=args.kind, output=args.output))
    except SchemaMismatch as exc:
        print(f"SchemaMismatch: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""plot-profile: draw performance-profile step curves from a curves CSV.

Usage: plot-profile --in curves.csv --out fig.png --tau 1e-3
"""
from __future__ import annotations

import argparse
import sys

from .render import render_profile


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot-profile", description=__doc__)
    parser.add_argument("--in", dest="input", required=True, help="curves CSV path")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--tau", default="", help="tolerance label for the title")
    args = parser.parse_args(argv)
    try:
        render_profile(args.input, args.out, args.tau)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Batch figure rendering from engine CSVs.

Usage:
    latkmc-plot exit-pdf  --series micro=run/micro.csv --series mlkmc=run/ml.csv -o fig.png
    latkmc-plot hysteresis --series mlkmc=run/hyst.csv -o loop.png
    latkmc-plot trajectory --series mlkmc=run/traj.csv -o traj.png
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import PlotJob, render

_KINDS = {"exit-pdf": "exit_pdf", "hysteresis": "hysteresis", "trajectory": "trajectory"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latkmc-plot", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for name in _KINDS:
        p = sub.add_parser(name)
        p.add_argument("--series", action="append", required=True,
                       metavar="LABEL=CSV", help="labelled input CSV (repeatable)")
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--bandwidth", type=float, default=None,
                       help="fixed KDE bandwidth (default: Silverman's rule)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    inputs: dict[str, Path] = {}
    for item in args.series:
        if "=" not in item:
            print(f"--series must look like LABEL=path.csv, got {item!r}", file=sys.stderr)
            return 1
        label, path = item.split("=", 1)
        inputs[label] = Path(path)
    job = PlotJob(inputs=inputs, kind=_KINDS[args.kind], output=Path(args.output),
                  bandwidth=args.bandwidth)
    try:
        out = render(job)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

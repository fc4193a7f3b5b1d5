"""`bitlogit-plot` (also installed as `plot`): render one scaling figure."""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, render_scaling_plot


def _parse_fixed(text: str | None) -> dict:
    if not text:
        return {}
    fixed = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        if not value:
            raise ValueError(f"bad --fix entry {part!r}; use name=value")
        fixed[key.strip()] = int(value)
    return fixed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitlogit-plot",
        description="log-log scaling figure from a sweep results CSV",
    )
    parser.add_argument("--csv", required=True, help="sweep results CSV")
    parser.add_argument("--x", default="k", choices=("k", "n", "d"))
    parser.add_argument("--y", default="excess_risk",
                        choices=("excess_risk", "l2_error"))
    parser.add_argument("--fix", default="",
                        help="hold-fixed filters, e.g. n=12000,d=12")
    parser.add_argument("--ref-slope", type=float, action="append", default=[],
                        help="dashed reference line (repeatable)")
    parser.add_argument("--out", default="scaling.png",
                        help="output image (.png or .svg; the twin format is "
                             "written alongside)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(csv_path=args.csv, x=args.x, y=args.y,
                        fixed=_parse_fixed(args.fix),
                        ref_slopes=tuple(args.ref_slope), out_path=args.out)
        _, written = render_scaling_plot(spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

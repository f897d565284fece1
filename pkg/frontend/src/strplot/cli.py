"""Command-line interface: `plot mesh`, `plot table`."""

from __future__ import annotations

import argparse
import sys

from .frame import MeshError, load_mesh
from .render import render_mesh, render_table


def _cmd_mesh(args) -> int:
    try:
        frame = load_mesh(args.infile)
        modes = ([m.strip() for m in args.modes.split(",") if m.strip()]
                 if args.modes != "all" else list(frame.modes))
        render_mesh(frame, modes, args.out)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def _cmd_table(args) -> int:
    try:
        frame = load_mesh(args.infile)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(render_table(frame))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render STR mesh CSV files")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="render mesh surfaces to an image")
    p_mesh.add_argument("--in", dest="infile", required=True,
                        help="mesh CSV produced by the simulator")
    p_mesh.add_argument("--modes", default="all",
                        help="'all' or comma-separated mode labels")
    p_mesh.add_argument("--out", required=True, help="output image path")
    p_mesh.set_defaults(fn=_cmd_mesh)

    p_table = sub.add_parser("table", help="print per-mode max/mean table")
    p_table.add_argument("--in", dest="infile", required=True)
    p_table.set_defaults(fn=_cmd_table)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: `sim run`, `sim sweep`, `sim report`."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from . import harness, metrics
from .harness import ConfigError, SimConfig, grid, load_config, run_one, sweep
from .metrics import extended_grid, load_mesh, mode_summary, usecase_grid
from .telemetry import MODE_LABELS


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else SimConfig()
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    row = run_one(cfg, 0)
    print(f"mode={row.mode} pb0={row.pb0} spots={row.spots} "
          f"redundancy={row.redundancy} seed={row.seed} str={row.str_value:.6f}")
    return 0


def _parse_modes(spec: str) -> list[str]:
    if spec == "all":
        return list(MODE_LABELS)
    modes = [m.strip() for m in spec.split(",") if m.strip()]
    unknown = [m for m in modes if m not in MODE_LABELS]
    if unknown:
        raise ValueError(f"unknown modes: {', '.join(unknown)}; "
                         f"valid: {', '.join(MODE_LABELS)}")
    return modes


def _cmd_sweep(args) -> int:
    try:
        modes = _parse_modes(args.modes)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    base = SimConfig()
    if args.duration_days is not None:
        base = replace(base, duration_days=args.duration_days)
    configs = grid(args.grid, modes, reps=args.reps, profile=args.profile,
                   base=base, base_seed=args.base_seed)
    if args.duration_days is not None:
        configs = [replace(c, duration_days=args.duration_days) for c in configs]
    grid_spec = (usecase_grid(modes) if args.grid == "usecase"
                 else extended_grid(modes))
    t0 = time.time()

    def progress(done: int, total: int) -> None:
        if args.verbose and (done % 50 == 0 or done == total):
            dt = time.time() - t0
            print(f"  {done}/{total} runs ({dt:.0f}s)", file=sys.stderr)

    try:
        sweep(configs, jobs=args.jobs, out_raw=args.out_raw,
              out_mesh=args.out_mesh, grid_spec=grid_spec, progress=progress)
    except (RuntimeError, metrics.MetricsError) as exc:
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    try:
        reports = load_mesh(args.mesh)
    except (OSError, metrics.MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.table:
        rows = mode_summary(reports)
        name_w = max(len(m) for m, _, _ in rows)
        print(f"{'mode'.ljust(name_w)}  max    mean")
        for mode, mx, mean in rows:
            print(f"{mode.ljust(name_w)}  {mx:.3f}  {mean:.3f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Permafrost telemetry trustworthiness simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single configuration once")
    p_run.add_argument("--config", help="dotted-key config file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    p_sweep.add_argument("--grid", choices=("usecase", "extended"), required=True)
    p_sweep.add_argument("--modes", default="all",
                         help="'all' or comma-separated mode labels")
    p_sweep.add_argument("--reps", type=int, default=None)
    p_sweep.add_argument("--profile", choices=tuple(harness.PROFILES), default="desk")
    p_sweep.add_argument("--out-raw", required=True)
    p_sweep.add_argument("--out-mesh", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--base-seed", type=int, default=None)
    p_sweep.add_argument("--duration-days", type=float, default=None,
                         help="override the profile's run length")
    p_sweep.add_argument("--verbose", action="store_true")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_rep = sub.add_parser("report", help="summarise a mesh CSV")
    p_rep.add_argument("--mesh", required=True)
    p_rep.add_argument("--table", action="store_true",
                       help="print per-mode max/mean table")
    p_rep.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

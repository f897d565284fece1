"""STR computation, 99% confidence intervals, and the two normative CSV files.

The raw file holds one row per run; the mesh file aggregates repetitions per
grid point.  Both schemas are bit-exact contracts (header spelling, column
order, row order); numbers are written as shortest round-trip decimals so
read-back equality holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import stats as _sstats

from .telemetry import MODE_LABELS, Outcome, TransactionResolution

RAW_HEADER = "mode,pb0,spots,redundancy,rep,seed,str"
MESH_HEADER = "mode,pb0,spots,redundancy,n_reps,str_mean,str_ci99_half"


class MetricsError(ValueError):
    pass


def successful_transaction_rate(resolutions: Sequence) -> float:
    """Fraction of successful transactions; refuses an empty set rather than
    silently reporting 0."""
    n = len(resolutions)
    if n == 0:
        raise MetricsError("STR is undefined for an empty resolution set")
    ok = 0
    for r in resolutions:
        outcome = r.outcome if isinstance(r, TransactionResolution) else r
        if outcome is Outcome.SUCCESS:
            ok += 1
    return ok / n


def mean_ci99(samples: Sequence[float]) -> tuple[float, float]:
    """Student-t 99% interval: half width t(0.995, k-1) * s / sqrt(k)."""
    k = len(samples)
    if k < 2:
        raise MetricsError("need at least 2 samples for a confidence interval")
    mean = sum(samples) / k
    var = sum((x - mean) ** 2 for x in samples) / (k - 1)
    s = math.sqrt(var)
    if s == 0.0:
        return mean, 0.0
    t = float(_sstats.t.ppf(0.995, k - 1))
    return mean, t * s / math.sqrt(k)


@dataclass(frozen=True)
class RawRow:
    mode: str
    pb0: float
    spots: int
    redundancy: int
    rep: int
    seed: int
    str_value: float


@dataclass(frozen=True)
class StrReport:
    mode: str
    pb0: float
    spots: int
    redundancy: int
    n_reps: int
    str_mean: float
    ci99_half: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.str_mean <= 1.0:
            raise MetricsError(f"str_mean out of [0,1]: {self.str_mean}")
        if self.ci99_half < 0.0:
            raise MetricsError("ci99_half must be >= 0")


@dataclass(frozen=True)
class GridSpec:
    """The grid a mesh file must cover: X = pb0 values, Y = (spots, redundancy)
    points, one surface per mode."""
    pb0_values: tuple[float, ...]
    y_points: tuple[tuple[int, int], ...]
    modes: tuple[str, ...]

    def expected_points(self) -> list[tuple[str, float, int, int]]:
        return [(m, p, s, n)
                for m in self.modes
                for p in self.pb0_values
                for s, n in self.y_points]


USECASE_PB0 = (0.1, 0.01, 0.001)
USECASE_Y = tuple((s, n) for s in (32, 64) for n in range(1, 6))
EXTENDED_Y = tuple((s, n) for s in (32, 64) for n in range(4, 11))


def usecase_grid(modes: Iterable[str] = MODE_LABELS) -> GridSpec:
    return GridSpec(USECASE_PB0, USECASE_Y, tuple(modes))


def extended_grid(modes: Iterable[str] = MODE_LABELS) -> GridSpec:
    return GridSpec(USECASE_PB0, EXTENDED_Y, tuple(modes))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def export_raw(rows: Sequence[RawRow], path: str) -> None:
    """One row per run, in the order given (grid order then rep)."""
    try:
        with open(path, "w") as f:
            f.write(RAW_HEADER + "\n")
            for r in rows:
                f.write(",".join((r.mode, _fmt(r.pb0), str(r.spots), str(r.redundancy),
                                  str(r.rep), str(r.seed), _fmt(r.str_value))) + "\n")
    except OSError as exc:
        raise MetricsError(f"cannot write raw CSV {path!r}: {exc}") from exc


def aggregate(rows: Sequence[RawRow]) -> list[StrReport]:
    """Collapse repetitions into one report per (mode, pb0, spots, redundancy).
    Rows are sorted before summation so the arithmetic order is fixed."""
    groups: dict[tuple, list[RawRow]] = {}
    for r in rows:
        groups.setdefault((r.mode, r.pb0, r.spots, r.redundancy), []).append(r)
    reports = []
    for key in sorted(groups, key=lambda k: (_mode_rank(k[0]), -k[1], k[2], k[3])):
        rs = sorted(groups[key], key=lambda r: r.rep)
        samples = [r.str_value for r in rs]
        if len(samples) >= 2:
            mean, half = mean_ci99(samples)
        else:
            mean, half = samples[0], 0.0
        reports.append(StrReport(key[0], key[1], key[2], key[3],
                                 len(samples), mean, half))
    return reports


def _mode_rank(label: str) -> int:
    try:
        return MODE_LABELS.index(label)
    except ValueError:
        return len(MODE_LABELS)


def export_mesh(reports: Sequence[StrReport], path: str, grid: GridSpec) -> None:
    """One row per grid point per mode; refuses to write a partial grid."""
    have = {(r.mode, r.pb0, r.spots, r.redundancy): r for r in reports}
    missing = [p for p in grid.expected_points() if p not in have]
    if missing:
        shown = ", ".join(f"(mode={m}, pb0={p}, spots={s}, redundancy={n})"
                          for m, p, s, n in missing[:8])
        more = "" if len(missing) <= 8 else f" and {len(missing) - 8} more"
        raise MetricsError(f"mesh grid incomplete; missing {shown}{more}")
    try:
        with open(path, "w") as f:
            f.write(MESH_HEADER + "\n")
            for point in grid.expected_points():
                r = have[point]
                f.write(",".join((r.mode, _fmt(r.pb0), str(r.spots), str(r.redundancy),
                                  str(r.n_reps), _fmt(r.str_mean), _fmt(r.ci99_half)))
                        + "\n")
    except OSError as exc:
        raise MetricsError(f"cannot write mesh CSV {path!r}: {exc}") from exc


def load_raw(path: str) -> list[RawRow]:
    rows = []
    with open(path) as f:
        header = f.readline().rstrip("\n")
        if header != RAW_HEADER:
            raise MetricsError(f"unexpected raw header in {path!r}: {header!r}")
        for line in f:
            mode, pb0, spots, red, rep, seed, sv = line.rstrip("\n").split(",")
            rows.append(RawRow(mode, float(pb0), int(spots), int(red),
                               int(rep), int(seed), float(sv)))
    return rows


def load_mesh(path: str) -> list[StrReport]:
    reports = []
    with open(path) as f:
        header = f.readline().rstrip("\n")
        if header != MESH_HEADER:
            raise MetricsError(f"unexpected mesh header in {path!r}: {header!r}")
        for line in f:
            mode, pb0, spots, red, k, mean, half = line.rstrip("\n").split(",")
            reports.append(StrReport(mode, float(pb0), int(spots), int(red),
                                     int(k), float(mean), float(half)))
    return reports


def mode_summary(reports: Sequence[StrReport]) -> list[tuple[str, float, float]]:
    """Per-mode (max, unweighted mean) of str_mean across grid points, in
    canonical mode order."""
    by_mode: dict[str, list[float]] = {}
    for r in reports:
        by_mode.setdefault(r.mode, []).append(r.str_mean)
    out = []
    for mode in sorted(by_mode, key=_mode_rank):
        vals = by_mode[mode]
        out.append((mode, max(vals), sum(vals) / len(vals)))
    return out

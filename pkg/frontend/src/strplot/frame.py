"""Mesh CSV loading and validation.

The input schema is the simulator's normative mesh file:
``mode,pb0,spots,redundancy,n_reps,str_mean,str_ci99_half``.  Rows are keyed
by (mode, pb0, spots, redundancy); the grid must be the full cross product of
the modes, fault probabilities and (spots x redundancy) points present, and
every value must lie in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

MESH_HEADER = "mode,pb0,spots,redundancy,n_reps,str_mean,str_ci99_half"


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class MeshRow:
    mode: str
    pb0: float
    spots: int
    redundancy: int
    n_reps: int
    str_mean: float
    ci99_half: float


class MeshFrame:
    """Parsed mesh rows plus the grid axes they span."""

    def __init__(self, rows: list[MeshRow]):
        if not rows:
            raise MeshError("mesh file holds no rows")
        self.rows = rows
        self.by_key = {(r.mode, r.pb0, r.spots, r.redundancy): r for r in rows}
        self.modes = sorted({r.mode for r in rows},
                            key=lambda m: _first_index(rows, m))
        self.pb0_values = sorted({r.pb0 for r in rows}, reverse=True)
        self.y_points = sorted({(r.spots, r.redundancy) for r in rows})
        self._check()

    def _check(self) -> None:
        missing = []
        for m in self.modes:
            for p in self.pb0_values:
                for s, n in self.y_points:
                    if (m, p, s, n) not in self.by_key:
                        missing.append((m, p, s, n))
        if missing:
            shown = ", ".join(f"(mode={m}, pb0={p}, spots={s}, redundancy={n})"
                              for m, p, s, n in missing[:8])
            more = "" if len(missing) <= 8 else f" and {len(missing) - 8} more"
            raise MeshError(f"mesh grid incomplete; missing {shown}{more}")
        bad = [r for r in self.rows if not 0.0 <= r.str_mean <= 1.0]
        if bad:
            r = bad[0]
            raise MeshError(f"str_mean out of [0, 1] at (mode={r.mode}, "
                            f"pb0={r.pb0}, spots={r.spots}, "
                            f"redundancy={r.redundancy}): {r.str_mean}")

    def value(self, mode: str, pb0: float, spots: int, redundancy: int) -> float:
        return self.by_key[(mode, pb0, spots, redundancy)].str_mean

    def y_labels(self) -> list[str]:
        return [f"{s}x{n}" for s, n in self.y_points]

    def surface(self, mode: str) -> list[list[float]]:
        """Z values indexed [pb0][y_point], pb0 from highest down."""
        return [[self.value(mode, p, s, n) for s, n in self.y_points]
                for p in self.pb0_values]

    def summary(self) -> list[tuple[str, float, float]]:
        """Per-mode (max, unweighted mean) of str_mean over all grid points."""
        out = []
        for m in self.modes:
            vals = [r.str_mean for r in self.rows if r.mode == m]
            out.append((m, max(vals), sum(vals) / len(vals)))
        return out


def _first_index(rows: list[MeshRow], mode: str) -> int:
    for i, r in enumerate(rows):
        if r.mode == mode:
            return i
    return len(rows)


def load_mesh(path: str) -> MeshFrame:
    rows = []
    try:
        with open(path) as f:
            header = f.readline().rstrip("\n")
            if header != MESH_HEADER:
                raise MeshError(f"unexpected mesh header in {path!r}: {header!r}")
            for lineno, line in enumerate(f, 2):
                parts = line.rstrip("\n").split(",")
                if len(parts) != 7:
                    raise MeshError(f"{path}:{lineno}: expected 7 columns")
                mode, pb0, spots, red, k, mean, half = parts
                rows.append(MeshRow(mode, float(pb0), int(spots), int(red),
                                    int(k), float(mean), float(half)))
    except OSError as exc:
        raise MeshError(f"cannot read mesh CSV {path!r}: {exc}") from exc
    return MeshFrame(rows)

"""Surface and table rendering for STR meshes.

One coloured surface per mode over shared axes: X is the byzantine fault
probability, Y the (spots x redundancy) points in grid order, Z the mean STR
in [0, 1].  A translucent plane marks the 0.6 operational threshold.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from .frame import MeshError, MeshFrame  # noqa: E402

THRESHOLD = 0.6

_CMAPS = ["viridis", "plasma", "cividis", "magma", "inferno",
          "spring", "summer", "autumn", "winter"]


def render_mesh(frame: MeshFrame, modes: list[str], out_path: str,
                dpi: int = 130) -> None:
    """Write one figure with a surface per requested mode."""
    if not modes:
        raise MeshError("no modes requested")
    unknown = [m for m in modes if m not in frame.modes]
    if unknown:
        raise MeshError(f"modes not present in mesh: {', '.join(unknown)}")
    fig = plt.figure(figsize=(11, 7))
    ax = fig.add_subplot(111, projection="3d")
    n_x = len(frame.pb0_values)
    n_y = len(frame.y_points)
    xs, ys = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="ij")
    handles = []
    for k, mode in enumerate(modes):
        z = np.asarray(frame.surface(mode))
        cmap = plt.get_cmap(_CMAPS[k % len(_CMAPS)])
        ax.plot_surface(xs, ys, z, cmap=cmap, alpha=0.75,
                        linewidth=0.2, edgecolor="gray",
                        vmin=0.0, vmax=1.0)
        handles.append(Line2D([0], [0], color=cmap(0.7), lw=3, label=mode))
    thr = np.full_like(xs, THRESHOLD, dtype=float)
    ax.plot_surface(xs, ys, thr, color="red", alpha=0.15, linewidth=0)
    handles.append(Line2D([0], [0], color="red", lw=3, alpha=0.4,
                          label=f"{THRESHOLD:.1f} threshold"))
    ax.set_xticks(np.arange(n_x))
    ax.set_xticklabels([_fmt_pb0(p) for p in frame.pb0_values])
    ax.set_yticks(np.arange(n_y))
    ax.set_yticklabels(frame.y_labels(), fontsize=7)
    ax.set_zlim(0.0, 1.0)
    ax.set_xlabel("byzantine fault probability")
    ax.set_ylabel("measuring spots x redundant sensors")
    ax.set_zlabel("successful transaction rate")
    ax.legend(handles=handles, loc="upper left", fontsize=8)
    # 3d axes ignore tight_layout; fixed margins keep the labels visible
    fig.subplots_adjust(left=0.02, right=0.98, bottom=0.05, top=0.97)
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)


def _fmt_pb0(p: float) -> str:
    exp = np.log10(p)
    if np.isclose(exp, round(exp)):
        return f"1e{int(round(exp))}"
    return repr(p)


def render_table(frame: MeshFrame) -> str:
    """Per-mode max and unweighted mean of str_mean, three decimals."""
    rows = frame.summary()
    name_w = max(len("mode"), max(len(m) for m, _, _ in rows))
    lines = [f"{'mode'.ljust(name_w)}  max    mean"]
    for mode, mx, mean in rows:
        lines.append(f"{mode.ljust(name_w)}  {mx:.3f}  {mean:.3f}")
    return "\n".join(lines)

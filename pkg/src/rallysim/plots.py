"""Figure rendering for the report-emitting commands (PNG, Agg backend).

Each helper draws one figure and writes it next to the delimited output.
PNG metadata is pinned so repeated runs of the same experiment produce
byte-identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

# Critical thresholds drawn on the error curve: the lateral slack a swing
# can absorb, and one control step of timing slack.
POSITION_THRESHOLD_M = 0.075
TIME_THRESHOLD_S = 0.020

_PNG_METADATA = {"Software": "rallysim"}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_error_curve(curve, path) -> None:
    """Render position/time prediction error against time-to-strike.

    Bin means with a one-sigma band, on a reversed time axis so the strike
    approaches to the right; dashed lines mark the critical thresholds.
    """
    centers = np.array([b.tts + curve.bin_width / 2.0 for b in curve.bins])
    pos_mean = np.array([b.pos_mean for b in curve.bins])
    pos_std = np.array([b.pos_std for b in curve.bins])
    t_mean = np.array([b.t_mean for b in curve.bins])
    t_std = np.array([b.t_std for b in curve.bins])

    fig, (ax_p, ax_t) = plt.subplots(1, 2, figsize=(9.0, 3.6), constrained_layout=True)
    ax_p.plot(centers, 100.0 * pos_mean, color="tab:blue")
    ax_p.fill_between(centers, 100.0 * np.maximum(pos_mean - pos_std, 0.0),
                      100.0 * (pos_mean + pos_std), color="tab:blue", alpha=0.2)
    ax_p.axhline(100.0 * POSITION_THRESHOLD_M, color="tab:red", ls="--", lw=1.0,
                 label=f"{100 * POSITION_THRESHOLD_M:.1f} cm")
    ax_p.set_ylabel("strike position error [cm]")
    ax_t.plot(centers, 1000.0 * t_mean, color="tab:green")
    ax_t.fill_between(centers, 1000.0 * np.maximum(t_mean - t_std, 0.0),
                      1000.0 * (t_mean + t_std), color="tab:green", alpha=0.2)
    ax_t.axhline(1000.0 * TIME_THRESHOLD_S, color="tab:red", ls="--", lw=1.0,
                 label=f"{1000 * TIME_THRESHOLD_S:.0f} ms")
    ax_t.set_ylabel("strike time error [ms]")
    for ax in (ax_p, ax_t):
        ax.set_xlabel("time to strike [s]")
        ax.invert_xaxis()
        ax.grid(True, alpha=0.3)
        ax.legend(loc="upper left", frameon=False)
    fig.suptitle(f"prediction error vs. time to strike "
                 f"({curve.trajectory_count} trajectories)")
    _save(fig, path)


def save_grid_heatmap(report, path) -> None:
    """Render per-cell hit and return rates over the hit plane."""
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0), constrained_layout=True)
    for ax, title, counts in (
        (axes[0], "hit rate", [(r.cell, r.hits, r.trials) for r in report.cells]),
        (axes[1], "return rate", [(r.cell, r.returns, r.trials) for r in report.cells]),
    ):
        for cell, num, den in counts:
            rate = num / den if den else 0.0
            color = plt.cm.RdYlGn(rate)
            ax.add_patch(plt.Rectangle((cell.y_lo, cell.z_lo),
                                       cell.y_hi - cell.y_lo, cell.z_hi - cell.z_lo,
                                       facecolor=color, edgecolor="black", lw=0.5))
            ax.text(0.5 * (cell.y_lo + cell.y_hi), 0.5 * (cell.z_lo + cell.z_hi),
                    f"{num}/{den}", ha="center", va="center", fontsize=7)
        ys = [c for r in report.cells for c in (r.cell.y_lo, r.cell.y_hi)]
        zs = [c for r in report.cells for c in (r.cell.z_lo, r.cell.z_hi)]
        ax.set_xlim(min(ys) - 0.05, max(ys) + 0.05)
        ax.set_ylim(min(zs) - 0.05, max(zs) + 0.05)
        ax.set_aspect("equal")
        ax.set_xlabel("y on hit plane [m]")
        ax.set_ylabel("z above table [m]")
        ax.set_title(title)
    agg = (f"aggregate: hit {100 * report.hit_rate:.1f}% / "
           f"return {100 * report.return_rate:.1f}%  (seed {report.seed})")
    fig.suptitle(agg)
    _save(fig, path)


def save_trajectory(segments, geometry, path) -> None:
    """Render a side (x-z) and top (x-y) view of one or more flights."""
    if not isinstance(segments, (list, tuple)):
        segments = [segments]
    fig, (ax_s, ax_t) = plt.subplots(
        2, 1, figsize=(8.0, 6.0), sharex=True, constrained_layout=True)
    half = geometry.length_x / 2.0
    # table, net and hit plane in the side view
    ax_s.plot([-half, half], [0.0, 0.0], color="black", lw=2.0)
    ax_s.plot([0.0, 0.0], [0.0, geometry.net_height], color="gray", lw=2.0)
    ax_s.axvline(geometry.hit_plane_x, color="tab:red", ls=":", lw=1.0)
    ax_s.axhline(geometry.floor_z, color="black", lw=0.5, alpha=0.5)
    for seg in segments:
        ax_s.plot(seg.ps[:, 0], seg.ps[:, 2], lw=1.0)
        for ev in seg.bounce_events:
            ax_s.plot([ev.p[0]], [ev.p[2]], "kx", ms=5)
    ax_s.set_ylabel("z [m]")
    ax_s.grid(True, alpha=0.3)
    # footprint in the top view
    w = geometry.width_y / 2.0
    ax_t.add_patch(plt.Rectangle((-half, -w), geometry.length_x, geometry.width_y,
                                 facecolor="none", edgecolor="black", lw=1.0))
    ax_t.axvline(geometry.hit_plane_x, color="tab:red", ls=":", lw=1.0)
    for seg in segments:
        ax_t.plot(seg.ps[:, 0], seg.ps[:, 1], lw=1.0)
    ax_t.set_xlabel("x [m]")
    ax_t.set_ylabel("y [m]")
    ax_t.set_aspect("equal")
    ax_t.grid(True, alpha=0.3)
    _save(fig, path)

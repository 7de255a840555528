"""Identify flight and bounce coefficients from recorded position streams.

The fitting relations are one-parameter regressions through the origin:

* drag:        ||a - g||   = k  * ||v||^2
* vertical:    |vz_after|  = Cv * |vz_before|
* horizontal:  |vh_after|  = Ch * |vh_before|   (x and y pooled)

Derivatives come from the same quadratic sliding-window fits used by the
online estimator, evaluated at window centers since this is offline work.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientData, MultipleBounces, NoBounceFound)
from .estimator import BOUNCE_BAND_M, quadratic_window_fit

# Window/guard defaults for offline derivative extraction. The drag fit uses a
# longer window than the online estimator: acceleration from a quadratic fit
# is noise-sensitive and the norm in the drag relation rectifies that noise
# into a positive bias, so we buy variance reduction with window length.
DRAG_FIT_WINDOW = 61
RESTITUTION_FIT_WINDOW = 31
BOUNCE_GUARD_SAMPLES = 3


@dataclass(frozen=True)
class FitReport:
    """Identified parameters with per-relation RMS residuals."""

    k_hat: float
    c_h_hat: float
    c_v_hat: float
    residuals: dict = field(default_factory=dict)
    trajectory_count: int = 0
    sample_count: int = 0

    def __post_init__(self):
        if not self.k_hat >= 0.0:
            raise ValueError("k_hat must be >= 0")
        for name, value in (("c_h_hat", self.c_h_hat), ("c_v_hat", self.c_v_hat)):
            if math.isnan(value):
                continue  # degenerate axis, flagged by the caller
            if not (0.0 < value <= 1.2):
                raise ValueError(f"{name} outside sanity bounds (0, 1.2]: {value!r}")
            if value > 1.0:
                warnings.warn(f"{name} = {value:.4f} exceeds 1; check input data",
                              stacklevel=2)


def find_bounce_indices(ts, zs, z_band: float = BOUNCE_BAND_M) -> list[int]:
    """Indices of the sample nearest each table bounce in a recorded stream.

    A bounce shows up as a local z minimum inside the band with descending
    motion before and ascending after (two-interval finite differences).
    Consecutive flips within a few samples collapse to one event.
    """
    ts = np.asarray(ts, dtype=float)
    zs = np.asarray(zs, dtype=float)
    n = ts.size
    if n < 5:
        return []
    span = np.minimum(np.arange(n), 2)
    prev = np.arange(n) - span
    with np.errstate(invalid="ignore"):
        fd = (zs - zs[prev]) / (ts - ts[prev])
    hits = []
    for j in range(2, n):
        if fd[j - 1] < 0.0 < fd[j]:
            lo = max(j - 3, 0)
            hi = min(j + 2, n)
            if min(zs[lo:hi]) < z_band:
                idx = lo + int(np.argmin(zs[lo:hi]))
                if not hits or idx - hits[-1] > 5:
                    hits.append(idx)
    return hits


def _ratio_through_origin(before: np.ndarray, after: np.ndarray) -> tuple[float, float]:
    """Slope and RMS residual of |after| = c * |before| through the origin."""
    x = np.abs(np.asarray(before, dtype=float))
    y = np.abs(np.asarray(after, dtype=float))
    denom = float(x @ x)
    if denom <= 0.0:
        return float("nan"), float("nan")
    c = float(x @ y) / denom
    r = y - c * x
    return c, float(np.sqrt(np.mean(r * r)))


def restitution_from_velocity_pairs(pairs) -> tuple[float, float, dict]:
    """Fit (C_h, C_v) from (v_before, v_after) bounce velocity pairs.

    Horizontal x and y components are pooled into one regression. A degenerate
    horizontal data set (all zeros) yields C_h = nan and a warning.
    """
    before = np.asarray([p[0] for p in pairs], dtype=float)
    after = np.asarray([p[1] for p in pairs], dtype=float)
    if before.size == 0:
        raise InsufficientData("no bounce velocity pairs")
    c_v, res_v = _ratio_through_origin(before[:, 2], after[:, 2])
    h_before = np.concatenate([before[:, 0], before[:, 1]])
    h_after = np.concatenate([after[:, 0], after[:, 1]])
    c_h, res_h = _ratio_through_origin(h_before, h_after)
    if math.isnan(c_h):
        warnings.warn("horizontal restitution undefined: no horizontal motion",
                      stacklevel=2)
    return c_h, c_v, {"horizontal": res_h, "vertical": res_v}


def _window_derivatives(ts, ps, window: int, stride: int):
    """Yield (v, a) from centered quadratic fits over sliding windows."""
    n = len(ts)
    for start in range(0, n - window + 1, stride):
        sl = slice(start, start + window)
        t_mid = ts[start + window // 2]
        _, v, a = quadratic_window_fit(ts[sl], ps[sl], t_mid)
        yield v, a


def fit_drag(trajectories, g=(0.0, 0.0, -9.81), window: int = DRAG_FIT_WINDOW,
             z_band: float = BOUNCE_BAND_M) -> tuple[float, float]:
    """Estimate the drag coefficient k from recorded streams.

    Each trajectory is split at detected bounces and every bounce-free arc
    long enough for the fit window contributes interior (v, a) samples.
    Returns (k_hat, rms_residual) of the ``||a - g|| = k ||v||^2`` relation.
    """
    g = np.asarray(g, dtype=float)
    speeds_sq, drag_mags = [], []
    usable = 0
    for rec in trajectories:
        for ts, ps in _bounce_free_arcs(rec, z_band):
            if ts.size < window:
                continue
            usable += 1
            for v, a in _window_derivatives(ts, ps, window, stride=max(window // 8, 1)):
                speeds_sq.append(float(v @ v))
                drag_mags.append(float(np.linalg.norm(a - g)))
    if not speeds_sq:
        raise InsufficientData(
            f"no bounce-free arc with >= {window} samples; cannot fit drag")
    k_hat, rms = fit_drag_from_derivatives(speeds_sq, drag_mags)
    return k_hat, rms


def fit_drag_from_derivatives(speeds_sq, drag_mags) -> tuple[float, float]:
    """Closed-form slope of ||a - g|| on ||v||^2 through the origin."""
    x = np.asarray(speeds_sq, dtype=float)
    y = np.asarray(drag_mags, dtype=float)
    denom = float(x @ x)
    if denom <= 0.0:
        raise InsufficientData("all velocity samples are zero; drag unidentifiable")
    k = float(x @ y) / denom
    r = y - k * x
    return max(k, 0.0), float(np.sqrt(np.mean(r * r)))


def _bounce_free_arcs(rec, z_band: float):
    """Split a record into maximal arcs that contain no bounce."""
    idxs = find_bounce_indices(rec.ts, rec.ps[:, 2], z_band)
    guard = BOUNCE_GUARD_SAMPLES
    cuts = [0]
    for i in idxs:
        cuts.extend([max(i - guard, 0), min(i + guard + 1, len(rec.ts))])
    cuts.append(len(rec.ts))
    for lo, hi in zip(cuts[::2], cuts[1::2]):
        if hi - lo >= 3:
            yield rec.ts[lo:hi], rec.ps[lo:hi]


def fit_restitution(trajectories, window: int = RESTITUTION_FIT_WINDOW,
                    z_band: float = BOUNCE_BAND_M) -> tuple[float, float, dict]:
    """Estimate (C_h, C_v) from streams that each contain exactly one bounce.

    Velocities immediately before/after impact are extrapolated to the bounce
    time from quadratic fits over windows strictly on either side, excluding
    the samples nearest the impact.
    """
    pairs = []
    for rec in trajectories:
        idxs = find_bounce_indices(rec.ts, rec.ps[:, 2], z_band)
        if not idxs:
            raise NoBounceFound(f"record {rec.id!r} contains no bounce")
        if len(idxs) > 1:
            raise MultipleBounces(f"record {rec.id!r} contains {len(idxs)} bounces")
        pairs.append(_bounce_pair(rec, idxs[0], window))
    return restitution_from_velocity_pairs(pairs)


def _bounce_pair(rec, idx: int, window: int):
    guard = BOUNCE_GUARD_SAMPLES
    pre = slice(max(idx - guard - window + 1, 0), idx - guard + 1)
    post = slice(idx + guard, min(idx + guard + window, len(rec.ts)))
    ts_pre, ps_pre = rec.ts[pre], rec.ps[pre]
    ts_post, ps_post = rec.ts[post], rec.ps[post]
    if ts_pre.size < 5 or ts_post.size < 5:
        raise InsufficientData(
            f"record {rec.id!r}: too few samples around the bounce")
    t_b = _bounce_time(ts_pre, ps_pre[:, 2], ts_post, ps_post[:, 2], rec.ts[idx])
    _, v_pre, _ = quadratic_window_fit(ts_pre, ps_pre, t_b)
    _, v_post, _ = quadratic_window_fit(ts_post, ps_post, t_b)
    return v_pre, v_post


def _bounce_time(ts_pre, zs_pre, ts_post, zs_post, t_guess: float) -> float:
    """Impact time from the surface crossings of the side fits.

    Each side's quadratic z(t) is extrapolated to z = 0; the crossing nearest
    the minimum-z sample is taken and the two sides averaged. Falls back to
    the sample time when a fit has no real root.
    """
    roots = []
    for ts, zs in ((ts_pre, zs_pre), (ts_post, zs_post)):
        c2, c1, c0 = np.polyfit(ts - t_guess, zs, 2)
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0 or abs(c2) < 1e-12:
            continue
        sq = math.sqrt(disc)
        cands = [(-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)]
        roots.append(t_guess + min(cands, key=abs))
    return float(np.mean(roots)) if roots else float(t_guess)


def identify_params(trajectories, g=(0.0, 0.0, -9.81)) -> FitReport:
    """Full identification: drag plus restitution from one trajectory set."""
    trajectories = list(trajectories)
    if not trajectories:
        raise InsufficientData("no trajectories to fit")
    k_hat, drag_rms = fit_drag(trajectories, g=g)
    c_h, c_v, res = fit_restitution(trajectories)
    residuals = {"drag": drag_rms, **res}
    return FitReport(
        k_hat=k_hat,
        c_h_hat=c_h,
        c_v_hat=c_v,
        residuals=residuals,
        trajectory_count=len(trajectories),
        sample_count=int(sum(len(r) for r in trajectories)),
    )

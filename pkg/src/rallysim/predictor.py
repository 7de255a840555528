"""Strike prediction at the virtual hit plane and error-curve evaluation.

A prediction integrates the hybrid flight model forward from a state estimate
until the ball crosses the hit plane moving toward the robot. Error curves
replay recorded streams through the estimator, predict at every emitted
estimate, and bin errors by remaining time to the true crossing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (DEFAULT_HORIZON, DEFAULT_STEP, HitPlane, PhysicsParams,
                       Termination, integrate)
from .errors import InvariantViolation, NonTermination, NoPlaneCrossing
from .estimator import BallTracker, EstimatorWindow, StateEstimate, quadratic_window_fit
from .geometry import BallState, TableGeometry, _frozen, _vec3

ERROR_BIN_WIDTH = 0.05  # seconds of time-to-strike per report bin


@dataclass(frozen=True)
class StrikePrediction:
    """Predicted plane crossing: when, where, how fast, and bounces en route.

    ``bounce_count`` > 1 marks an unusual flight (legal shots bounce once);
    callers may treat such predictions with suspicion.
    """

    t_strike: float
    p_strike: np.ndarray
    v_incoming: np.ndarray
    bounce_count: int

    def __post_init__(self):
        object.__setattr__(self, "p_strike", _frozen(_vec3(self.p_strike).copy()))
        object.__setattr__(self, "v_incoming", _frozen(_vec3(self.v_incoming).copy()))
        if not self.v_incoming[0] < 0.0:
            raise InvariantViolation("predicted crossing must move toward the robot")

    @property
    def multi_bounce(self) -> bool:
        return self.bounce_count > 1


def predict_strike(
    estimate: StateEstimate,
    params: PhysicsParams,
    geometry: TableGeometry,
    step: float = DEFAULT_STEP,
    horizon: float = DEFAULT_HORIZON,
) -> StrikePrediction:
    """Propagate an estimate to the hit plane.

    Raises NoPlaneCrossing when the flight never reaches the plane moving in
    -x within the horizon (receding ball, floor strike, or timeout).
    """
    initial = BallState(estimate.t, estimate.p_hat, estimate.v_hat)
    try:
        seg = integrate(initial, params, geometry, HitPlane(), step=step,
                        horizon=horizon, keep_samples=False)
    except NonTermination as exc:
        raise NoPlaneCrossing(f"no crossing within {horizon} s") from exc
    if seg.termination is not Termination.REACHED_PLANE:
        raise NoPlaneCrossing(
            f"flight ended with {seg.termination.value} before the hit plane")
    final = seg.final
    if abs(final.p[0] - geometry.hit_plane_x) > 1e-6:
        raise InvariantViolation("plane crossing localization failed")
    return StrikePrediction(final.t, final.p, final.v, len(seg.bounce_events))


@dataclass(frozen=True)
class ErrorBin:
    """Aggregate prediction error for one time-to-strike interval."""

    tts: float        # lower edge of the interval, seconds before the strike
    pos_mean: float
    pos_std: float
    t_mean: float
    t_std: float
    count: int


@dataclass(frozen=True)
class PredictionErrorCurve:
    """Binned prediction errors against time-to-strike, plus exclusions."""

    bins: tuple[ErrorBin, ...]
    trajectory_count: int
    excluded_count: int = 0
    bin_width: float = ERROR_BIN_WIDTH

    def __post_init__(self):
        edges = [b.tts for b in self.bins]
        if any(b2 >= b1 for b1, b2 in zip(edges, edges[1:])):
            raise InvariantViolation("bins must be ordered by decreasing time-to-strike")
        for b in self.bins:
            if min(b.pos_mean, b.pos_std, b.t_mean, b.t_std) < 0.0:
                raise InvariantViolation("error statistics must be non-negative")

    def at(self, tts: float) -> ErrorBin:
        """The bin whose [tts, tts + width) interval contains ``tts``."""
        for b in self.bins:
            if b.tts - 1e-9 <= tts < b.tts + self.bin_width - 1e-9:
                return b
        raise KeyError(f"no bin covers time-to-strike {tts!r}")

    def rows(self):
        """CSV rows: (tts, pos_mean, pos_std, t_mean, t_std)."""
        return [(b.tts, b.pos_mean, b.pos_std, b.t_mean, b.t_std) for b in self.bins]


def true_plane_crossing(ts, ps, plane_x: float) -> tuple[float, np.ndarray]:
    """Ground-truth crossing of a raw stream at the hit plane.

    Finds the first pair of samples straddling the plane with decreasing x and
    refines with a local quadratic fit plus one Newton step on x(t).
    """
    ts = np.asarray(ts, dtype=float)
    ps = np.asarray(ps, dtype=float)
    for i in range(1, ts.size):
        if ps[i - 1, 0] > plane_x >= ps[i, 0]:
            lo = max(i - 4, 0)
            hi = min(i + 3, ts.size)
            s = (ps[i - 1, 0] - plane_x) / (ps[i - 1, 0] - ps[i, 0])
            t_lin = ts[i - 1] + s * (ts[i] - ts[i - 1])
            if hi - lo >= 3:
                p0, v0, a0 = quadratic_window_fit(ts[lo:hi], ps[lo:hi], t_lin)
                if v0[0] != 0.0:
                    dt = (plane_x - p0[0]) / v0[0]
                    p_star = p0 + v0 * dt + 0.5 * a0 * dt * dt
                    return t_lin + dt, p_star
            p_star = ps[i - 1] + s * (ps[i] - ps[i - 1])
            return t_lin, p_star
    raise NoPlaneCrossing("stream never crosses the hit plane moving in -x")


def evaluate_prediction_errors(
    trajectories,
    params: PhysicsParams,
    geometry: TableGeometry,
    window: int | None = None,
    min_fit_count: int | None = None,
    bin_width: float = ERROR_BIN_WIDTH,
    step: float = DEFAULT_STEP,
) -> PredictionErrorCurve:
    """Replay recorded streams and bin prediction errors by time-to-strike.

    Ground truth per trajectory comes from ``meta["truth"]`` when the
    generator stored the pre-noise crossing, otherwise from interpolating the
    raw stream at the plane. Estimates that fail to produce a crossing are
    counted as exclusions rather than errors.
    """
    pos_errs: dict[int, list[float]] = {}
    t_errs: dict[int, list[float]] = {}
    excluded = 0
    count = 0
    for rec in trajectories:
        count += 1
        truth = rec.meta.get("truth") if isinstance(rec.meta, dict) else None
        if truth:
            t_true = float(truth["t_strike"])
            p_true = np.asarray(truth["p_strike"], dtype=float)
        else:
            t_true, p_true = true_plane_crossing(rec.ts, rec.ps, geometry.hit_plane_x)
        kwargs = {}
        if window is not None:
            kwargs["capacity"] = window
        if min_fit_count is not None:
            kwargs["min_fit_count"] = min_fit_count
        tracker = BallTracker(EstimatorWindow(**kwargs))
        for t, p in rec.samples():
            est = tracker.push(t, p)
            if est is None:
                continue
            tts = t_true - est.t
            if tts <= 0.0:
                continue
            try:
                pred = predict_strike(est, params, geometry, step=step)
            except NoPlaneCrossing:
                excluded += 1
                continue
            idx = int(tts / bin_width)
            pos_errs.setdefault(idx, []).append(
                float(np.linalg.norm(pred.p_strike - p_true)))
            t_errs.setdefault(idx, []).append(abs(pred.t_strike - t_true))
    bins = []
    for idx in sorted(pos_errs, reverse=True):
        pe = np.asarray(pos_errs[idx])
        te = np.asarray(t_errs[idx])
        bins.append(ErrorBin(
            tts=idx * bin_width,
            pos_mean=float(pe.mean()), pos_std=float(pe.std()),
            t_mean=float(te.mean()), t_std=float(te.std()),
            count=int(pe.size),
        ))
    return PredictionErrorCurve(tuple(bins), trajectory_count=count,
                                excluded_count=excluded, bin_width=bin_width)

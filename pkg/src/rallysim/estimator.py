"""Sliding-window quadratic smoothing of a timestamped ball-position stream.

A bounded FIFO of the newest position measurements is fit per axis with an
ordinary least-squares quadratic; the fit and its derivative evaluated at the
newest timestamp give the position/velocity estimate. Detecting a table
bounce clears the buffer so estimates never blend pre- and post-bounce data.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvariantViolation, NonMonotonicTimestamp
from .geometry import _frozen, _vec3

WINDOW_CAPACITY = 31
MIN_FIT_COUNT = 7
BOUNCE_BAND_M = 0.02  # |z| band around the surface where a bounce may be flagged
DETECT_LOOKAHEAD = 2  # samples held back so detection precedes buffer entry


@dataclass(frozen=True)
class StateEstimate:
    """Smoothed ball state at the newest buffered timestamp."""

    t: float
    p_hat: np.ndarray
    v_hat: np.ndarray
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "p_hat", _frozen(_vec3(self.p_hat).copy()))
        object.__setattr__(self, "v_hat", _frozen(_vec3(self.v_hat).copy()))
        if not (np.all(np.isfinite(self.p_hat)) and np.all(np.isfinite(self.v_hat))):
            raise InvariantViolation("estimate must be finite")


def quadratic_window_fit(ts, ps, t_eval: float):
    """Independent per-axis quadratic LSQ over a sample window.

    Returns (p, v, a) evaluated at ``t_eval``. The time axis is shifted and
    scaled to [-1, 0]-order magnitude before solving, which keeps the normal
    equations well conditioned; the result is origin-independent.

    Requires at least 3 samples with distinct timestamps.
    """
    ts = np.asarray(ts, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if ts.size < 3:
        raise InsufficientData("quadratic fit needs at least 3 samples")
    span = ts[-1] - ts[0]
    if span <= 0.0:
        raise InvariantViolation("window timestamps must be increasing")
    u = (ts - t_eval) / span
    m = np.empty((ts.size, 3))
    m[:, 0] = 1.0
    m[:, 1] = u
    m[:, 2] = u * u
    g = m.T @ m
    b = m.T @ ps
    coef = np.linalg.solve(g, b)  # rows: value, slope, curvature (scaled)
    p = coef[0]
    v = coef[1] / span
    a = 2.0 * coef[2] / (span * span)
    return p, v, a


class EstimatorWindow:
    """Bounded FIFO of (t, p) samples with quadratic fit on push.

    ``push_sample`` returns a StateEstimate once at least ``min_fit_count``
    samples are buffered, and nothing before that.
    """

    def __init__(self, capacity: int = WINDOW_CAPACITY, min_fit_count: int = MIN_FIT_COUNT):
        if capacity < 3 or min_fit_count < 3 or min_fit_count > capacity:
            raise InvariantViolation(
                "need capacity >= min_fit_count >= 3 for a quadratic fit")
        self.capacity = int(capacity)
        self.min_fit_count = int(min_fit_count)
        self._buf: deque[tuple[float, float, float, float]] = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def last_t(self) -> float | None:
        return self._buf[-1][0] if self._buf else None

    def push_sample(self, t: float, p) -> StateEstimate | None:
        t = float(t)
        if self._buf and t <= self._buf[-1][0]:
            raise NonMonotonicTimestamp(
                f"sample at t={t!r} not after buffered t={self._buf[-1][0]!r}")
        x, y, z = (float(c) for c in p)
        self._buf.append((t, x, y, z))
        if len(self._buf) < self.min_fit_count:
            return None
        arr = np.asarray(self._buf)
        p_hat, v_hat, _ = quadratic_window_fit(arr[:, 0], arr[:, 1:], t)
        return StateEstimate(t, p_hat, v_hat, len(self._buf))

    def notify_bounce(self) -> None:
        """Drop all buffered samples (pre-bounce data must not leak into fits)."""
        self._buf.clear()


def detect_bounce(samples, z_band: float = BOUNCE_BAND_M) -> bool:
    """True when a raw stream shows a table bounce.

    A bounce is a sign reversal (downward then upward) of the finite-difference
    vertical velocity while the trajectory dips inside the ``z_band`` above the
    surface. Differences span two sample intervals, which keeps the sign test
    stable against millimeter measurement noise at 360 Hz.
    """
    ts, zs = [], []
    for t, p in samples:
        ts.append(float(t))
        zs.append(float(p[2]))
    n = len(ts)
    if n < 2:
        raise InsufficientData("bounce detection needs at least 2 samples")
    fd = []
    for j in range(n):
        i = max(j - 2, 0)
        if j == i:
            continue
        fd.append((zs[j] - zs[i]) / (ts[j] - ts[i]))
    for j in range(1, len(fd)):
        if fd[j - 1] < 0.0 < fd[j]:
            lo = max(j - 3, 0)
            if min(zs[lo : j + 2]) < z_band:
                return True
    return False


class BallTracker:
    """Streaming pipeline: bounce detection in front of an EstimatorWindow.

    Raw samples are delayed by a short lookahead queue before entering the
    fit buffer, so a bounce is always detected before any post-bounce sample
    can join a window still holding pre-bounce data. On detection everything
    buffered is discarded and the stream restarts from the current sample.
    """

    def __init__(self, window: EstimatorWindow | None = None,
                 z_band: float = BOUNCE_BAND_M, lookahead: int = DETECT_LOOKAHEAD):
        self.window = window if window is not None else EstimatorWindow()
        self.z_band = float(z_band)
        self.lookahead = int(lookahead)
        self._raw: deque[tuple[float, tuple[float, float, float]]] = deque(maxlen=8)
        self._pending: deque[tuple[float, tuple[float, float, float]]] = deque()
        self.bounce_count = 0

    def push(self, t: float, p) -> StateEstimate | None:
        """Feed one raw sample; may emit a (lookahead-delayed) estimate."""
        t = float(t)
        p = (float(p[0]), float(p[1]), float(p[2]))
        self._raw.append((t, p))
        if len(self._raw) >= 4 and detect_bounce(self._raw, self.z_band):
            self.window.notify_bounce()
            self._pending.clear()
            self._raw.clear()
            self._raw.append((t, p))
            self.bounce_count += 1
        self._pending.append((t, p))
        if len(self._pending) <= self.lookahead:
            return None
        t_old, p_old = self._pending.popleft()
        return self.window.push_sample(t_old, p_old)

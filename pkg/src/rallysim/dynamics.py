"""Hybrid ball flight model: quadratic-drag flight, table bounce, RK4 integration.

Continuous dynamics between impacts::

    a = -k * ||v|| * v + g

Discrete bounce at the table surface::

    v+ = (C_h * vx, C_h * vy, -C_v * vz)

The integrator is a classical fixed-step 4th-order Runge-Kutta scheme with
event localization by bisection. Events are table bounces (z = 0 downward
crossings inside the table footprint), hit-plane crossings, opponent-half
landings, and off-table floor strikes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .errors import InvariantViolation, NonTermination, NotAnImpactState
from .geometry import BallState, TableGeometry, _frozen, _vec3

MOCAP_RATE_HZ = 360.0
DEFAULT_STEP = 1.0 / MOCAP_RATE_HZ
DEFAULT_HORIZON = 10.0  # episode length; longer flights are considered stuck
EVENT_TIME_TOL = 1e-6
EVENT_POS_TOL = 1e-9


@dataclass(frozen=True)
class PhysicsParams:
    """Flight and impact coefficients.

    ``k`` is the aerodynamic drag coefficient (1/m), ``c_h``/``c_v`` the
    horizontal/vertical table restitution, ``c_r`` the racket restitution
    along its face normal.
    """

    k: float
    c_h: float
    c_v: float
    c_r: float = 0.8
    g: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.g is None:
            object.__setattr__(self, "g", np.array([0.0, 0.0, -9.81]))
        object.__setattr__(self, "g", _frozen(_vec3(self.g).copy()))
        if not self.k >= 0.0:
            raise InvariantViolation("drag coefficient k must be >= 0")
        for name in ("c_h", "c_v", "c_r"):
            val = getattr(self, name)
            if not (0.0 < val <= 1.0):
                raise InvariantViolation(f"{name} must lie in (0, 1], got {val!r}")
        if not self.g[2] < 0.0:
            raise InvariantViolation("gravity must point down (g.z < 0)")


def flight_acceleration(v, params: PhysicsParams) -> np.ndarray:
    """Acceleration of the ball in free flight."""
    v = np.asarray(v, dtype=float)
    return -params.k * math.sqrt(float(v @ v)) * v + params.g


def bounce_map(v_minus, params: PhysicsParams) -> np.ndarray:
    """Velocity reset applied at a table impact.

    Rejects velocities that are not moving into the table (vz >= 0).
    """
    v = np.asarray(v_minus, dtype=float)
    if not v[2] < 0.0:
        raise NotAnImpactState(f"bounce requires vz < 0, got vz = {v[2]!r}")
    return np.array([params.c_h * v[0], params.c_h * v[1], -params.c_v * v[2]])


class Termination(Enum):
    """Why an integrated flight segment ended."""

    REACHED_TIME = "reached_time"
    REACHED_PLANE = "reached_plane"
    HIT_FLOOR = "hit_floor"
    # The opponent-landing stop: the ball touched down on the far half and
    # play leaves the robot's side of the table.
    LEFT_TABLE = "left_table"


@dataclass(frozen=True)
class TimeLimit:
    """Stop after ``duration`` seconds of flight."""

    duration: float

    def __post_init__(self):
        if not self.duration > 0.0:
            raise InvariantViolation("time limit must be positive")


@dataclass(frozen=True)
class HitPlane:
    """Stop when the ball crosses the hit plane moving toward the robot."""


@dataclass(frozen=True)
class OpponentLanding:
    """Stop at the first touchdown on the opponent half of the table."""


StopCondition = TimeLimit | HitPlane | OpponentLanding


@dataclass(frozen=True)
class BounceEvent:
    """A localized table impact with pre- and post-impact velocities."""

    t: float
    p: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(_vec3(self.p).copy()))
        object.__setattr__(self, "v_minus", _frozen(_vec3(self.v_minus).copy()))
        object.__setattr__(self, "v_plus", _frozen(_vec3(self.v_plus).copy()))


@dataclass(frozen=True)
class FlightSegment:
    """An integrated flight: sample arrays, bounce events, and why it stopped.

    ``ts`` has shape (N,), ``ps`` and ``vs`` shape (N, 3); timestamps are
    strictly increasing and include the initial and terminal states (plus the
    post-bounce state at each impact when samples are kept).
    """

    ts: np.ndarray
    ps: np.ndarray
    vs: np.ndarray
    bounce_events: tuple[BounceEvent, ...]
    termination: Termination

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        ps = np.asarray(self.ps, dtype=float)
        vs = np.asarray(self.vs, dtype=float)
        if ts.ndim != 1 or ps.shape != (ts.size, 3) or vs.shape != (ts.size, 3):
            raise InvariantViolation("inconsistent sample array shapes")
        if ts.size < 2:
            raise InvariantViolation("a flight segment needs at least two samples")
        if not np.all(np.diff(ts) > 0.0):
            raise InvariantViolation("sample timestamps must be strictly increasing")
        object.__setattr__(self, "ts", _frozen(ts))
        object.__setattr__(self, "ps", _frozen(ps))
        object.__setattr__(self, "vs", _frozen(vs))

    def __len__(self) -> int:
        return int(self.ts.size)

    def state(self, i: int) -> BallState:
        return BallState(self.ts[i], self.ps[i], self.vs[i])

    @property
    def initial(self) -> BallState:
        return self.state(0)

    @property
    def final(self) -> BallState:
        return self.state(-1)

    def states(self) -> Iterator[BallState]:
        for i in range(len(self)):
            yield self.state(i)


def _rk4_step(px, py, pz, vx, vy, vz, h, k, gx, gy, gz):
    """One RK4 step of the drag-flight ODE, unrolled to scalars for speed."""
    s = k * math.sqrt(vx * vx + vy * vy + vz * vz)
    a1x = -s * vx + gx
    a1y = -s * vy + gy
    a1z = -s * vz + gz

    w = 0.5 * h
    v2x = vx + w * a1x
    v2y = vy + w * a1y
    v2z = vz + w * a1z
    s = k * math.sqrt(v2x * v2x + v2y * v2y + v2z * v2z)
    a2x = -s * v2x + gx
    a2y = -s * v2y + gy
    a2z = -s * v2z + gz

    v3x = vx + w * a2x
    v3y = vy + w * a2y
    v3z = vz + w * a2z
    s = k * math.sqrt(v3x * v3x + v3y * v3y + v3z * v3z)
    a3x = -s * v3x + gx
    a3y = -s * v3y + gy
    a3z = -s * v3z + gz

    v4x = vx + h * a3x
    v4y = vy + h * a3y
    v4z = vz + h * a3z
    s = k * math.sqrt(v4x * v4x + v4y * v4y + v4z * v4z)
    a4x = -s * v4x + gx
    a4y = -s * v4y + gy
    a4z = -s * v4z + gz

    r = h / 6.0
    return (
        px + r * (vx + 2.0 * (v2x + v3x) + v4x),
        py + r * (vy + 2.0 * (v2y + v3y) + v4y),
        pz + r * (vz + 2.0 * (v2z + v3z) + v4z),
        vx + r * (a1x + 2.0 * (a2x + a3x) + a4x),
        vy + r * (a1y + 2.0 * (a2y + a3y) + a4y),
        vz + r * (a1z + 2.0 * (a2z + a3z) + a4z),
    )


def _bisect_event(state0, h, value, target, k, gx, gy, gz,
                  time_tol=EVENT_TIME_TOL, pos_tol=EVENT_POS_TOL):
    """Localize the first zero of ``value(state) - target`` within a step.

    ``value`` indexes the scalar monitored for a sign change (callable on the
    7-tuple step result). Assumes value(0) > target >= value(h). Returns
    (dt, stepped_state) at the crossing.
    """
    lo, hi = 0.0, h
    state_hi = _rk4_step(*state0, h, k, gx, gy, gz)
    best = (hi, state_hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        state_mid = _rk4_step(*state0, mid, k, gx, gy, gz)
        if value(state_mid) - target > 0.0:
            lo = mid
        else:
            hi = mid
            best = (mid, state_mid)
        if hi - lo <= time_tol and abs(value(best[1]) - target) <= pos_tol:
            break
    return best


def integrate(
    initial: BallState,
    params: PhysicsParams,
    geometry: TableGeometry,
    stop: StopCondition,
    step: float = DEFAULT_STEP,
    horizon: float = DEFAULT_HORIZON,
    keep_samples: bool = True,
) -> FlightSegment:
    """Integrate the hybrid dynamics from ``initial`` until a stop condition.

    Table bounces inside the footprint apply the bounce map and resume; a
    downward surface crossing outside the footprint continues to the floor
    plane and terminates the segment. Raises NonTermination if no stop
    condition is met within ``horizon`` seconds.
    """
    if step <= 0.0:
        raise InvariantViolation("integration step must be positive")
    if not (np.all(np.isfinite(initial.p)) and np.all(np.isfinite(initial.v))):
        raise InvariantViolation("initial state must be finite")

    k = params.k
    gx, gy, gz = float(params.g[0]), float(params.g[1]), float(params.g[2])
    plane_x = float(geometry.hit_plane_x)
    floor_z = float(geometry.floor_z)
    want_plane = isinstance(stop, HitPlane)
    want_landing = isinstance(stop, OpponentLanding)
    t_end = initial.t + stop.duration if isinstance(stop, TimeLimit) else None

    t0 = initial.t
    t = t0
    cur = (float(initial.p[0]), float(initial.p[1]), float(initial.p[2]),
           float(initial.v[0]), float(initial.v[1]), float(initial.v[2]))

    ts = [t]
    samples = [cur]
    bounces: list[BounceEvent] = []

    def finish(termination: Termination) -> FlightSegment:
        arr = np.asarray(samples, dtype=float)
        return FlightSegment(np.asarray(ts), arr[:, :3].copy(), arr[:, 3:].copy(),
                             tuple(bounces), termination)

    def record(time, state):
        if keep_samples or len(ts) < 2:
            ts.append(time)
            samples.append(state)
        else:
            ts[-1] = time
            samples[-1] = state

    while True:
        h = step
        if t_end is not None:
            if t_end - t <= 1e-12:
                return finish(Termination.REACHED_TIME)
            h = min(h, t_end - t)
        if t + h - t0 > horizon + 1e-12:
            h = horizon - (t - t0)
            if h <= 1e-12:
                raise NonTermination(
                    f"no stop condition met within {horizon} s of flight")

        nxt = _rk4_step(*cur, h, k, gx, gy, gz)

        # Candidate events inside (t, t+h], as (dt, stepped_state, kind).
        events = None
        if nxt[2] <= 0.0:
            if cur[2] > 0.0:
                events = [(*_bisect_event(cur, h, lambda s: s[2], 0.0, k, gx, gy, gz),
                           "surface")]
            if cur[2] > floor_z and nxt[2] <= floor_z:
                ev = (*_bisect_event(cur, h, lambda s: s[2], floor_z, k, gx, gy, gz),
                      "floor")
                events = [ev] if events is None else events + [ev]
        if want_plane and cur[0] > plane_x and nxt[0] <= plane_x:
            ev = (*_bisect_event(cur, h, lambda s: s[0], plane_x, k, gx, gy, gz),
                  "plane")
            events = [ev] if events is None else events + [ev]

        handled = False
        for dt, state_ev, kind in sorted(events, key=lambda e: e[0]) if events else ():
            t_ev = t + dt
            if kind == "plane":
                if state_ev[3] < 0.0:
                    record(t_ev, state_ev)
                    return finish(Termination.REACHED_PLANE)
                continue
            if kind == "floor":
                record(t_ev, state_ev)
                return finish(Termination.HIT_FLOOR)
            # surface crossing
            px, py, pz, vx, vy, vz = state_ev
            if not geometry.on_table_footprint((px, py, pz)):
                continue  # off the table: keep falling toward the floor
            if want_landing and px > 0.0:
                record(t_ev, state_ev)
                return finish(Termination.LEFT_TABLE)
            v_minus = np.array([vx, vy, vz])
            v_plus = bounce_map(v_minus, params)
            bounces.append(BounceEvent(t_ev, np.array([px, py, pz]), v_minus, v_plus))
            cur = (px, py, pz, float(v_plus[0]), float(v_plus[1]), float(v_plus[2]))
            t = t_ev
            record(t, cur)
            handled = True
            break

        if not handled:
            t = t + h
            cur = nxt
            record(t, cur)

"""Closed-loop simulation: launcher, robot-proxy executor, shots, grids, rallies.

The executor is a proxy for a real whole-body controller: it can relocate its
base at a configured speed profile, swing within a reach radius, and realizes
commands with Gaussian position/velocity/timing errors. Everything downstream
of a fixed random seed is deterministic, including parallel grid execution,
because every (cell, trial) gets its own child random stream.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .dynamics import (DEFAULT_STEP, FlightSegment, HitPlane, OpponentLanding,
                       PhysicsParams, Termination, TimeLimit, integrate)
from .errors import (DegenerateImpactDirection, InvalidSpec,
                     InvariantViolation, NoApproach, NonTermination,
                     NoPlaneCrossing)
from .estimator import (BOUNCE_BAND_M, DETECT_LOOKAHEAD, MIN_FIT_COUNT,
                        WINDOW_CAPACITY, BallTracker, EstimatorWindow)
from .geometry import BallState, TableGeometry, _frozen, _vec3
from .planner import (DEFAULT_BASE_BACK_OFFSET, DEFAULT_DT_FLIGHT,
                      DEFAULT_REACH_OFFSET, BasePose, StrikeCommand,
                      plan_strike, racket_impact)
from .predictor import predict_strike


class FailureMode(Enum):
    NONE = "none"
    MISS = "miss"
    NET_HIT = "net_hit"
    OFF_TABLE = "off_table"
    TOO_LATE = "too_late"
    OUT_OF_REACH = "out_of_reach"


@dataclass(frozen=True)
class ShotOutcome:
    """Result of one strike attempt, in the striking robot's frame."""

    hit: bool
    returned: bool
    landing_point: np.ndarray | None
    failure_mode: FailureMode

    def __post_init__(self):
        if self.returned and not self.hit:
            raise InvariantViolation("a returned ball must have been hit")
        if (self.landing_point is not None) != self.returned:
            raise InvariantViolation("landing point present iff returned")
        if self.landing_point is not None:
            object.__setattr__(self, "landing_point",
                               _frozen(_vec3(self.landing_point).copy()))

    def to_json_obj(self) -> dict:
        return {
            "hit": self.hit,
            "returned": self.returned,
            "landing_point": None if self.landing_point is None
            else self.landing_point.tolist(),
            "failure_mode": self.failure_mode.value,
        }


@dataclass(frozen=True)
class RallyOutcome:
    """A full exchange: consecutive successful returns until failure or cap."""

    shot_count: int
    shots: tuple[ShotOutcome, ...]
    terminal_failure: FailureMode
    seed: int

    def __post_init__(self):
        if self.shot_count != sum(1 for s in self.shots if s.returned):
            raise InvariantViolation("shot_count must equal successful returns")


@dataclass(frozen=True)
class ExecutorConfig:
    """Robot-proxy strike executor parameters.

    ``reach_speed_curve`` maps base displacement to the time needed to reach
    it (piecewise linear between anchors, linear extrapolation beyond).
    """

    reach_speed_curve: tuple = ((0.0, 0.0), (0.75, 0.8))
    max_reach_radius: float = 0.9
    swing_duration: float = 0.86
    position_error_sigma: float = 0.0
    velocity_error_sigma: float = 0.0
    timing_jitter_sigma: float = 0.0
    racket_radius: float = 0.075
    contact_band: float = 0.02
    contact_window: float = 0.12
    base_start: tuple = (-1.77, 0.0)

    def __post_init__(self):
        for name in ("position_error_sigma", "velocity_error_sigma",
                     "timing_jitter_sigma"):
            if getattr(self, name) < 0.0:
                raise InvariantViolation(f"{name} must be >= 0")
        if not self.swing_duration > 0.0:
            raise InvariantViolation("swing_duration must be positive")
        curve = tuple((float(d), float(t)) for d, t in self.reach_speed_curve)
        if len(curve) < 2:
            raise InvariantViolation("reach curve needs at least two anchors")
        ds = [d for d, _ in curve]
        rts = [t for _, t in curve]
        if sorted(ds) != ds or sorted(rts) != rts:
            raise InvariantViolation("reach curve must be non-decreasing")
        object.__setattr__(self, "reach_speed_curve", curve)
        object.__setattr__(self, "base_start",
                           (float(self.base_start[0]), float(self.base_start[1])))

    def reach_time(self, displacement: float) -> float:
        """Seconds needed to relocate the base by ``displacement`` meters."""
        d = max(float(displacement), 0.0)
        curve = self.reach_speed_curve
        for (d0, t0), (d1, t1) in zip(curve, curve[1:]):
            if d <= d1:
                if d1 == d0:
                    return t1
                return t0 + (d - d0) * (t1 - t0) / (d1 - d0)
        (d0, t0), (d1, t1) = curve[-2], curve[-1]
        slope = (t1 - t0) / (d1 - d0) if d1 > d0 else 0.0
        return t1 + (d - d1) * slope


@dataclass(frozen=True)
class RealizedStrike:
    """Racket state actually achieved by the executor."""

    t: float
    p_racket: np.ndarray
    v_racket: np.ndarray
    n_racket: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_racket", _frozen(_vec3(self.p_racket).copy()))
        object.__setattr__(self, "v_racket", _frozen(_vec3(self.v_racket).copy()))
        object.__setattr__(self, "n_racket", _frozen(_vec3(self.n_racket).copy()))


@dataclass(frozen=True)
class BaseState:
    """Where the robot base is and when it started moving."""

    xy: tuple
    t: float


@dataclass(frozen=True)
class LaunchSpec:
    """Serve generator: either a nominal velocity or a hit-plane target.

    In target mode the nominal launch velocity is solved so the drag-free
    flight bounces once at ``bounce_x`` on the robot half and crosses the hit
    plane at ``target`` = (y, z). Gaussian jitter applies to the target point,
    the launch position, and the final velocity, in that draw order.
    """

    params: PhysicsParams
    geometry: TableGeometry
    position: tuple = (1.2, 0.0, 0.8)
    target: tuple | None = None          # (y, z) on the hit plane
    velocity: tuple | None = None        # direct nominal launch velocity
    bounce_x: float = -0.65
    target_sigma: tuple = (0.0, 0.0)
    position_sigma: float = 0.0
    velocity_sigma: float = 0.0

    def __post_init__(self):
        if (self.target is None) == (self.velocity is None):
            raise InvalidSpec("specify exactly one of target or velocity")
        object.__setattr__(self, "position",
                           tuple(float(c) for c in self.position))
        if self.target is not None:
            object.__setattr__(self, "target",
                               tuple(float(c) for c in self.target))
        if self.velocity is not None:
            object.__setattr__(self, "velocity",
                               tuple(float(c) for c in self.velocity))
        object.__setattr__(self, "target_sigma",
                           tuple(float(c) for c in self.target_sigma))
        if self.position[0] <= 0.0:
            raise InvalidSpec("launch position must be on the opponent side (x > 0)")
        if not (self.geometry.hit_plane_x < self.bounce_x < 0.0):
            raise InvalidSpec("nominal bounce must lie on the robot half")


def _serve_velocity(spec: LaunchSpec, xb: float, t1: float, aim_y: float) -> np.ndarray:
    """Drag-free serve family: launch velocity given bounce point and time.

    The vertical/forward components put the drag-free arc on the bounce point
    (xb, 0-height) at t1; the lateral component aims the drag-free two-phase
    flight at plane crossing y = aim_y.
    """
    par = spec.params
    x0, y0, z0 = (float(c) for c in spec.position)
    gmag = -float(par.g[2])
    v_plus_x = par.c_h * (xb - x0) / t1
    t2 = (spec.geometry.hit_plane_x - xb) / v_plus_x
    ratio = par.c_h * t2 / t1
    yb = (aim_y + ratio * y0) / (1.0 + ratio)
    return np.array([
        (xb - x0) / t1,
        (yb - y0) / t1,
        (0.5 * gmag * t1 * t1 - z0) / t1,
    ])


def _true_crossing(spec: LaunchSpec, v: np.ndarray) -> tuple[float, float] | None:
    """Plane-crossing (y, z) of the real single-bounce flight, or None."""
    try:
        seg = integrate(BallState(0.0, spec.position, v), spec.params,
                        spec.geometry, HitPlane(), step=DEFAULT_STEP,
                        horizon=5.0, keep_samples=False)
    except NonTermination:
        return None
    if seg.termination is not Termination.REACHED_PLANE \
            or len(seg.bounce_events) != 1:
        return None
    return float(seg.final.p[1]), float(seg.final.p[2])


_SOLVE_CACHE: dict[tuple, tuple] = {}

_T1_SCAN = np.linspace(0.12, 1.6, 41)
# fallback nominal bounce points: high plane crossings are only reachable
# when the bounce happens close to the robot end of the table
_BOUNCE_FALLBACKS = (-0.85, -1.05, -1.2)


def solve_launch_velocity(spec: LaunchSpec, target_y: float, target_z: float) -> np.ndarray:
    """Launch velocity whose true (drag-included) flight crosses the plane at
    (target_y, target_z) after one bounce on the robot half.

    The serve family is parameterized by the drag-free time-to-bounce; the
    true crossing height along that family is scanned by integration, the
    slowest single-bounce bracket containing the target is refined by
    root-finding, and a short secant pass trims the lateral component. Drag
    makes the map fold (loftier aims can cross lower), which is why the
    search runs on the real dynamics instead of correcting the closed form.
    If no serve through the preferred bounce point works, the bounce is
    pulled toward the robot end.
    """
    par = spec.params
    key = (round(par.k, 12), round(par.c_h, 12), round(par.c_v, 12),
           float(par.g[2]), spec.geometry.hit_plane_x, spec.position,
           spec.bounce_x, round(float(target_y), 9), round(float(target_z), 9))
    hit = _SOLVE_CACHE.get(key)
    if hit is not None:
        return np.array(hit)

    candidates = (spec.bounce_x,) + tuple(
        xb for xb in _BOUNCE_FALLBACKS if xb != spec.bounce_x)
    bracket = None
    for xb in candidates:
        def cross_z_err(t1: float, xb=xb) -> float | None:
            crossing = _true_crossing(spec, _serve_velocity(spec, xb, t1, target_y))
            return None if crossing is None else crossing[1] - target_z

        scan = [(t1, cross_z_err(t1)) for t1 in _T1_SCAN]
        for (a, fa), (b, fb) in zip(scan, scan[1:]):
            if fa is None or fb is None:
                continue
            if fa == 0.0 or fa * fb < 0.0:
                bracket = (a, b)  # keep the slowest (largest-t1) branch
        if bracket is not None:
            break
    if bracket is None:
        raise InvalidSpec(
            f"no single-bounce launch from {spec.position} crosses the plane "
            f"at (y={target_y:.3f}, z={target_z:.3f})")
    t1 = brentq(cross_z_err, *bracket, xtol=1e-6)

    v = _serve_velocity(spec, xb, t1, target_y)
    aim_y = target_y
    for _ in range(3):  # secant on the lateral aim; the y map is near-linear
        crossing = _true_crossing(spec, v)
        if crossing is None:
            raise InvalidSpec("serve root lost the plane crossing")
        res_y = target_y - crossing[0]
        if abs(res_y) < 1e-6:
            break
        aim_y += res_y
        v = _serve_velocity(spec, xb, t1, aim_y)

    crossing = _true_crossing(spec, v)
    if crossing is None or abs(crossing[0] - target_y) > 5e-3 \
            or abs(crossing[1] - target_z) > 5e-3:
        raise InvalidSpec(
            f"launch solve did not converge for plane point "
            f"(y={target_y:.3f}, z={target_z:.3f})")
    _SOLVE_CACHE[key] = tuple(v)
    return v


def launch_ball(spec: LaunchSpec, rng: np.random.Generator, t0: float = 0.0) -> BallState:
    """Sample one serve from a launch specification.

    The nominal (pre-jitter) trajectory is validated to cross the hit plane
    within the table width; violations raise InvalidSpec.
    """
    if spec.target is not None:
        jitter = rng.normal(size=2)
        ty = spec.target[0] + spec.target_sigma[0] * jitter[0]
        tz = spec.target[1] + spec.target_sigma[1] * jitter[1]
        if abs(ty) > spec.geometry.width_y / 2.0:
            raise InvalidSpec(f"target y={ty:.3f} outside the table width")
        v_nominal = solve_launch_velocity(spec, ty, tz)
    else:
        v_nominal = np.asarray(spec.velocity, dtype=float)
        _validate_velocity_mode(spec, v_nominal)
    p = np.asarray(spec.position, dtype=float) + spec.position_sigma * rng.normal(size=3)
    v = v_nominal + spec.velocity_sigma * rng.normal(size=3)
    return BallState(t0, p, v)


def _validate_velocity_mode(spec: LaunchSpec, v: np.ndarray) -> None:
    """Check the nominal flight crosses the plane within the table width."""
    try:
        seg = integrate(BallState(0.0, spec.position, v), spec.params,
                        spec.geometry, HitPlane(), step=DEFAULT_STEP,
                        horizon=5.0, keep_samples=False)
    except NonTermination as exc:
        raise InvalidSpec("nominal flight never reaches the hit plane") from exc
    if seg.termination is not Termination.REACHED_PLANE:
        raise InvalidSpec(
            f"nominal flight ends with {seg.termination.value}, not a crossing")
    if abs(seg.final.p[1]) > spec.geometry.width_y / 2.0:
        raise InvalidSpec("nominal crossing outside the table width")


def execute_strike(
    command: StrikeCommand,
    executor: ExecutorConfig,
    base_state: BaseState,
    rng: np.random.Generator,
) -> RealizedStrike | FailureMode:
    """Attempt a commanded strike.

    Returns TOO_LATE when the base cannot cover the required displacement in
    the time remaining, OUT_OF_REACH when the strike point is beyond the arm
    radius of the reached base position, otherwise the commanded racket state
    perturbed by the executor's Gaussian errors (timing, position, velocity
    draw order).
    """
    base_xy = np.asarray(base_state.xy, dtype=float)
    displacement = float(np.linalg.norm(command.p_base_target - base_xy))
    budget = command.t_strike - base_state.t
    if executor.reach_time(displacement) > budget:
        return FailureMode.TOO_LATE
    strike_xy = command.p_racket[:2]
    if float(np.linalg.norm(strike_xy - command.p_base_target)) > executor.max_reach_radius:
        return FailureMode.OUT_OF_REACH
    t = command.t_strike + executor.timing_jitter_sigma * float(rng.normal())
    p = command.p_racket + executor.position_error_sigma * rng.normal(size=3)
    v = command.v_racket + executor.velocity_error_sigma * rng.normal(size=3)
    return RealizedStrike(t, p, v, command.n_racket)


def _state_at(segment: FlightSegment, t: float) -> BallState | None:
    """Ball state at time ``t`` interpolated from segment samples."""
    ts = segment.ts
    if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
        return None
    i = int(np.searchsorted(ts, t))
    if i == 0:
        return segment.state(0)
    if i >= ts.size:
        return segment.final
    t0, t1 = ts[i - 1], ts[i]
    s = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
    p = segment.ps[i - 1] + s * (segment.ps[i] - segment.ps[i - 1])
    v = segment.vs[i - 1] + s * (segment.vs[i] - segment.vs[i - 1])
    return BallState(t, p, v)


def _find_contact(
    segment: FlightSegment,
    realized: RealizedStrike,
    racket_radius: float,
    contact_band: float,
    contact_window: float,
) -> BallState | None:
    """Ball state at first racket contact within the swing window, or None.

    The racket sweeps through the strike pose with its commanded velocity, so
    during the window around the realized strike time the racket center is
    ``p_racket + v_racket (t - t_strike)``. Contact is the ball's first
    crossing of that moving plane while within ``racket_radius`` of the
    center; if the ball never crosses, a graze within ``contact_band`` of the
    plane still counts. This gives the strike the timing tolerance a real
    swing has: a ball slightly early or late still meets the racket face.
    """
    half = contact_window / 2.0
    t_lo = max(realized.t - half, float(segment.ts[0]))
    t_hi = min(realized.t + half, float(segment.ts[-1]))
    if t_lo > t_hi:
        return None
    i0 = int(np.searchsorted(segment.ts, t_lo, side="left"))
    i1 = int(np.searchsorted(segment.ts, t_hi, side="right"))
    ts = segment.ts[i0:i1]
    if ts.size == 0:
        return None
    n = realized.n_racket
    centers = realized.p_racket + np.outer(ts - realized.t, realized.v_racket)
    dn = (segment.ps[i0:i1] - centers) @ n

    def state_with_center(t: float) -> tuple[BallState, np.ndarray]:
        ball = _state_at(segment, t)
        return ball, realized.p_racket + realized.v_racket * (t - realized.t)

    for j in range(dn.size - 1):
        if dn[j] == 0.0 or dn[j] * dn[j + 1] < 0.0:
            frac = dn[j] / (dn[j] - dn[j + 1]) if dn[j] != dn[j + 1] else 0.0
            t_star = float(ts[j] + frac * (ts[j + 1] - ts[j]))
            ball, center = state_with_center(t_star)
            offset = ball.p - center
            in_plane = offset - float(offset @ n) * n
            if float(np.linalg.norm(in_plane)) <= racket_radius:
                return ball
            return None
    j = int(np.argmin(np.abs(dn)))
    if abs(float(dn[j])) <= contact_band:
        ball, center = state_with_center(float(ts[j]))
        offset = ball.p - center
        in_plane = offset - float(offset @ n) * n
        if float(np.linalg.norm(in_plane)) <= racket_radius:
            return ball
    return None


def resolve_contact(
    segment: FlightSegment,
    realized: RealizedStrike,
    racket_radius: float,
    contact_band: float = 0.02,
    contact_window: float = 0.12,
) -> bool:
    """Whether the swing contacts the ball (see _find_contact for the model)."""
    return _find_contact(segment, realized, racket_radius, contact_band,
                         contact_window) is not None


@dataclass(frozen=True)
class ShotOptions:
    """Pipeline knobs shared by shot, grid, and rally simulations."""

    noise_sigma: float = 0.001
    lock_time: float = 0.5
    plan_stride: int = 1
    step: float = DEFAULT_STEP
    dt_flight: float = DEFAULT_DT_FLIGHT
    reach_offset: float = DEFAULT_REACH_OFFSET
    base_back_offset: float = DEFAULT_BASE_BACK_OFFSET
    estimator_window: int = WINDOW_CAPACITY
    min_fit_count: int = MIN_FIT_COUNT
    bounce_band: float = BOUNCE_BAND_M
    lookahead: int = DETECT_LOOKAHEAD
    incoming_horizon: float = 4.0
    return_horizon: float = 5.0


def run_shot(
    initial: BallState,
    params: PhysicsParams,
    geometry: TableGeometry,
    executor: ExecutorConfig,
    rng: np.random.Generator,
    options: ShotOptions = ShotOptions(),
) -> ShotOutcome:
    """Simulate one full perceive-plan-strike-score cycle for an incoming ball."""
    outcome, _ = _run_shot_traced(initial, params, geometry, executor, rng, options)
    return outcome


def _run_shot_traced(
    initial: BallState,
    params: PhysicsParams,
    geometry: TableGeometry,
    executor: ExecutorConfig,
    rng: np.random.Generator,
    options: ShotOptions,
) -> tuple[ShotOutcome, BallState | None]:
    """run_shot plus the outgoing ball state on success (for rallies)."""
    incoming = integrate(initial, params, geometry,
                         TimeLimit(options.incoming_horizon), step=options.step)
    positions = incoming.ps
    if options.noise_sigma > 0.0:
        positions = positions + rng.normal(0.0, options.noise_sigma,
                                           size=positions.shape)

    tracker = BallTracker(
        EstimatorWindow(options.estimator_window, options.min_fit_count),
        z_band=options.bounce_band, lookahead=options.lookahead)
    base_pose = BasePose(np.asarray(executor.base_start))
    command = None
    command_confidence = 0
    first_command_t = None
    n_estimates = 0
    for t, p in zip(incoming.ts, positions):
        est = tracker.push(t, p)
        if est is not None:
            # Replace the in-force command only when the new estimate is at
            # least as well-informed as the one that produced it; right after
            # a bounce reset the tiny fresh windows are far too noisy to
            # overrule a full-window plan (and their understated strike times
            # would immediately trigger the lock below).
            if n_estimates % options.plan_stride == 0 \
                    and est.sample_count >= command_confidence:
                try:
                    pred = predict_strike(est, params, geometry, step=options.step)
                    command = plan_strike(
                        pred, geometry, params, options.dt_flight, base_pose,
                        reach_offset=options.reach_offset,
                        base_back_offset=options.base_back_offset)
                    command_confidence = est.sample_count
                    if first_command_t is None:
                        first_command_t = est.t
                except (NoPlaneCrossing, DegenerateImpactDirection):
                    pass
            n_estimates += 1
        if command is not None and t >= command.t_strike - options.lock_time:
            break

    if command is None:
        return ShotOutcome(False, False, None, FailureMode.MISS), None

    realized = execute_strike(
        command, executor, BaseState(executor.base_start, first_command_t), rng)
    if isinstance(realized, FailureMode):
        return ShotOutcome(False, False, None, realized), None

    miss = (ShotOutcome(False, False, None, FailureMode.MISS), None)
    horizon = realized.t + executor.contact_window / 2.0 - initial.t
    if horizon <= 0.0:
        return miss
    to_strike = integrate(initial, params, geometry, TimeLimit(horizon),
                          step=options.step)
    ball = _find_contact(to_strike, realized, executor.racket_radius,
                         executor.contact_band, executor.contact_window)
    if ball is None:
        return miss
    try:
        v_out = racket_impact(ball.v, realized.v_racket, realized.n_racket,
                              params.c_r)
    except NoApproach:
        return miss

    outgoing = BallState(ball.t, ball.p, v_out)
    try:
        ret = integrate(outgoing, params, geometry, OpponentLanding(),
                        step=options.step, horizon=options.return_horizon)
    except NonTermination:
        return ShotOutcome(True, False, None, FailureMode.OFF_TABLE), None

    for i in range(len(ret) - 1):
        if geometry.crosses_net_region(ret.ps[i], ret.ps[i + 1]):
            return ShotOutcome(True, False, None, FailureMode.NET_HIT), None
    if ret.termination is not Termination.LEFT_TABLE or ret.bounce_events:
        # never touched down on the opponent half (or double-bounced en route)
        return ShotOutcome(True, False, None, FailureMode.OFF_TABLE), None
    return ShotOutcome(True, True, ret.final.p, FailureMode.NONE), outgoing


@dataclass(frozen=True)
class GridCell:
    y_lo: float
    y_hi: float
    z_lo: float
    z_hi: float

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.y_lo + self.y_hi), 0.5 * (self.z_lo + self.z_hi))


@dataclass(frozen=True)
class GridCellResult:
    cell: GridCell
    trials: int
    hits: int
    returns: int


@dataclass(frozen=True)
class GridReport:
    """Per-cell and aggregate hit/return rates over the hit plane."""

    cells: tuple[GridCellResult, ...]
    seed: int

    @property
    def trials(self) -> int:
        return sum(c.trials for c in self.cells)

    @property
    def hit_rate(self) -> float:
        n = self.trials
        return sum(c.hits for c in self.cells) / n if n else 0.0

    @property
    def return_rate(self) -> float:
        n = self.trials
        return sum(c.returns for c in self.cells) / n if n else 0.0

    def rows(self):
        return [(c.cell.y_lo, c.cell.y_hi, c.cell.z_lo, c.cell.z_hi,
                 c.trials, c.hits, c.returns) for c in self.cells]


def default_grid_cells(cell: float = 0.2, rows=((0.25, 7), (0.45, 7), (0.65, 6), (0.85, 6))) -> list[GridCell]:
    """Hit-plane coverage approximating the 26-ball evaluation layout.

    Rows of square cells centered on the table midline; (z_center, count)
    pairs with the default giving 26 cells within the table width. Rows
    span the band a no-spin single-bounce feed can actually reach: lower
    crossings need smash-speed serves, higher ones need spin.
    """
    cells = []
    for z_c, count in rows:
        offsets = (np.arange(count) - (count - 1) / 2.0) * cell
        for y_c in offsets:
            cells.append(GridCell(y_c - cell / 2.0, y_c + cell / 2.0,
                                  z_c - cell / 2.0, z_c + cell / 2.0))
    return cells


def _trial_rng(root_seed: int, *key: int) -> np.random.Generator:
    """Independent child stream for one unit of work under a root seed."""
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))


def _run_grid_cell(args) -> tuple[int, GridCellResult]:
    (index, cell, trials, root_seed, params, geometry, executor,
     spec_template, options) = args
    y_c, z_c = cell.center
    spec = replace(spec_template, target=(y_c, z_c))
    hits = returns = 0
    for j in range(trials):
        rng = _trial_rng(root_seed, index, j)
        state = launch_ball(spec, rng)
        outcome = run_shot(state, params, geometry, executor, rng, options)
        hits += outcome.hit
        returns += outcome.returned
    return index, GridCellResult(cell, trials, hits, returns)


def run_grid(
    cells,
    trials: int,
    params: PhysicsParams,
    geometry: TableGeometry,
    executor: ExecutorConfig,
    spec_template: LaunchSpec,
    seed: int,
    options: ShotOptions = ShotOptions(),
    workers: int = 1,
) -> GridReport:
    """Shoot ``trials`` serves at each hit-plane cell and tally outcomes.

    Each (cell, trial) runs on its own child random stream derived from the
    root seed, so results are identical whether cells run serially or in a
    process pool.
    """
    jobs = [(i, cell, trials, seed, params, geometry, executor, spec_template,
             options) for i, cell in enumerate(cells)]
    results: dict[int, GridCellResult] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, res in pool.map(_run_grid_cell, jobs):
                results[index] = res
    else:
        for job in jobs:
            index, res = _run_grid_cell(job)
            results[index] = res
    ordered = tuple(results[i] for i in range(len(jobs)))
    return GridReport(ordered, seed)


def run_rally(
    executor_a: ExecutorConfig,
    executor_b: ExecutorConfig,
    params: PhysicsParams,
    geometry: TableGeometry,
    serve_spec: LaunchSpec,
    seed: int,
    max_shots: int = 120,
    options: ShotOptions = ShotOptions(),
) -> RallyOutcome:
    """Alternate strikes between two mirrored sides until failure or the cap.

    Shot ``i`` is simulated in the striking side's frame (robot defending
    x < 0); the outgoing ball is mirrored across the net plane to become the
    other side's incoming serve.
    """
    ball = launch_ball(serve_spec, _trial_rng(seed, 0))
    shots: list[ShotOutcome] = []
    terminal = FailureMode.NONE
    for i in range(max_shots):
        executor = executor_a if i % 2 == 0 else executor_b
        outcome, outgoing = _run_shot_traced(
            ball, params, geometry, executor, _trial_rng(seed, i + 1), options)
        shots.append(outcome)
        if not outcome.returned:
            terminal = outcome.failure_mode
            break
        ball = outgoing.mirrored()
    return RallyOutcome(
        shot_count=sum(1 for s in shots if s.returned),
        shots=tuple(shots),
        terminal_failure=terminal,
        seed=seed,
    )

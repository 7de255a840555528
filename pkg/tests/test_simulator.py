"""Closed-loop shot pipeline: launcher, executor proxy, contact, grid, rally."""
import numpy as np
import pytest

from rallysim import (
    BallState,
    ExecutorConfig,
    FailureMode,
    GridCell,
    InvalidSpec,
    InvariantViolation,
    LaunchSpec,
    PhysicsParams,
    RallyOutcome,
    ShotOptions,
    ShotOutcome,
    StrikeCommand,
    SwingType,
    TimeLimit,
    default_grid_cells,
    execute_strike,
    integrate,
    launch_ball,
    resolve_contact,
    run_grid,
    run_rally,
    run_shot,
    solve_launch_velocity,
)
from rallysim.simulator import BaseState, RealizedStrike, _trial_rng

from _oracles import projectile_position


def _spec(params, geom, **kw):
    kw.setdefault("position", (1.2, 0.0, 0.8))
    kw.setdefault("target", (0.2, 0.45))
    return LaunchSpec(params=params, geometry=geom, **kw)


# --- launcher ---------------------------------------------------------------


def test_zero_variance_launch_is_identical(geom, ref_params):
    spec = _spec(ref_params, geom)
    a = launch_ball(spec, _trial_rng(1, 0))
    b = launch_ball(spec, _trial_rng(2, 5))
    assert a.t == b.t
    assert np.array_equal(a.p, b.p) and np.array_equal(a.v, b.v)


def test_seeded_launch_reproducible(geom, ref_params):
    spec = _spec(ref_params, geom, target_sigma=(0.03, 0.03),
                 position_sigma=0.02, velocity_sigma=0.05)
    a = launch_ball(spec, _trial_rng(9, 1))
    b = launch_ball(spec, _trial_rng(9, 1))
    assert np.array_equal(a.p, b.p) and np.array_equal(a.v, b.v)
    c = launch_ball(spec, _trial_rng(9, 2))
    assert not np.array_equal(a.v, c.v)


@pytest.mark.parametrize("target", [(0.2, 0.45), (-0.4, 0.3), (0.0, 0.7)])
def test_launch_reaches_requested_plane_point(geom, ref_params, target):
    # solver pins the true (drag-included) single-bounce crossing to the target
    spec = _spec(ref_params, geom, target=target)
    v = solve_launch_velocity(spec, *target)
    from rallysim import HitPlane
    seg = integrate(BallState(0.0, spec.position, v), ref_params, geom, HitPlane())
    assert len(seg.bounce_events) == 1
    assert seg.final.p[1] == pytest.approx(target[0], abs=0.01)
    assert seg.final.p[2] == pytest.approx(target[1], abs=0.01)


def test_dragfree_launch_matches_ballistic_oracle(geom, dragfree_params):
    """With k = 0 the solved serve is exactly the drag-free two-arc flight."""
    spec = _spec(dragfree_params, geom, target=(0.1, 0.5))
    v = solve_launch_velocity(spec, 0.1, 0.5)
    ev = integrate(BallState(0.0, spec.position, v), dragfree_params, geom,
                   TimeLimit(0.05))
    # pre-bounce phase is a pure projectile
    for t, p in zip(ev.ts, ev.ps):
        np.testing.assert_allclose(p, projectile_position(spec.position, v, t),
                                   atol=1e-9)


def test_launch_velocity_mode(geom, ref_params):
    spec = _spec(ref_params, geom, target=None, velocity=(-6.0, 0.1, 0.2),
                 position=(1.3, 0.0, 0.3))
    st = launch_ball(spec, _trial_rng(0, 0))
    np.testing.assert_array_equal(st.v, (-6.0, 0.1, 0.2))
    with pytest.raises(InvalidSpec):
        launch_ball(_spec(ref_params, geom, target=None, velocity=(3.0, 0.0, 1.0)),
                    _trial_rng(0, 0))
    with pytest.raises(InvalidSpec):  # crosses the plane far outside the width
        launch_ball(_spec(ref_params, geom, target=None, velocity=(-5.0, 3.0, 0.2),
                          position=(1.2, 0.0, 0.3)), _trial_rng(0, 0))


def test_launch_spec_validation(geom, ref_params):
    with pytest.raises(InvalidSpec):
        LaunchSpec(params=ref_params, geometry=geom)  # neither mode
    with pytest.raises(InvalidSpec):
        LaunchSpec(params=ref_params, geometry=geom, target=(0.0, 0.4),
                   velocity=(-5.0, 0.0, 0.0))  # both modes
    with pytest.raises(InvalidSpec):
        _spec(ref_params, geom, position=(-0.5, 0.0, 0.8))
    with pytest.raises(InvalidSpec):
        _spec(ref_params, geom, bounce_x=0.5)
    with pytest.raises(InvalidSpec):  # target beyond the table width
        launch_ball(_spec(ref_params, geom, target=(0.9, 0.4)), _trial_rng(0, 0))


# --- executor proxy ---------------------------------------------------------


def _command(y_strike=0.0, t_strike=1.0):
    return StrikeCommand(
        t_strike=t_strike,
        p_racket=(-1.37, y_strike, 0.4),
        v_racket=(2.0, 0.0, 1.0),
        n_racket=np.array([2.0, 0.0, 1.0]) / np.sqrt(5.0),
        swing_type=SwingType.FOREHAND,
        p_base_target=(-1.77, y_strike + 0.25),
    )


def test_perfect_executor_realizes_command_exactly():
    ex = ExecutorConfig()
    cmd = _command()
    out = execute_strike(cmd, ex, BaseState(tuple(cmd.p_base_target), 0.0),
                         _trial_rng(0, 0))
    assert isinstance(out, RealizedStrike)
    assert out.t == cmd.t_strike
    np.testing.assert_array_equal(out.p_racket, cmd.p_racket)
    np.testing.assert_array_equal(out.v_racket, cmd.v_racket)
    np.testing.assert_array_equal(out.n_racket, cmd.n_racket)


def test_reach_time_curve_interpolates_and_extrapolates():
    ex = ExecutorConfig()
    assert ex.reach_time(0.0) == 0.0
    assert ex.reach_time(0.75) == pytest.approx(0.8)
    assert ex.reach_time(0.375) == pytest.approx(0.4)
    assert ex.reach_time(1.5) == pytest.approx(1.6)
    assert ex.reach_time(-1.0) == 0.0


def test_strike_within_budget_succeeds():
    # 0.75 m of base travel takes 0.8 s, inside a 0.86 s budget
    ex = ExecutorConfig()
    cmd = _command(t_strike=0.86)
    start = (cmd.p_base_target[0], cmd.p_base_target[1] - 0.75)
    out = execute_strike(cmd, ex, BaseState(start, 0.0), _trial_rng(0, 0))
    assert isinstance(out, RealizedStrike)


def test_distant_base_is_too_late():
    ex = ExecutorConfig()
    cmd = _command(t_strike=0.86)
    start = (cmd.p_base_target[0], cmd.p_base_target[1] - 2.0)
    assert execute_strike(cmd, ex, BaseState(start, 0.0),
                          _trial_rng(0, 0)) is FailureMode.TOO_LATE


def test_strike_point_beyond_arm_reach():
    ex = ExecutorConfig(max_reach_radius=0.3)
    cmd = _command()
    assert execute_strike(cmd, ex, BaseState(tuple(cmd.p_base_target), 0.0),
                          _trial_rng(0, 0)) is FailureMode.OUT_OF_REACH


def test_executor_config_validation():
    with pytest.raises(InvariantViolation):
        ExecutorConfig(position_error_sigma=-0.1)
    with pytest.raises(InvariantViolation):
        ExecutorConfig(swing_duration=0.0)
    with pytest.raises(InvariantViolation):
        ExecutorConfig(reach_speed_curve=((0.0, 0.0), (0.5, 0.8), (0.75, 0.4)))
    with pytest.raises(InvariantViolation):
        ExecutorConfig(reach_speed_curve=((0.0, 0.0),))


# --- contact ----------------------------------------------------------------


def _incoming_segment(geom, dy=0.0):
    """Drag-free ball drifting in -x past the hit plane; returns (segment,
    crossing time, ball position at crossing)."""
    p0, v0 = (-1.3, dy, 0.4), (-2.0, 0.0, 0.0)
    par = PhysicsParams(k=0.0, c_h=0.75, c_v=0.93, c_r=0.8)
    seg = integrate(BallState(0.0, p0, v0), par, geom, TimeLimit(0.1))
    t_star = (-1.37 - p0[0]) / v0[0]
    return seg, t_star, projectile_position(p0, v0, t_star)


def test_contact_at_racket_center(geom):
    seg, t_star, p_star = _incoming_segment(geom)
    racket = RealizedStrike(t_star, p_star, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    assert resolve_contact(seg, racket, racket_radius=0.075)


@pytest.mark.parametrize("dy,expect", [(0.074, True), (0.076, False)])
def test_contact_radius_boundary(geom, dy, expect):
    seg, t_star, p_star = _incoming_segment(geom)
    racket = RealizedStrike(t_star, p_star + np.array([0.0, dy, 0.0]),
                            (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    assert resolve_contact(seg, racket, racket_radius=0.075) is expect


def test_contact_band_catches_grazes(geom):
    # racket plane 1.5 cm short of the ball's closest approach: no crossing,
    # but within the 2 cm band it still counts; a 5 mm band does not
    par = PhysicsParams(k=0.0, c_h=0.75, c_v=0.93, c_r=0.8)
    seg = integrate(BallState(0.0, (-1.3, 0.0, 0.4), (-2.0, 0.0, 0.0)),
                    par, geom, TimeLimit(0.16))
    z_close = projectile_position((-1.3, 0.0, 0.4), (-2.0, 0.0, 0.0), 0.16)[2]
    racket = RealizedStrike(0.1, (-1.635, 0.0, z_close), (0.0, 0.0, 0.0),
                            (1.0, 0.0, 0.0))
    assert resolve_contact(seg, racket, racket_radius=0.075)
    assert not resolve_contact(seg, racket, racket_radius=0.075,
                               contact_band=0.005)


def test_contact_rate_decreases_with_position_scatter(geom):
    """Hit rate: sigma = 0 gives 1.0, 3 cm sits strictly between, 20 cm worse."""
    seg, t_star, p_star = _incoming_segment(geom)
    rates = []
    for level, sigma in enumerate((0.0, 0.03, 0.2)):
        hits = 0
        trials = 400
        for j in range(trials):
            rng = _trial_rng(31, level, j)
            racket = RealizedStrike(
                t_star, p_star + sigma * rng.normal(size=3),
                (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
            hits += resolve_contact(seg, racket, racket_radius=0.075)
        rates.append(hits / trials)
    assert rates[0] == 1.0
    assert rates[0] > rates[1] > rates[2]


# --- outcome types ----------------------------------------------------------


def test_shot_outcome_invariants():
    with pytest.raises(InvariantViolation):
        ShotOutcome(hit=False, returned=True, landing_point=(0.5, 0, 0),
                    failure_mode=FailureMode.NONE)
    with pytest.raises(InvariantViolation):
        ShotOutcome(hit=True, returned=False, landing_point=(0.5, 0, 0),
                    failure_mode=FailureMode.OFF_TABLE)
    with pytest.raises(InvariantViolation):
        ShotOutcome(hit=True, returned=True, landing_point=None,
                    failure_mode=FailureMode.NONE)


def test_rally_outcome_count_checked():
    ok = ShotOutcome(True, True, (0.5, 0.0, 0.0), FailureMode.NONE)
    miss = ShotOutcome(False, False, None, FailureMode.MISS)
    with pytest.raises(InvariantViolation):
        RallyOutcome(shot_count=2, shots=(ok, miss), terminal_failure=FailureMode.MISS,
                     seed=0)
    RallyOutcome(shot_count=1, shots=(ok, miss), terminal_failure=FailureMode.MISS,
                 seed=0)


# --- full shot pipeline -----------------------------------------------------


def test_perfect_shot_lands_on_target(geom, dragfree_params):
    # noiseless, perfect executor, matched model: the gravity-only return
    # plan is exact, so the ball lands on the aim point
    spec = _spec(dragfree_params, geom)
    rng = _trial_rng(3, 0)
    st = launch_ball(spec, rng)
    out = run_shot(st, dragfree_params, geom, ExecutorConfig(), rng,
                   ShotOptions(noise_sigma=0.0))
    assert out.hit and out.returned
    assert out.failure_mode is FailureMode.NONE
    assert np.linalg.norm(out.landing_point - geom.landing_target) <= 0.01


def test_shot_with_slow_base_times_out(geom, ref_params):
    slow = ExecutorConfig(reach_speed_curve=((0.0, 0.0), (0.1, 5.0)))
    spec = _spec(ref_params, geom, target=(0.6, 0.45))
    rng = _trial_rng(4, 0)
    st = launch_ball(spec, rng)
    out = run_shot(st, ref_params, geom, slow, rng, ShotOptions())
    assert out.failure_mode is FailureMode.TOO_LATE
    assert not out.hit


def test_shot_beyond_arm_radius(geom, ref_params):
    stubby = ExecutorConfig(max_reach_radius=0.1)
    spec = _spec(ref_params, geom)
    rng = _trial_rng(5, 0)
    st = launch_ball(spec, rng)
    out = run_shot(st, ref_params, geom, stubby, rng, ShotOptions())
    assert out.failure_mode is FailureMode.OUT_OF_REACH


def test_sloppy_swing_sends_ball_off_table(geom, ref_params):
    # frozen seed: the velocity scatter sends the return long/wide
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(velocity_error_sigma=0.6)
    rng = _trial_rng(3, 0)
    st = launch_ball(spec, rng)
    out = run_shot(st, ref_params, geom, ex, rng, ShotOptions(plan_stride=4))
    assert out.hit and not out.returned
    assert out.failure_mode is FailureMode.OFF_TABLE
    assert out.landing_point is None


def test_sloppy_swing_can_net_the_ball(geom, ref_params):
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(velocity_error_sigma=0.6)
    rng = _trial_rng(16, 0)
    st = launch_ball(spec, rng)
    out = run_shot(st, ref_params, geom, ex, rng, ShotOptions(plan_stride=4))
    assert out.failure_mode is FailureMode.NET_HIT


def test_returned_shots_land_legally(geom, ref_params):
    """Every returned ball touches down on the opponent half footprint."""
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(position_error_sigma=0.02, velocity_error_sigma=0.08,
                        timing_jitter_sigma=0.004)
    seen = 0
    for seed in range(15):
        rng = _trial_rng(seed, 0)
        st = launch_ball(spec, rng)
        out = run_shot(st, ref_params, geom, ex, rng, ShotOptions(plan_stride=4))
        if not out.returned:
            continue
        seen += 1
        lp = out.landing_point
        assert lp[0] > 0.0
        assert abs(lp[1]) <= geom.width_y / 2.0
        assert abs(lp[2]) <= 1e-6
        assert geom.on_table_footprint(lp)
    assert seen >= 10


def test_shot_deterministic_per_seed(geom, ref_params):
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(position_error_sigma=0.02, velocity_error_sigma=0.08)
    outs = []
    for _ in range(2):
        rng = _trial_rng(11, 4)
        st = launch_ball(spec, rng)
        outs.append(run_shot(st, ref_params, geom, ex, rng, ShotOptions()))
    a, b = outs
    assert a.to_json_obj() == b.to_json_obj()


# --- grid -------------------------------------------------------------------


def test_default_grid_has_26_cells():
    cells = default_grid_cells()
    assert len(cells) == 26
    for c in cells:
        assert c.y_hi - c.y_lo == pytest.approx(0.2)
        assert c.z_hi - c.z_lo == pytest.approx(0.2)
        assert abs(c.center[0]) <= 0.7625


def test_single_cell_grid_reproducible(geom, ref_params):
    cell = GridCell(0.1, 0.3, 0.35, 0.55)
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig()
    a = run_grid([cell], 1, ref_params, geom, ex, spec, seed=42,
                 options=ShotOptions(plan_stride=4))
    b = run_grid([cell], 1, ref_params, geom, ex, spec, seed=42,
                 options=ShotOptions(plan_stride=4))
    assert a.rows() == b.rows()
    assert a.trials == 1


def test_perfect_grid_returns_everything(geom, dragfree_params):
    cells = [GridCell(-0.3, -0.1, 0.35, 0.55), GridCell(0.1, 0.3, 0.35, 0.55),
             GridCell(-0.1, 0.1, 0.55, 0.75)]
    spec = _spec(dragfree_params, geom)
    report = run_grid(cells, 2, dragfree_params, geom, ExecutorConfig(), spec,
                      seed=7, options=ShotOptions(noise_sigma=0.0, plan_stride=4))
    assert report.hit_rate == 1.0
    assert report.return_rate == 1.0


def test_grid_parallel_matches_serial(geom, ref_params):
    cells = [GridCell(-0.3, -0.1, 0.35, 0.55), GridCell(0.1, 0.3, 0.35, 0.55)]
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(position_error_sigma=0.02)
    kw = dict(trials=2, params=ref_params, geometry=geom, executor=ex,
              spec_template=spec, seed=13, options=ShotOptions(plan_stride=4))
    serial = run_grid(cells, workers=1, **kw)
    parallel = run_grid(cells, workers=2, **kw)
    assert serial.rows() == parallel.rows()


# --- rally ------------------------------------------------------------------


def test_perfect_rally_reaches_cap(geom, dragfree_params):
    spec = _spec(dragfree_params, geom)
    out = run_rally(ExecutorConfig(), ExecutorConfig(), dragfree_params, geom,
                    spec, seed=1, max_shots=12,
                    options=ShotOptions(noise_sigma=0.0, plan_stride=4))
    assert out.shot_count == 12
    assert out.terminal_failure is FailureMode.NONE
    assert all(s.returned for s in out.shots)


def test_rally_bit_identical_per_seed(geom, ref_params):
    spec = _spec(ref_params, geom)
    ex = ExecutorConfig(position_error_sigma=0.02, velocity_error_sigma=0.08)
    a = run_rally(ex, ex, ref_params, geom, spec, seed=5, max_shots=6)
    b = run_rally(ex, ex, ref_params, geom, spec, seed=5, max_shots=6)
    assert a.shot_count == b.shot_count
    assert a.terminal_failure == b.terminal_failure
    assert [s.to_json_obj() for s in a.shots] == [s.to_json_obj() for s in b.shots]


def test_rally_with_hopeless_side_ends_fast(geom, ref_params):
    """A 0.5 m position scatter kills the exchange within three returns."""
    spec = _spec(ref_params, geom)
    good = ExecutorConfig()
    sloppy = ExecutorConfig(position_error_sigma=0.5)
    opts = ShotOptions(plan_stride=3)
    for seed in range(100):
        out = run_rally(good, sloppy, ref_params, geom, spec, seed,
                        max_shots=10, options=opts)
        assert out.shot_count <= 3


def test_return_rate_degrades_with_executor_scatter(geom, ref_params):
    """Return rate is non-increasing across three position-sigma levels."""
    spec = _spec(ref_params, geom)
    opts = ShotOptions(plan_stride=8)
    rates = []
    for level, sigma in enumerate((0.0, 0.06, 0.25)):
        ex = ExecutorConfig(position_error_sigma=sigma)
        returned = 0
        trials = 500
        for j in range(trials):
            rng = _trial_rng(21, level, j)
            st = launch_ball(spec, rng)
            returned += run_shot(st, ref_params, geom, ex, rng, opts).returned
        rates.append(returned / trials)
    assert rates[0] >= rates[1] - 0.01
    assert rates[1] >= rates[2] - 0.01

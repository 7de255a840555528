"""Strike planning algebra: outgoing velocity, racket velocity/normal, stroke pick."""
import numpy as np
import pytest

from rallysim import (
    BasePose,
    DegenerateImpactDirection,
    InvariantViolation,
    NoApproach,
    StrikeCommand,
    SwingType,
    outgoing_velocity,
    plan_strike,
    racket_impact,
    racket_velocity,
)
from rallysim.predictor import StrikePrediction

from _oracles import gravity_landing


def test_free_fall_needs_no_velocity():
    # 0.1962 m is exactly the drop covered by gravity in 0.2 s
    v_o = outgoing_velocity((-1.37, 0.0, 0.1962), (-1.37, 0.0, 0.0), 0.2)
    np.testing.assert_allclose(v_o, 0.0, atol=1e-12)


def test_outgoing_velocity_to_table_center():
    v_o = outgoing_velocity((-1.37, 0.0, 0.3), (0.685, 0.0, 0.0), 0.6)
    np.testing.assert_allclose(v_o, (3.425, 0.0, 2.443), atol=1e-12)
    # oracle: gravity-only propagation arrives at the landing point
    np.testing.assert_allclose(
        gravity_landing((-1.37, 0.0, 0.3), v_o, 0.6), (0.685, 0.0, 0.0), atol=1e-9)


def test_horizontal_components_are_displacement_over_time(rng):
    for _ in range(20):
        p_r = rng.uniform(-1.5, 1.5, 3)
        p_l = rng.uniform(-1.5, 1.5, 3)
        dt = rng.uniform(0.1, 1.5)
        v_o = outgoing_velocity(p_r, p_l, dt)
        np.testing.assert_allclose(v_o[:2], (p_l[:2] - p_r[:2]) / dt, atol=1e-12)


def test_landing_identity_property(rng):
    # gravity-only propagation of the planned velocity lands on target
    for _ in range(1000):
        p_r = rng.uniform((-1.5, -0.8, 0.1), (0.0, 0.8, 0.8))
        p_l = np.array([rng.uniform(0.1, 1.3), rng.uniform(-0.7, 0.7), 0.0])
        dt = rng.uniform(0.2, 1.2)
        v_o = outgoing_velocity(p_r, p_l, dt)
        assert np.linalg.norm(gravity_landing(p_r, v_o, dt) - p_l) <= 1e-9


def test_outgoing_velocity_requires_positive_flight_time():
    with pytest.raises(InvariantViolation):
        outgoing_velocity((0, 0, 0.3), (0.685, 0, 0), 0.0)


def test_elastic_head_on_static_racket():
    v_r, u = racket_velocity((-2.0, 0.0, 0.0), (2.0, 0.0, 0.0), 1.0)
    np.testing.assert_allclose(v_r, 0.0, atol=1e-12)
    np.testing.assert_allclose(u, (1.0, 0.0, 0.0), atol=1e-12)


def test_racket_velocity_from_rest():
    v_r, u = racket_velocity((0.0, 0.0, 0.0), (2.0, 0.0, 0.0), 0.8)
    np.testing.assert_allclose(u, (1.0, 0.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(v_r, (2.0 / 1.8, 0.0, 0.0), atol=1e-12)


def test_general_case_round_trips_through_impact():
    v_i = np.array([-4.0, 1.0, -1.0])
    v_o = np.array([3.425, 0.0, 2.443])
    v_r, u = racket_velocity(v_i, v_o, 0.8)
    np.testing.assert_allclose(racket_impact(v_i, v_r, u, 0.8), v_o, atol=1e-9)


def test_round_trip_identity_property(rng):
    for _ in range(1000):
        v_i = rng.uniform(-6.0, 6.0, 3)
        v_o = rng.uniform(-6.0, 6.0, 3)
        if np.linalg.norm(v_o - v_i) <= 1e-6:
            continue
        c_r = rng.uniform(0.3, 1.0)
        v_r, u = racket_velocity(v_i, v_o, c_r)
        assert np.linalg.norm(racket_impact(v_i, v_r, u, c_r) - v_o) <= 1e-9
        # normal is parallel to v_o - v_i, never anti-parallel
        assert u @ (v_o - v_i) == pytest.approx(np.linalg.norm(v_o - v_i), rel=1e-12)
        assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)


def test_degenerate_impact_direction():
    with pytest.raises(DegenerateImpactDirection):
        racket_velocity((1.0, 2.0, 3.0), (1.0, 2.0, 3.0), 0.8)


def test_elastic_wall_preserves_tangential():
    v_o = racket_impact((-3.0, 1.0, 0.0), (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 1.0)
    np.testing.assert_allclose(v_o, (3.0, 1.0, 0.0), atol=1e-12)


def test_one_dimensional_restitution():
    v_o = racket_impact((-2.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.5)
    np.testing.assert_allclose(v_o, (2.5, 0.0, 0.0), atol=1e-12)


def test_separating_ball_rejected():
    with pytest.raises(NoApproach):
        racket_impact((2.0, 0.0, 0.0), (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.8)


def test_impact_changes_only_normal_component(rng):
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        v_r = rng.uniform(-3.0, 3.0, 3)
        # approach built as a negative normal closing rate plus any tangential part
        v_i = v_r - rng.uniform(0.5, 5.0) * n + np.cross(n, rng.normal(size=3))
        c_r = rng.uniform(0.3, 1.0)
        v_o = racket_impact(v_i, v_r, n, c_r)
        np.testing.assert_allclose(v_o - (v_o @ n) * n,
                                   v_i - (v_i @ n) * n, atol=1e-9)


def _prediction(y, z=0.3):
    return StrikePrediction(1.2, (-1.37, y, z), (-4.0, 0.5, -1.0), 1)


def test_forehand_for_right_side_strikes(geom, ref_params):
    cmd = plan_strike(_prediction(-0.5), geom, ref_params)
    assert cmd.swing_type is SwingType.FOREHAND


def test_backhand_for_left_side_strikes(geom, ref_params):
    cmd = plan_strike(_prediction(0.5), geom, ref_params)
    assert cmd.swing_type is SwingType.BACKHAND


def test_centerline_tie_goes_forehand(geom, ref_params):
    cmd = plan_strike(_prediction(0.0), geom, ref_params)
    assert cmd.swing_type is SwingType.FOREHAND


def test_swing_flips_exactly_at_base_centerline(geom, ref_params):
    base = BasePose(np.array([-1.77, 0.2]))
    at = plan_strike(_prediction(0.2), geom, ref_params, base_pose=base)
    left = plan_strike(_prediction(0.2 + 1e-9), geom, ref_params, base_pose=base)
    assert at.swing_type is SwingType.FOREHAND
    assert left.swing_type is SwingType.BACKHAND


def test_command_geometry(geom, ref_params):
    pred = _prediction(-0.3)
    cmd = plan_strike(pred, geom, ref_params)
    assert np.linalg.norm(cmd.n_racket) == pytest.approx(1.0, abs=1e-9)
    # face perpendicular to its velocity: normal parallel to v_racket
    cross = np.cross(cmd.n_racket, cmd.v_racket)
    np.testing.assert_allclose(cross, 0.0, atol=1e-9)
    assert cmd.v_racket @ cmd.n_racket > 0.0
    np.testing.assert_allclose(cmd.p_racket, pred.p_strike, atol=1e-12)
    assert cmd.p_racket[0] == pytest.approx(geom.hit_plane_x, abs=1e-9)
    # base stands back from the plane, shifted toward the forehand side
    assert cmd.p_base_target[0] == pytest.approx(geom.hit_plane_x - 0.4, abs=1e-12)
    assert cmd.p_base_target[1] == pytest.approx(-0.3 + 0.25, abs=1e-12)
    assert cmd.t_strike == pred.t_strike


def test_backhand_base_offset_mirrors(geom, ref_params):
    cmd = plan_strike(_prediction(0.4), geom, ref_params)
    assert cmd.p_base_target[1] == pytest.approx(0.4 - 0.25, abs=1e-12)


def test_command_requires_unit_normal():
    with pytest.raises(InvariantViolation):
        StrikeCommand(1.0, (-1.37, 0, 0.3), (1.0, 0, 0), (2.0, 0, 0),
                      SwingType.FOREHAND, (-1.77, 0.0))


def test_base_pose_shape_checked():
    with pytest.raises(InvariantViolation):
        BasePose(np.array([1.0, 2.0, 3.0]))

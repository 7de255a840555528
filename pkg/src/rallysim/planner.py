"""Strike planning: desired outgoing ball velocity, racket velocity and normal.

The return flight is planned under gravity alone: pick the outgoing velocity
that lands the ball on the target after a fixed flight time, then invert the
frictionless racket impact model to get the racket velocity along the impact
normal. The racket face is oriented perpendicular to its velocity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import PhysicsParams
from .errors import (DegenerateImpactDirection, InvariantViolation, NoApproach)
from .geometry import TableGeometry, _frozen, _vec3
from .predictor import StrikePrediction

IMPACT_DIRECTION_EPS = 1e-6
DEFAULT_DT_FLIGHT = 0.5
DEFAULT_REACH_OFFSET = 0.25
DEFAULT_BASE_BACK_OFFSET = 0.4


class SwingType(Enum):
    FOREHAND = "forehand"
    BACKHAND = "backhand"


@dataclass(frozen=True)
class BasePose:
    """Robot base location (xy) and facing direction (always +x here)."""

    xy: np.ndarray
    facing: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=float)
        if xy.shape != (2,):
            raise InvariantViolation("base xy must be a 2-vector")
        xy = xy.copy()
        xy.flags.writeable = False
        object.__setattr__(self, "xy", xy)
        facing = np.array([1.0, 0.0]) if self.facing is None else np.asarray(self.facing, dtype=float)
        facing = facing.copy()
        facing.flags.writeable = False
        object.__setattr__(self, "facing", facing)


@dataclass(frozen=True)
class StrikeCommand:
    """Everything the executor needs: when/where/how to swing, and base goal."""

    t_strike: float
    p_racket: np.ndarray
    v_racket: np.ndarray
    n_racket: np.ndarray
    swing_type: SwingType
    p_base_target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_racket", _frozen(_vec3(self.p_racket).copy()))
        object.__setattr__(self, "v_racket", _frozen(_vec3(self.v_racket).copy()))
        object.__setattr__(self, "n_racket", _frozen(_vec3(self.n_racket).copy()))
        base = np.asarray(self.p_base_target, dtype=float)
        if base.shape != (2,):
            raise InvariantViolation("base target must be a 2-vector")
        base = base.copy()
        base.flags.writeable = False
        object.__setattr__(self, "p_base_target", base)
        if abs(np.linalg.norm(self.n_racket) - 1.0) > 1e-9:
            raise InvariantViolation("racket normal must be unit length")

    def to_json_obj(self) -> dict:
        return {
            "t_strike": self.t_strike,
            "p_racket": self.p_racket.tolist(),
            "v_racket": self.v_racket.tolist(),
            "n_racket": self.n_racket.tolist(),
            "swing_type": self.swing_type.value,
            "p_base_target": self.p_base_target.tolist(),
        }


def outgoing_velocity(p_racket, p_land, dt_flight: float, g=(0.0, 0.0, -9.81)) -> np.ndarray:
    """Outgoing ball velocity landing at ``p_land`` after ``dt_flight`` seconds.

    Gravity-only flight: p_land = p_racket + v*dt + g*dt^2/2, solved for v.
    """
    if not dt_flight > 0.0:
        raise InvariantViolation("flight time must be positive")
    p_racket = _vec3(p_racket)
    p_land = _vec3(p_land)
    g = _vec3(g)
    return (p_land - p_racket) / dt_flight - 0.5 * g * dt_flight


def racket_velocity(v_i, v_o, c_r: float) -> tuple[np.ndarray, np.ndarray]:
    """Racket velocity realizing outgoing velocity ``v_o`` from incoming ``v_i``.

    The impact normal u points along v_o - v_i; only the normal component of
    the racket velocity matters under the frictionless model::

        v_racket = ((v_o . u + C_r * v_i . u) / (1 + C_r)) * u

    Returns (v_racket, u). Raises DegenerateImpactDirection when v_o and v_i
    coincide (no impulse required, normal undefined).
    """
    v_i = _vec3(v_i)
    v_o = _vec3(v_o)
    d = v_o - v_i
    norm = float(np.linalg.norm(d))
    if norm <= IMPACT_DIRECTION_EPS:
        raise DegenerateImpactDirection(
            f"outgoing equals incoming velocity within {IMPACT_DIRECTION_EPS}")
    u = d / norm
    s = (float(v_o @ u) + c_r * float(v_i @ u)) / (1.0 + c_r)
    return s * u, u


def racket_impact(v_i, v_racket, n, c_r: float) -> np.ndarray:
    """Forward impact model: ball velocity after hitting the racket face.

    Restitution c_r acts along the face normal ``n``; tangential ball velocity
    is unchanged (frictionless face). The ball must approach the face.
    """
    v_i = _vec3(v_i)
    v_racket = _vec3(v_racket)
    n = _vec3(n)
    n = n / float(np.linalg.norm(n))
    approach = float((v_i - v_racket) @ n)
    if approach >= 0.0:
        raise NoApproach(f"ball separating from racket face (rate {approach:.3g})")
    vn_out = float(v_racket @ n) * (1.0 + c_r) - c_r * float(v_i @ n)
    return v_i + (vn_out - float(v_i @ n)) * n


def plan_strike(
    prediction: StrikePrediction,
    geometry: TableGeometry,
    params: PhysicsParams,
    dt_flight: float = DEFAULT_DT_FLIGHT,
    base_pose: BasePose | None = None,
    reach_offset: float = DEFAULT_REACH_OFFSET,
    base_back_offset: float = DEFAULT_BASE_BACK_OFFSET,
) -> StrikeCommand:
    """Full strike command for a predicted plane crossing.

    Forehand when the strike point is at or right of the robot centerline
    (y_strike <= y_base, ties to forehand); the base target shifts laterally
    so the chosen stroke faces the ball, and stands back from the hit plane.
    """
    if base_pose is None:
        base_pose = BasePose(np.array([geometry.hit_plane_x - base_back_offset, 0.0]))
    v_o = outgoing_velocity(prediction.p_strike, geometry.landing_target,
                            dt_flight, params.g)
    v_racket, u = racket_velocity(prediction.v_incoming, v_o, params.c_r)
    y_strike = float(prediction.p_strike[1])
    swing = SwingType.FOREHAND if y_strike <= float(base_pose.xy[1]) else SwingType.BACKHAND
    lateral = reach_offset if swing is SwingType.FOREHAND else -reach_offset
    base_target = np.array([geometry.hit_plane_x - base_back_offset,
                            y_strike + lateral])
    return StrikeCommand(
        t_strike=prediction.t_strike,
        p_racket=prediction.p_strike,
        v_racket=v_racket,
        n_racket=u,
        swing_type=swing,
        p_base_target=base_target,
    )

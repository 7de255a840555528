"""Table frame, court dimensions, and point/segment classification helpers.

The world frame has its origin at the table center on the playing surface,
z pointing up, and the robot defending the x < 0 half. All lengths are in
meters, times in seconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation

# ITTF court dimensions; the playing surface sits 0.76 m above the floor.
TABLE_LENGTH_X = 2.74
TABLE_WIDTH_Y = 1.525
TABLE_SURFACE_HEIGHT = 0.76
NET_HEIGHT = 0.1525


def _vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise InvariantViolation(f"expected a 3-vector, got shape {v.shape}")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TableGeometry:
    """Court constants plus the robot-side strike plane and landing target.

    ``hit_plane_x`` defaults to the robot-side table edge (-length_x / 2);
    ``landing_target`` to the center of the opponent half, on the surface.
    """

    length_x: float = TABLE_LENGTH_X
    width_y: float = TABLE_WIDTH_Y
    surface_height: float = TABLE_SURFACE_HEIGHT
    net_height: float = NET_HEIGHT
    hit_plane_x: float | None = None
    landing_target: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.length_x <= 0 or self.width_y <= 0:
            raise InvariantViolation("table dimensions must be positive")
        if self.surface_height <= 0 or self.net_height <= 0:
            raise InvariantViolation("heights must be positive")
        if self.hit_plane_x is None:
            object.__setattr__(self, "hit_plane_x", -self.length_x / 2.0)
        if self.hit_plane_x > 0:
            raise InvariantViolation("hit plane must be on the robot half (x <= 0)")
        if self.landing_target is None:
            target = np.array([self.length_x / 4.0, 0.0, 0.0])
        else:
            target = _vec3(self.landing_target)
        if (not (0.0 < target[0] <= self.length_x / 2.0)
                or abs(target[1]) > self.width_y / 2.0 or target[2] != 0.0):
            raise InvariantViolation(
                "landing target must lie on the opponent half surface")
        object.__setattr__(self, "landing_target", _frozen(target))

    @property
    def floor_z(self) -> float:
        """Floor plane in table coordinates."""
        return -self.surface_height

    def on_table_footprint(self, p) -> bool:
        """True iff the xy projection of ``p`` lies on the table (edges inclusive)."""
        p = np.asarray(p, dtype=float)
        return bool(
            abs(p[0]) <= self.length_x / 2.0 and abs(p[1]) <= self.width_y / 2.0
        )

    def crosses_net_region(self, p_before, p_after) -> bool:
        """True iff the segment crosses x = 0 below the net tape and within its span.

        The crossing point is linearly interpolated; segments that do not
        straddle the net plane never cross. Symmetric in its arguments.
        """
        a = np.asarray(p_before, dtype=float)
        b = np.asarray(p_after, dtype=float)
        xa, xb = a[0], b[0]
        if xa == xb:
            return False
        if (xa < 0.0) == (xb < 0.0) and xa != 0.0 and xb != 0.0:
            return False
        s = xa / (xa - xb)
        if not (0.0 <= s <= 1.0):
            return False
        y = a[1] + s * (b[1] - a[1])
        z = a[2] + s * (b[2] - a[2])
        return bool(z < self.net_height and abs(y) <= self.width_y / 2.0)


@dataclass(frozen=True)
class BallState:
    """Ball kinematic state (time, position, velocity) in the table frame."""

    t: float
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        p = _vec3(self.p).copy()
        v = _vec3(self.v).copy()
        if not (np.isfinite(self.t) and np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise InvariantViolation("ball state must be finite")
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "v", _frozen(v))

    def mirrored(self) -> "BallState":
        """The same state seen from the opposite side of the table."""
        return BallState(self.t, self.p * np.array([-1.0, 1.0, 1.0]),
                         self.v * np.array([-1.0, 1.0, 1.0]))

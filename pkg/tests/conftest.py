import numpy as np
import pytest

from rallysim.dynamics import HitPlane, PhysicsParams, Termination, integrate
from rallysim.geometry import BallState, TableGeometry
from rallysim.records import TrajectoryRecord


@pytest.fixture
def geom():
    return TableGeometry()


@pytest.fixture
def ref_params():
    """Reference physics constants used by the synthetic-data pipelines."""
    return PhysicsParams(k=0.115, c_h=0.75, c_v=0.93, c_r=0.8)


@pytest.fixture
def dragfree_params():
    return PhysicsParams(k=0.0, c_h=0.75, c_v=0.93, c_r=0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def serve_records(params, geometry, count, noise=0.0, noise_rng=None, spray_seed=7):
    """Fast flat serves that bounce exactly once and reach the hit plane.

    Sprays initial conditions from a fixed generator and keeps streams whose
    pre-bounce arc is long enough for the offline drag window and whose
    post-bounce arc supports a restitution-side fit. Optionally corrupts the
    positions with isotropic Gaussian noise.
    """
    qr = np.random.default_rng(spray_seed)
    recs, tried = [], 0
    while len(recs) < count and tried < count * 8:
        tried += 1
        z0 = 0.25 + 0.2 * qr.random()
        y0 = qr.uniform(-0.3, 0.3)
        v0 = (-(5.8 + 1.6 * qr.random()), qr.uniform(-0.4, 0.4), qr.uniform(-0.2, 0.4))
        seg = integrate(BallState(0.0, (1.3, y0, z0), v0), params, geometry, HitPlane())
        if len(seg.bounce_events) != 1 or seg.termination is not Termination.REACHED_PLANE:
            continue
        i_b = int(np.searchsorted(seg.ts, seg.bounce_events[0].t))
        if i_b < 65 or len(seg.ts) - i_b < 40:
            continue
        ps = seg.ps.copy()
        if noise > 0.0:
            ps = ps + noise_rng.normal(0.0, noise, ps.shape)
        meta = {"truth": {"t_strike": seg.final.t,
                          "p_strike": seg.final.p.tolist(),
                          "v_strike": seg.final.v.tolist()}}
        recs.append(TrajectoryRecord(f"serve-{len(recs):02d}", seg.ts.copy(), ps, meta))
    if len(recs) < count:
        raise AssertionError(f"only {len(recs)}/{count} usable serves after {tried} tries")
    return recs

"""Exact microscopic dynamics: hits, reflection, impact parameters."""

import math

import numpy as np
import pytest

from lorentzgas import billiard
from lorentzgas.billiard import Direction, ParticleState


def test_exit_time_axis_example():
    state = ParticleState((0.5, 0.05), Direction.from_angle(0.0))
    hit = billiard.exit_time(state, 0.1)
    assert hit.center == (1, 0)
    # first intersection of the ray with the circle of radius 0.1 at (1,0)
    dx = 0.5
    expected = dx - math.sqrt(0.1 ** 2 - 0.05 ** 2)
    assert hit.tau == pytest.approx(expected, abs=1e-12)


def test_exit_time_brute_force_agreement():
    """Compare against a brute scan of all lattice disks in a box."""
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = (float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8)))
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        r = float(rng.uniform(0.02, 0.2))
        d = Direction.from_angle(th)
        state = ParticleState(x, d)
        best = math.inf
        best_c = None
        for m in range(-60, 61):
            for n in range(-60, 61):
                cx, cy = m - x[0], n - x[1]
                proj = cx * d.cos + cy * d.sin
                cross = cx * d.sin - cy * d.cos
                if proj <= 0 or abs(cross) >= r:
                    continue
                t = proj - math.sqrt(r * r - cross * cross)
                if 0 < t < best:
                    best, best_c = t, (m, n)
        if best > 40.0:
            continue
        hit = billiard.exit_time(state, r)
        assert hit.center == best_c
        assert hit.tau == pytest.approx(best, rel=1e-12)


def test_channel_detection():
    # axis-aligned ray through an empty channel never collides
    state = ParticleState((0.5, 0.5), Direction.from_angle(0.0))
    with pytest.raises(billiard.NoCollisionError) as exc:
        billiard.exit_time(state, 0.1)
    assert exc.value.reason == "channel"


def test_reflection_is_involution_and_specular():
    rng = np.random.default_rng(1)
    for _ in range(100):
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        d = Direction.from_angle(th)
        n = (math.cos(phi), math.sin(phi))
        refl = billiard.reflect(d, n)
        again = billiard.reflect(refl, n)
        assert again.cos == pytest.approx(d.cos, abs=1e-14)
        assert again.sin == pytest.approx(d.sin, abs=1e-14)
        # tangential component preserved, normal component flipped
        assert (refl.cos * n[0] + refl.sin * n[1]) == pytest.approx(
            -(d.cos * n[0] + d.sin * n[1]), abs=1e-14)


def test_boundary_point_impact_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        h = float(rng.uniform(-0.99, 0.99))
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        r = float(rng.uniform(0.01, 0.3))
        omega = Direction.from_angle(th)
        state = billiard.boundary_point(h, omega, r)
        assert billiard.impact_parameter(
            state.position, omega, r) == pytest.approx(h, abs=1e-12)


def test_impact_parameter_requires_boundary():
    with pytest.raises(billiard.NotOnBoundaryError):
        billiard.impact_parameter((0.5, 0.5), Direction.from_angle(0.2), 0.1)


def test_collision_sequence_time_reversal():
    r = 0.15
    state = ParticleState((0.31, 0.47), Direction.from_angle(0.83))
    events = billiard.collision_sequence(state, r, 8)
    assert len(events) == 8
    # retrace the incoming segment: reverse the direction of the last
    # flight, i.e. the outgoing direction of the previous collision
    back = ParticleState(events[-1].point,
                         Direction.from_components(-events[-2].outgoing.cos,
                                                   -events[-2].outgoing.sin))
    rev = billiard.collision_sequence(back, r, 4)
    # chaotic amplification of rounding limits both the depth and the
    # tolerance of the comparison
    for ev, orig in zip(rev, reversed(events[:-1])):
        assert ev.point[0] == pytest.approx(orig.point[0], abs=1e-6)
        assert ev.point[1] == pytest.approx(orig.point[1], abs=1e-6)


def test_collision_impacts_in_range():
    events = billiard.collision_sequence(
        ParticleState((0.2, 0.9), Direction.from_angle(2.1)), 0.1, 50)
    for ev in events:
        assert -1.0 <= ev.impact <= 1.0
        # outgoing impact parameter equals the recorded one
        assert billiard.impact_parameter(
            ev.point, ev.outgoing, 0.1) == pytest.approx(ev.impact, abs=1e-12)


def test_flow_stays_outside_obstacles():
    r = 0.2
    st = billiard.flow(
        ParticleState((0.45, 0.8), Direction.from_angle(1.0)), r, 37.0)
    x, y = st.position
    m, n = round(x), round(y)
    assert math.hypot(x - m, y - n) >= r - 1e-9


def test_transfer_map_matches_limit_kernel_map():
    """Finite-r transfer map converges to the closed-form limit map:
    exact h agreement and second-order flight agreement."""
    from lorentzgas import arithmetic, kernel
    th = math.atan(0.37)
    omega = Direction.from_angle(th)
    for r, tol_S in ((1e-3, 1e-4), (1e-5, 1e-8)):
        cfg = arithmetic.obstacle_params_cf((omega.cos, omega.sin), r)
        S_lim, h_lim = kernel.limit_transfer(cfg, 0.3)
        res = billiard.transfer_map(0.3, omega, r)
        assert res.impact == pytest.approx(h_lim, abs=1e-13)
        assert res.flight == pytest.approx(S_lim, abs=tol_S)


def test_transfer_map_octant_symmetry():
    th = math.atan(0.29)
    r = 1e-4
    base = billiard.transfer_map(0.41, Direction.from_angle(th), r)
    for k in range(1, 4):
        rot = billiard.transfer_map(0.41,
                                    Direction.from_angle(th + k * math.pi / 2),
                                    r)
        assert rot.flight == pytest.approx(base.flight, rel=1e-9)
        assert rot.impact == pytest.approx(base.impact, abs=1e-9)
    refl = billiard.transfer_map(-0.41, Direction.from_angle(-th), r)
    assert refl.flight == pytest.approx(base.flight, rel=1e-9)
    assert refl.impact == pytest.approx(-base.impact, abs=1e-9)

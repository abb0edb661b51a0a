import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softskin.dynamics import (
    NonFiniteState,
    RobotState,
    SegmentParams,
    accel,
    com_position,
    dynamics_terms,
    energy,
    shape_fn,
    step,
    tip_pose,
)

P = SegmentParams()
L = P.length
curv = st.floats(min_value=-3.1, max_value=3.1, allow_nan=False)


def arc_mean(length, q, n=100_000):
    """Oracle: average of n points spread uniformly along the arc."""
    s = (np.arange(n) + 0.5) / n * length
    if q == 0:
        return s.mean(), 0.0
    phi = q * s / length
    r = length / q
    return np.mean(r * np.sin(phi)), np.mean(r * (1 - np.cos(phi)))


def fd_com_jacobian(params, q, h=1e-5):
    xp, yp = com_position(params, q + h)
    xm, ym = com_position(params, q - h)
    return (xp - xm) / (2 * h), (yp - ym) / (2 * h)


class TestKinematics:
    def test_straight(self):
        pose = tip_pose(P, 0.0)
        assert (pose.x, pose.y, pose.theta) == (L, 0.0, 0.0)

    def test_quarter_circle(self):
        pose = tip_pose(P, math.pi / 2)
        assert pose.x == pytest.approx(0.078940, abs=1e-6)
        assert pose.y == pytest.approx(0.078940, abs=1e-6)
        assert pose.theta == pytest.approx(1.570796, abs=1e-6)

    @given(curv)
    def test_mirror(self, q):
        a, b = tip_pose(P, q), tip_pose(P, -q)
        assert a.x == pytest.approx(b.x, abs=1e-15)
        assert a.y == pytest.approx(-b.y, abs=1e-15)
        assert a.theta == -b.theta

    def test_tip_series_matches_closed_form(self):
        q = 1e-3
        series = (L * (1 - q * q / 6), L * q / 2)
        pose = tip_pose(P, q)
        assert abs(series[0] - pose.x) < 1e-10
        assert abs(series[1] - pose.y) < 1e-10

    def test_com_straight(self):
        assert com_position(P, 0.0) == pytest.approx((0.062, 0.0), abs=1e-15)

    def test_com_half_circle(self):
        x, y = com_position(P, math.pi)
        assert (x, y) == pytest.approx((2 * L / math.pi**2, L / math.pi), abs=1e-12)
        ox, oy = arc_mean(L, math.pi)
        assert (x, y) == pytest.approx((ox, oy), abs=1e-9)

    def test_com_unit_length_oracle(self):
        unit = SegmentParams(length=1.0)
        x, y = com_position(unit, 0.5)
        ox, oy = arc_mean(1.0, 0.5)
        assert x == pytest.approx(ox, abs=1e-9)
        assert y == pytest.approx(oy, abs=1e-9)
        assert (x, y) == pytest.approx((0.489670, 0.082298), abs=1e-6)

    def test_com_series_switch(self):
        below = com_position(P, math.nextafter(1e-3, 0))
        at = com_position(P, 1e-3)
        assert abs(below[0] - at[0]) < 1e-10
        assert abs(below[1] - at[1]) < 1e-10


class TestShape:
    def test_at_zero(self):
        a, da = shape_fn(0.0)
        assert a == pytest.approx(1 / 36, abs=1e-15)
        assert da == 0.0
        jx, jy = fd_com_jacobian(P, 0.0)
        assert a == pytest.approx((jx**2 + jy**2) / L**2, abs=1e-9)

    @pytest.mark.parametrize("q", [0.8, -0.3, 1.7, 2.9])
    def test_matches_finite_difference_jacobian(self, q):
        jx, jy = fd_com_jacobian(P, q)
        assert shape_fn(q)[0] == pytest.approx((jx**2 + jy**2) / L**2, abs=1e-8)

    @pytest.mark.parametrize("q", [0.01, 0.3, 0.49, 0.51, 1.2, -2.5])
    def test_derivative_matches_finite_difference(self, q):
        h = 1e-5
        fd = (shape_fn(q + h)[0] - shape_fn(q - h)[0]) / (2 * h)
        assert shape_fn(q)[1] == pytest.approx(fd, abs=1e-9)

    def test_series_switch_continuous(self):
        lo = shape_fn(math.nextafter(0.5, 0))
        hi = shape_fn(0.5)
        assert abs(lo[0] - hi[0]) < 1e-13
        assert abs(lo[1] - hi[1]) < 1e-13

    @given(curv)
    def test_even(self, q):
        assert shape_fn(q)[0] == pytest.approx(shape_fn(-q)[0], abs=1e-15)
        assert shape_fn(q)[0] > 0


class TestTerms:
    def test_inertia_at_zero(self):
        M, C, Kq, Dqd = dynamics_terms(P, RobotState(0.0, 3.0))
        assert M == pytest.approx(0.110 * 0.124**2 / 36, rel=1e-12)
        assert M == pytest.approx(4.6982e-5, rel=1e-4)

    def test_coriolis_vanishes_at_rest(self):
        assert dynamics_terms(P, RobotState(0.7, 0.0))[1] == 0.0

    def test_stiffness_torque(self):
        assert dynamics_terms(P, RobotState(0.5, 0.0))[2] == 0.5

    @settings(max_examples=200)
    @given(curv, st.floats(-20, 20))
    def test_skew_symmetry(self, q, qd):
        M_dot = P.mass * L**2 * shape_fn(q)[1] * qd
        C = dynamics_terms(P, RobotState(q, qd))[1]
        assert abs(M_dot - 2 * C) < 1e-12

    @settings(max_examples=100)
    @given(curv, st.floats(-20, 20))
    def test_coriolis_matches_numerical_inertia_rate(self, q, qd):
        h = 1e-6
        Mp = dynamics_terms(P, RobotState(q + h, 0))[0]
        Mm = dynamics_terms(P, RobotState(q - h, 0))[0]
        M_dot = (Mp - Mm) / (2 * h) * qd
        C = dynamics_terms(P, RobotState(q, qd))[1]
        assert 2 * C == pytest.approx(M_dot, rel=1e-5, abs=1e-11)

    @given(curv, st.floats(-20, 20), st.floats(-2, 2))
    def test_accel_residual(self, q, qd, tau):
        s = RobotState(q, qd)
        M, C, Kq, Dqd = dynamics_terms(P, s)
        qdd = accel(P, s, tau)
        assert abs(M * qdd + C * qd + Dqd + Kq - tau) < 1e-12

    def test_accel_examples(self):
        assert accel(P, RobotState(), 0.0) == 0.0
        M02 = dynamics_terms(P, RobotState(0.2, 0.0))[0]
        assert accel(P, RobotState(0.2, 0.0), 0.0) == pytest.approx(-0.2 / M02, rel=1e-14)
        assert accel(P, RobotState(), 0.01) == pytest.approx(212.85, rel=1e-4)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SegmentParams(mass=0.0)
        with pytest.raises(ValueError):
            SegmentParams(skin_offset=-1.0)


class TestStep:
    def test_rest_is_fixed_point(self):
        assert step(P, RobotState(), 0.0) == RobotState()

    def test_small_oscillation_period(self):
        undamped = SegmentParams(damping=0.0)
        M0 = dynamics_terms(undamped, RobotState())[0]
        expected = 2 * math.pi * math.sqrt(M0 / undamped.stiffness)
        h = 1e-4
        s = RobotState(0.01, 0.0)
        qs = [s.q]
        for _ in range(5000):
            s = step(undamped, s, 0.0, h)
            qs.append(s.q)
        qs = np.array(qs)
        # interpolated downward zero crossings
        idx = np.flatnonzero((qs[:-1] > 0) & (qs[1:] <= 0))
        tc = (idx + qs[idx] / (qs[idx] - qs[idx + 1])) * h
        period = np.mean(np.diff(tc))
        assert period == pytest.approx(expected, rel=0.005)

    def test_energy_conservation(self):
        undamped = SegmentParams(damping=0.0)
        s = RobotState(0.01, 0.0)
        E0 = energy(undamped, s)
        for _ in range(10_000):
            s = step(undamped, s, 0.0, 1e-3)
        assert abs(energy(undamped, s) - E0) / E0 < 1e-8

    def test_settles_to_static_deflection(self):
        s = RobotState()
        # 5 s is 25 time constants of the D/K = 0.2 s creep
        for _ in range(3000):
            s = step(P, s, 0.4)
        assert s.q == pytest.approx(0.4, abs=1e-6)

    def test_step_size_guard(self):
        with pytest.raises(ValueError):
            step(P, RobotState(0.1, 0.0), 0.0, 0.02)

    @pytest.mark.parametrize("tau, state", [(math.inf, RobotState(0.1, 0.0)), (0.0, RobotState(math.nan, 0.0))])
    def test_non_finite(self, tau, state):
        with pytest.raises(NonFiniteState):
            step(P, state, tau)

    def test_blow_up_is_reported(self):
        with pytest.raises(NonFiniteState):
            step(P, RobotState(0.1, 0.0), 1e300, h=0.01, substeps=1)

    def test_workspace_saturation(self, caplog):
        s = RobotState(3.1, 0.0)
        with caplog.at_level(logging.WARNING):
            for _ in range(20):
                s = step(P, s, 10.0)
        assert abs(s.q) < math.pi
        assert "workspace limit" in caplog.text

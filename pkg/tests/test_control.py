import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softskin.control import (
    THETA0,
    AdaptiveController,
    ControllerGains,
    RateState,
    adapt,
    control_law,
    estimate_rate,
    lyapunov,
    reference,
    regressor,
    simulate_ideal,
)
from softskin.dynamics import RobotState, SegmentParams, dynamics_terms, shape_fn
from softskin.trajectories import TrajectorySpec

P = SegmentParams()
finite = st.floats(-10, 10, allow_nan=False)


class TestReference:
    def test_perfect_tracking(self):
        r = reference(0.3, 0.1, 0.3, 0.1, 0.0, 3.2)
        assert (r.q_tilde, r.s, r.q_r_dot) == (0.0, 0.0, 0.1)

    def test_example(self):
        assert reference(0.6, 0.2, 0.5, 0.2, 0.0, 3.2).s == pytest.approx(0.32, abs=1e-15)

    @given(finite, finite, finite, finite)
    def test_linear_in_errors(self, q_d, q_d_dot, e, e_dot):
        r1 = reference(q_d + e, q_d_dot + e_dot, q_d, q_d_dot, 0.0, 3.2)
        r2 = reference(q_d + 2 * e, q_d_dot + 2 * e_dot, q_d, q_d_dot, 0.0, 3.2)
        assert r2.s == pytest.approx(2 * r1.s, rel=1e-9, abs=1e-9)

    @given(finite, finite, finite, finite, finite)
    def test_s_is_velocity_minus_reference(self, q, qd, q_d, q_d_dot, q_d_ddot):
        r = reference(q, qd, q_d, q_d_dot, q_d_ddot, 3.2)
        assert r.s == pytest.approx(qd - r.q_r_dot, abs=1e-12)


class TestRegressor:
    def test_zero(self):
        np.testing.assert_array_equal(regressor(0.0, 0.0, 0.0, 0.0), [0.0, 0.0, 0.0])

    def test_example(self):
        np.testing.assert_allclose(regressor(0.0, 0.0, 0.0, 1.0), [1 / 36, 0, 0], atol=1e-15)

    @settings(max_examples=300)
    @given(st.floats(-3.1, 3.1), finite, finite, finite)
    def test_identity_with_dynamics(self, q, qd, q_r_dot, q_r_ddot):
        M, C, Kq, _ = dynamics_terms(P, RobotState(q, qd))
        lhs = regressor(q, qd, q_r_dot, q_r_ddot) @ np.array(P.theta)
        rhs = M * q_r_ddot + (C + P.damping) * q_r_dot + Kq
        assert abs(lhs - rhs) < 1e-12

    def test_precomputed_shape(self):
        np.testing.assert_array_equal(regressor(0.7, 1.0, 2.0, 3.0), regressor(0.7, 1.0, 2.0, 3.0, shape_fn(0.7)))


class TestLaw:
    def test_zero(self):
        assert control_law(np.zeros(3), THETA0, 0.0, 0.8) == 0.0

    def test_stiffness_feedforward(self):
        assert control_law([0, 1, 0], THETA0, 0.0, 0.8) == pytest.approx(0.1)

    def test_damping_injection(self):
        assert control_law(np.zeros(3), THETA0, 1.0, 0.8) == -0.8


class TestAdapt:
    def test_no_error_no_change(self):
        np.testing.assert_array_equal(adapt(THETA0, [1.0, 2.0, 3.0], 0.0, 1.2, 0.01), THETA0)

    def test_example(self):
        new = adapt(THETA0, [0, 1, 0], 0.1, 1.2, 0.01)
        assert THETA0[1] - new[1] == pytest.approx(0.0012, abs=1e-15)
        assert (new[0], new[2]) == (THETA0[0], THETA0[2])

    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-2, 2), st.floats(0.1, 3))
    def test_bilinear_in_gain_and_error(self, g1, g2, s, c):
        Y = np.array([0.3, -0.2, 0.5])
        d1 = adapt(np.zeros(3), Y, s, g1, 0.01)
        d2 = adapt(np.zeros(3), Y, c * s, g2, 0.01)
        np.testing.assert_allclose(d2, d1 * c * g2 / g1, rtol=1e-12, atol=1e-15)

    def test_matrix_gain(self):
        G = np.diag([1.0, 2.0, 3.0])
        np.testing.assert_allclose(adapt(np.zeros(3), [1, 1, 1], 1.0, G, 1.0), [-1, -2, -3])

    def test_clamp(self):
        assert np.all(adapt([0.01, 0.01, 0.01], [1, 1, 1], 10.0, 1.2, 1.0, clamp=True) == 0.0)

    def test_gains_validated(self):
        with pytest.raises(ValueError):
            ControllerGains(lam=0)
        with pytest.raises(ValueError):
            ControllerGains(Gamma=np.array([[1.0, 2.0, 0], [0, 1.0, 0], [0, 0, 1.0]]))
        with pytest.raises(ValueError):
            ControllerGains(Gamma=-1.0)


def run_filter(signal, h, cutoff=5.0):
    st_, out = RateState(), []
    for x in signal:
        r, st_ = estimate_rate(st_, x, h, cutoff)
        out.append(r)
    return np.array(out)


class TestRateFilter:
    def test_constant(self):
        assert abs(run_filter(np.full(200, 0.4), 1 / 85)[-1]) < 1e-12

    def test_ramp(self):
        h, r = 1 / 85, 0.7
        tc = 1 / (2 * math.pi * 5.0)
        n = int(math.ceil(5 * tc / h)) + 1
        out = run_filter(r * h * np.arange(n), h)
        assert out[-1] == pytest.approx(r, rel=0.01)

    def test_sinusoid_gain(self):
        h, f = 1 / 85, 0.5
        t = np.arange(0, 20, h)
        out = run_filter(np.sin(2 * math.pi * f * t), h)
        amp = np.max(np.abs(out[t > 10])) / (2 * math.pi * f)
        assert abs(amp - 1) < 0.02


class TestLyapunov:
    def test_zero(self):
        assert lyapunov(1e-4, 0.0, np.zeros(3), 1.2) == 0.0

    @given(st.floats(1e-6, 1), finite, st.lists(finite, min_size=3, max_size=3))
    def test_non_negative(self, M, s, e):
        assert lyapunov(M, s, e, 1.2) >= 0.0


class TestController:
    def test_replay_is_bit_identical(self):
        traj = TrajectorySpec("uni_low")
        stream = [0.01 * math.sin(0.1 * k) for k in range(300)]

        def run():
            c = AdaptiveController()
            return [c.update(q, *traj(k / 85), 1 / 85)[0] for k, q in enumerate(stream)]

        assert run() == run()

    def test_starts_from_initial_estimate(self):
        c = AdaptiveController()
        np.testing.assert_array_equal(c.theta_hat, THETA0)

    def test_supplied_rate_bypasses_filter(self):
        c = AdaptiveController()
        _, info = c.update(0.1, 0.1, 0.0, 0.0, 0.01, q_dot=0.5)
        assert info["q_dot"] == 0.5 and info["s"] == pytest.approx(0.5)


class TestIdealLoop:
    def test_lyapunov_non_increasing(self, ideal_uni_low):
        assert np.max(np.diff(ideal_uni_low["V"])) <= 1e-6

    def test_error_shrinks(self, ideal_uni_low):
        run = ideal_uni_low
        err = np.abs(run["q"] - run["q_d"])
        t = run["t"]
        assert err[t > 30].max() < 0.5 * err[t < 10].max()

    def test_initial_estimate(self, ideal_uni_low):
        np.testing.assert_array_equal(ideal_uni_low["theta_hat"][0], THETA0)
        assert ideal_uni_low["t"][0] == 0.0

    def test_short_run_shape(self):
        run = simulate_ideal(P, TrajectorySpec("uni_low"), duration=0.1, h=1e-4, record_every=100)
        assert len(run["t"]) == 11
        assert run["t"][-1] == pytest.approx(0.1)

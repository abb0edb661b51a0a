import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softskin.dynamics import RobotState, SegmentParams
from softskin.sensing import (
    SensorFrame,
    SkinChannel,
    SkinParams,
    make_channels,
    read_adc,
    read_frames_csv,
    resistance,
    sample_frame,
    strain,
    write_frames_csv,
)

P = SegmentParams()
A, B = SkinParams(side="A"), SkinParams(side="B")
QUIET_A, QUIET_B = SkinParams(side="A", noise_sd=0, lag_tau=0), SkinParams(side="B", noise_sd=0, lag_tau=0)


def quiet_channels():
    return make_channels((QUIET_A, QUIET_B), 0)


class TestStrain:
    def test_straight(self):
        assert strain(P, A, 0.0) == 0.0 and strain(P, B, 0.0) == 0.0

    def test_example(self):
        assert strain(P, A, 0.5) == pytest.approx(0.060484, abs=1e-6)

    def test_tension_only(self):
        assert strain(P, A, -0.5) == 0.0
        assert strain(P, B, -0.5) == pytest.approx(0.060484, abs=1e-6)

    @given(st.floats(-3.1, 3.1))
    def test_one_skin_at_a_time(self, q):
        assert strain(P, A, q) * strain(P, B, q) == 0.0


class TestResistanceAndAdc:
    def test_unstrained(self):
        assert resistance(A, 0.0) == A.r0

    def test_example(self):
        assert resistance(A, 0.060484) == pytest.approx(1604.84, abs=1e-2)

    def test_negative_strain_rejected(self):
        with pytest.raises(ValueError):
            resistance(A, -0.1)

    def test_divider_midpoint(self):
        assert read_adc(A, A.r_fixed) == 511

    def test_saturation(self):
        assert read_adc(A, math.inf) == 1023

    def test_example_counts(self):
        R = resistance(A, strain(P, A, 0.5))
        assert read_adc(A, R) == math.floor(1023 * 1604.84 / 2604.84) == 630

    @given(st.floats(1e-6, 1e12))
    def test_in_range(self, R):
        assert 0 <= read_adc(A, R) <= A.full_scale

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SkinParams(adc_bits=20)
        with pytest.raises(ValueError):
            SkinParams(gauge_factor=0)
        with pytest.raises(ValueError):
            SkinParams(noise_sd=-1)


class TestSampling:
    def test_rest_reads_r0(self):
        f = sample_frame(P, RobotState(), (0.0, 0.0), quiet_channels(), 0.0, 1 / 85)
        assert f.raw_A == f.raw_B == read_adc(A, A.r0)

    def test_raw_monotone_in_curvature(self):
        qs = np.linspace(0, 3.1, 300)
        ra = [sample_frame(P, RobotState(q), (0, 0), quiet_channels(), 0, 0.01).raw_A for q in qs]
        rb = [sample_frame(P, RobotState(-q), (0, 0), quiet_channels(), 0, 0.01).raw_B for q in qs]
        assert np.all(np.diff(ra) >= 0) and np.all(np.diff(rb) >= 0)
        assert ra[-1] > ra[0]

    def test_lag_is_first_order(self):
        skin = SkinParams(noise_sd=0, lag_tau=0.02)
        ch = SkinChannel(skin, np.random.default_rng(0))
        ch.sample(P, 0.0, 0.005)  # initialises at r0
        h = 0.005
        R_target = resistance(skin, strain(P, skin, 0.5))
        r = skin.r0
        for _ in range(10):
            ch.sample(P, 0.5, h)
            r += (h / skin.lag_tau) * (R_target - r)
        assert ch.r_filt == pytest.approx(r, rel=1e-12)

    def test_lag_gain_clamped(self):
        skin = SkinParams(noise_sd=0, lag_tau=0.001)
        ch = SkinChannel(skin, np.random.default_rng(0))
        ch.sample(P, 0.0, 0.01)
        ch.sample(P, 0.5, 0.01)
        assert ch.r_filt == pytest.approx(resistance(skin, strain(P, skin, 0.5)))

    def test_seeded_stream_repeats(self):
        def run():
            ch = make_channels((A, B), [7, 2])
            return [sample_frame(P, RobotState(0.1 * k % 1), (5.0, 0.0), ch, k / 85, 1 / 85) for k in range(200)]

        assert run() == run()

    def test_noise_is_present(self):
        ch = make_channels((A, B), 1)
        raws = {sample_frame(P, RobotState(0.3), (0, 0), ch, 0, 1 / 85).raw_A for _ in range(300)}
        assert len(raws) > 1

    def test_skin_B_untouched_when_disabled(self):
        ch = quiet_channels()
        f = sample_frame(P, RobotState(-0.4), (0, 0), ch, 0, 0.01, use_B=False)
        assert f.raw_B == 0
        assert (ch[0].reads, ch[1].reads) == (1, 0)


def test_frames_csv_round_trip(tmp_path):
    frames = [SensorFrame(k / 60, 500 + k, 510 - k, 12.5 * k, 0.0) for k in range(5)]
    q = np.array([0.1, 0.2, 1 / 3, -4.0, 5.5])
    path = tmp_path / "frames.csv"
    write_frames_csv(path, frames, q)
    assert path.read_text().splitlines()[0] == "t,raw_A,raw_B,duty_A,duty_B,q_truth_deg"
    back, q_back = read_frames_csv(path)
    assert back == frames
    np.testing.assert_array_equal(q_back, q)

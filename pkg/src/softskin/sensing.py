"""Synthetic piezoresistive sensing skins.

Each skin sits ``skin_offset`` away from the inextensible middle layer on one
side of the segment. Bending towards the other side stretches it:

    strain -> R = r0 (1 + GF eps) -> voltage divider -> ADC counts

The skin only responds to tension, so skin A sees q > 0 and skin B sees
q < 0. Sampling adds Gaussian resistance noise and a first-order lag.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import RobotState, SegmentParams

UNI_RATE = 85.0
BI_RATE = 60.0


@dataclass(frozen=True)
class SkinParams:
    gauge_factor: float = 10.0
    r0: float = 1000.0
    r_fixed: float = 1000.0
    vcc: float = 5.0
    adc_bits: int = 10
    noise_sd: float = 5.0
    lag_tau: float = 0.02
    side: str = "A"
    # quadratic strain term, R = r0 (1 + GF eps + quad eps^2); linear by default
    quad: float = 0.0

    def __post_init__(self):
        if not self.gauge_factor > 0:
            raise ValueError("gauge_factor must be positive")
        if not (self.r0 > 0 and self.r_fixed > 0):
            raise ValueError("resistances must be positive")
        if not 8 <= self.adc_bits <= 16:
            raise ValueError(f"adc_bits must be in [8, 16], got {self.adc_bits}")
        if self.noise_sd < 0 or self.lag_tau < 0:
            raise ValueError("noise_sd and lag_tau must be non-negative")
        if self.side not in ("A", "B"):
            raise ValueError(f"side must be 'A' or 'B', got {self.side!r}")

    @property
    def full_scale(self) -> int:
        return 2**self.adc_bits - 1


@dataclass(frozen=True)
class SensorFrame:
    t: float
    raw_A: int
    raw_B: int
    duty_A: float
    duty_B: float


def strain(params: SegmentParams, skin: SkinParams, q: float) -> float:
    eps = params.skin_offset * q / params.length
    if skin.side == "B":
        eps = -eps
    return max(0.0, eps)


def resistance(skin: SkinParams, eps: float) -> float:
    """Noise-free resistance at strain ``eps``."""
    if eps < 0:
        raise ValueError(f"strain must be non-negative, got {eps}")
    return skin.r0 * (1.0 + skin.gauge_factor * eps + skin.quad * eps * eps)


def read_adc(skin: SkinParams, R: float) -> int:
    n = skin.full_scale
    if math.isinf(R):
        return n
    if R <= 0:
        raise ValueError(f"resistance must be positive, got {R}")
    frac = R / (R + skin.r_fixed)
    return min(max(math.floor(frac * n), 0), n)


class SkinChannel:
    """One skin with its own noise stream and lag state.

    ``reads`` counts samples taken, so callers can check which skins a
    pipeline actually touched.
    """

    def __init__(self, skin: SkinParams, rng: np.random.Generator):
        self.skin = skin
        self.rng = rng
        self.r_filt = None
        self.reads = 0

    def sample(self, params: SegmentParams, q: float, h: float) -> int:
        skin = self.skin
        R = resistance(skin, strain(params, skin, q))
        if skin.noise_sd > 0:
            R += skin.noise_sd * self.rng.standard_normal()
        if self.r_filt is None or skin.lag_tau == 0:
            self.r_filt = R
        else:
            alpha = min(1.0, h / skin.lag_tau)
            self.r_filt += alpha * (R - self.r_filt)
        self.reads += 1
        return read_adc(skin, max(self.r_filt, 1e-9))


def make_channels(skins, seed) -> tuple[SkinChannel, SkinChannel]:
    """Independent, seeded channels for skins A and B."""
    ss_A, ss_B = np.random.SeedSequence(seed).spawn(2)
    skin_A, skin_B = skins
    return (
        SkinChannel(skin_A, np.random.default_rng(ss_A)),
        SkinChannel(skin_B, np.random.default_rng(ss_B)),
    )


def sample_frame(
    params: SegmentParams,
    robot: RobotState,
    duties: tuple[float, float],
    channels,
    t: float,
    h: float,
    use_B: bool = True,
) -> SensorFrame:
    """Read both skins (or only A when ``use_B`` is False; raw_B is then 0)."""
    ch_A, ch_B = channels
    raw_A = ch_A.sample(params, robot.q, h)
    raw_B = ch_B.sample(params, robot.q, h) if use_B else 0
    return SensorFrame(t, raw_A, raw_B, float(duties[0]), float(duties[1]))


FRAME_COLUMNS = ("t", "raw_A", "raw_B", "duty_A", "duty_B", "q_truth_deg")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_frames_csv(path, frames, q_truth_deg) -> None:
    """Persist a frame stream; ``q_truth_deg`` aligns with ``frames``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for f, q in zip(frames, q_truth_deg):
            w.writerow([fmt(f.t), f.raw_A, f.raw_B, fmt(f.duty_A), fmt(f.duty_B), fmt(q)])


def read_frames_csv(path):
    """Inverse of :func:`write_frames_csv`; returns (frames, q_truth_deg)."""
    frames, q = [], []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        for row in r:
            frames.append(
                SensorFrame(
                    float(row["t"]),
                    int(row["raw_A"]),
                    int(row["raw_B"]),
                    float(row["duty_A"]),
                    float(row["duty_B"]),
                )
            )
            q.append(float(row["q_truth_deg"]))
    return frames, np.array(q)

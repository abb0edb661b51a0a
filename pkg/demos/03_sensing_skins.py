"""
Piezoresistive sensing skins
============================

Two skins sit on opposite faces of the segment. Bending stretches one of
them; the compressed one buckles and reads as unstrained. Resistance goes
through a voltage divider into a 10-bit ADC, with white noise and a
first-order lag on top.
"""

import math

import numpy as np

from softskin.dynamics import SegmentParams
from softskin.sensing import SkinParams, make_channels, read_adc, resistance, strain

params = SegmentParams()
A, B = SkinParams(side="A"), SkinParams(side="B")

# %% Noise-free transfer curve: only the stretched side responds
for deg in (-60, -30, 0, 30, 60):
    q = math.radians(deg)
    counts = [read_adc(s, resistance(s, strain(params, s, q))) for s in (A, B)]
    print(f"q = {deg:+3d} deg  raw A {counts[0]:4d}  raw B {counts[1]:4d}")

# %% Noise: hold the segment still and read many samples
ch_A, _ = make_channels((A, B), seed=0)
q = math.radians(30)
raw = np.array([ch_A.sample(params, q, 1 / 85) for _ in range(2000)])
print(f"held at 30 deg: mean {raw.mean():.2f} counts, sd {raw.std():.2f} counts")

# %% Lag: a step in curvature shows up over a few samples
ch_A, _ = make_channels((SkinParams(side="A", noise_sd=0.0), B), seed=0)
ch_A.sample(params, 0.0, 1 / 85)
print("step 0 -> 60 deg:", [ch_A.sample(params, math.radians(60), 1 / 85) for _ in range(6)])

"""
Calibrating the pneumatic actuator
==================================

Each compartment maps a PWM duty in [0, 255] to a one-sided torque. The
controller needs the inverse, so we apply a grid of duties, wait for the
segment to settle, convert the settled curvature to torque with a nominal
stiffness, and fit a cubic torque -> duty polynomial per compartment.
"""

import numpy as np

from softskin.actuation import (
    PlantActuator,
    calibrate,
    is_monotone,
    plant_torque,
    torque_interval,
    torque_to_duty,
)
from softskin.dynamics import SegmentParams

act = PlantActuator()
maps = calibrate(act, SegmentParams())

# %% The fitted maps
for m in maps:
    print(f"compartment {m.compartment}: coeffs {np.round(m.coeffs, 3)}")
    print(f"  tau_max {m.tau_max:.4f} N m, residual {m.residual_rms:.3f} counts, monotone {is_monotone(m)}")

# %% Round trip: ask for a torque, command the duty, measure what the plant gives
for tau in (-0.3, -0.1, 0.05, 0.2, 0.4):
    dA, dB = torque_to_duty(maps, tau)
    got = plant_torque(act, dA, dB)
    print(f"tau {tau:+.2f} -> duty A {dA:6.1f}, B {dB:6.1f} -> plant {got:+.4f} N m")

# %% Worst relative error over the calibrated interior
worst = 0.0
for cmap, sign in zip(maps, (1, -1)):
    for mag in np.linspace(*torque_interval(cmap), 200):
        worst = max(worst, abs(plant_torque(act, *torque_to_duty(maps, sign * mag)) - sign * mag) / mag)
print(f"worst round-trip error {100 * worst:.2f}%")

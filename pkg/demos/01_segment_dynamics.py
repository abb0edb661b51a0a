"""
Single-segment soft robot dynamics
==================================

The segment is modelled as one arc of constant curvature ``q``. This script
walks through its kinematics, the curvature-dependent inertia, a free
oscillation with and without damping, and the static response to a torque.
"""

import math

import numpy as np

from softskin.dynamics import RobotState, SegmentParams, dynamics_terms, energy, step, tip_pose

params = SegmentParams()
print(params)

# %% Kinematics: the tip sweeps a circle-involute as the segment bends
for deg in (0, 30, 90, 180):
    pose = tip_pose(params, math.radians(deg))
    print(f"q = {deg:3d} deg  tip = ({pose.x:.4f}, {pose.y:.4f}) m  heading {math.degrees(pose.theta):.1f} deg")

# %% Equivalent inertia shrinks as the arc curls up
for deg in (0, 45, 90, 135, 180):
    M = dynamics_terms(params, RobotState(math.radians(deg), 0.0))[0]
    print(f"M({deg:3d} deg) = {M:.3e} kg m^2")

# %% Free oscillation without damping conserves energy
undamped = SegmentParams(damping=0.0)
s = RobotState(0.5, 0.0)
E0 = energy(undamped, s)
qs = []
for _ in range(2000):
    s = step(undamped, s, 0.0, 1e-3)
    qs.append(s.q)
print(f"undamped: energy drift after 2 s = {abs(energy(undamped, s) - E0) / E0:.2e}")
print(f"undamped: q stays in [{min(qs):.3f}, {max(qs):.3f}] rad")

# %% With the default damping the same release creeps back to zero
s = RobotState(0.5, 0.0)
trace = []
for k in range(1, 301):
    s = step(params, s, 0.0)
    if k % 50 == 0:
        trace.append((k * 1e-3 * 5, s.q))
print("damped release:", ", ".join(f"t={t:.2f}s q={q:.4f}" for t, q in trace))

# %% A constant torque settles at q = tau / K
s = RobotState()
for _ in range(3000):
    s = step(params, s, 0.4)
print(f"tau = 0.4 N m settles at q = {s.q:.6f} rad (K = {params.stiffness})")
print(np.round(params.theta, 6), "= [m L^2, K, D]")

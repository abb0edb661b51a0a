"""Adaptive curvature-tracking control.

The controller is the classical Slotine-Li design applied to the
constant-curvature model. With tracking error qt = q - q_d,

    q_r_dot  = q_d_dot - lambda qt
    s        = q_dot - q_r_dot
    tau      = Y theta_hat - K_D s
    theta_hat_dot = -Gamma Y^T s

where Y theta = M q_r_ddot + (C + D) q_r_dot + K q is linear in
theta = [m L^2, K_s, D_s].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import SegmentParams, shape_fn

THETA0 = (0.6, 0.1, 0.1)


@dataclass(frozen=True)
class ControllerGains:
    lam: float = 3.2
    K_D: float = 0.8
    Gamma: float | np.ndarray = 1.2

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.K_D > 0:
            raise ValueError("K_D must be positive")
        G = self.gamma_matrix
        if not np.allclose(G, G.T) or np.min(np.linalg.eigvalsh(G)) <= 0:
            raise ValueError("Gamma must be symmetric positive definite")

    @property
    def gamma_matrix(self) -> np.ndarray:
        G = np.asarray(self.Gamma, dtype=float)
        return G * np.eye(3) if G.ndim == 0 else G


class Reference(NamedTuple):
    q_tilde: float
    q_r_dot: float
    q_r_ddot: float
    s: float


def reference(q, q_dot, q_d, q_d_dot, q_d_ddot, lam) -> Reference:
    q_tilde = q - q_d
    q_r_dot = q_d_dot - lam * q_tilde
    q_r_ddot = q_d_ddot - lam * (q_dot - q_d_dot)
    return Reference(q_tilde, q_r_dot, q_r_ddot, q_dot - q_r_dot)


def regressor(q, q_dot, q_r_dot, q_r_ddot, shape=None) -> np.ndarray:
    """Row vector Y with Y @ [m L^2, K_s, D_s] = M q_r_ddot + (C + D) q_r_dot + K q.

    ``shape`` optionally supplies precomputed (a(q), a'(q)).
    """
    a, da = shape if shape is not None else shape_fn(q)
    return np.array([a * q_r_ddot + 0.5 * da * q_dot * q_r_dot, q, q_r_dot])


def control_law(Y, theta_hat, s, K_D) -> float:
    return float(np.dot(Y, theta_hat) - K_D * s)


def adapt(theta_hat, Y, s, Gamma, h, clamp: bool = False) -> np.ndarray:
    """Explicit Euler step of theta_hat_dot = -Gamma Y^T s."""
    G = np.asarray(Gamma, dtype=float)
    G = G * np.eye(3) if G.ndim == 0 else G
    new = np.asarray(theta_hat, dtype=float) - h * (G @ np.asarray(Y, dtype=float)) * s
    if clamp:
        new = np.maximum(new, 0.0)
    return new


class RateState(NamedTuple):
    q_prev: float | None = None
    rate: float = 0.0


def estimate_rate(state: RateState, q: float, h: float, cutoff: float = 5.0):
    """Low-passed backward difference. Returns (rate, new_state)."""
    if state.q_prev is None:
        return state.rate, RateState(q, state.rate)
    alpha = -math.expm1(-2.0 * math.pi * cutoff * h)
    d = (q - state.q_prev) / h
    rate = state.rate + alpha * (d - state.rate)
    return rate, RateState(q, rate)


def lyapunov(M, s, theta_err, Gamma) -> float:
    """V = 0.5 M s^2 + 0.5 theta_err^T Gamma^-1 theta_err."""
    G = np.asarray(Gamma, dtype=float)
    G = G * np.eye(3) if G.ndim == 0 else G
    e = np.asarray(theta_err, dtype=float)
    return float(0.5 * M * s * s + 0.5 * e @ np.linalg.solve(G, e))


@dataclass
class AdaptiveController:
    """Sampled-data adaptive controller.

    ``update`` is called once per control tick with the measured (or
    estimated) curvature; the rate comes from the filtered differentiator
    unless ``q_dot`` is given.
    """

    gains: ControllerGains = field(default_factory=ControllerGains)
    theta_hat: np.ndarray = field(default_factory=lambda: np.array(THETA0))
    rate_cutoff: float = 5.0
    clamp: bool = False
    rate_state: RateState = field(default_factory=RateState)
    tau: float = 0.0

    def __post_init__(self):
        self.theta_hat = np.array(self.theta_hat, dtype=float)
        self._G = self.gains.gamma_matrix

    def update(self, q, q_d, q_d_dot, q_d_ddot, h, q_dot=None):
        """Return (tau, info) for one tick; adapts theta_hat in place."""
        rate, self.rate_state = estimate_rate(self.rate_state, q, h, self.rate_cutoff)
        if q_dot is None:
            q_dot = rate
        ref = reference(q, q_dot, q_d, q_d_dot, q_d_ddot, self.gains.lam)
        Y = regressor(q, q_dot, ref.q_r_dot, ref.q_r_ddot)
        self.tau = control_law(Y, self.theta_hat, ref.s, self.gains.K_D)
        self.theta_hat = adapt(self.theta_hat, Y, ref.s, self._G, h, self.clamp)
        return self.tau, {"s": ref.s, "q_dot": q_dot, "q_tilde": ref.q_tilde, "Y": Y}


def simulate_ideal(
    params: SegmentParams,
    trajectory,
    gains: ControllerGains = ControllerGains(),
    theta0=THETA0,
    duration: float = 40.0,
    h: float = 1e-4,
    q0: float = 0.0,
    record_every: int = 10,
):
    """Continuous-time closed loop with perfect state feedback.

    The control and adaptation laws are evaluated inside every RK4 stage
    on the augmented state (q, q_dot, theta_hat), so the loop is the
    differential system the Lyapunov argument applies to. Torque is applied
    directly (no actuator). Returns a dict of recorded arrays.
    """
    mL2, K, D = params.theta
    G = gains.gamma_matrix
    Gl = G.tolist()
    lam, K_D = gains.lam, gains.K_D

    # scalar arithmetic throughout; this loop runs ~10^5-10^6 times
    def rhs(t, q, qd, th):
        q_d, q_d_dot, q_d_ddot = trajectory(t)
        q_r_dot = q_d_dot - lam * (q - q_d)
        q_r_ddot = q_d_ddot - lam * (qd - q_d_dot)
        s = qd - q_r_dot
        a, da = shape_fn(q)
        Y = (a * q_r_ddot + 0.5 * da * qd * q_r_dot, q, q_r_dot)
        tau = Y[0] * th[0] + Y[1] * th[1] + Y[2] * th[2] - K_D * s
        qdd = (tau - 0.5 * mL2 * da * qd * qd - D * qd - K * q) / (mL2 * a)
        dth = [-(row[0] * Y[0] + row[1] * Y[1] + row[2] * Y[2]) * s for row in Gl]
        return qd, qdd, dth

    theta = np.array(params.theta)
    n = int(round(duration / h))
    q, qd = float(q0), 0.0
    th = [float(v) for v in theta0]
    rec = {k: [] for k in ("t", "q", "q_d", "s", "V", "theta_hat")}
    G_inv = np.linalg.inv(G)

    def record(t):
        q_d, q_d_dot, _ = trajectory(t)
        s = (qd - q_d_dot) + lam * (q - q_d)
        a, _ = shape_fn(q)
        e = np.array(th) - theta
        rec["t"].append(t)
        rec["q"].append(q)
        rec["q_d"].append(q_d)
        rec["s"].append(s)
        rec["V"].append(0.5 * mL2 * a * s * s + 0.5 * float(e @ G_inv @ e))
        rec["theta_hat"].append(list(th))

    record(0.0)
    h2 = 0.5 * h
    for k in range(n):
        t = k * h
        v1, a1, d1 = rhs(t, q, qd, th)
        v2, a2, d2 = rhs(t + h2, q + h2 * v1, qd + h2 * a1, [x + h2 * d for x, d in zip(th, d1)])
        v3, a3, d3 = rhs(t + h2, q + h2 * v2, qd + h2 * a2, [x + h2 * d for x, d in zip(th, d2)])
        v4, a4, d4 = rhs(t + h, q + h * v3, qd + h * a3, [x + h * d for x, d in zip(th, d3)])
        q += h / 6 * (v1 + 2 * v2 + 2 * v3 + v4)
        qd += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        th = [x + h / 6 * (p + 2 * r + 2 * u + w) for x, p, r, u, w in zip(th, d1, d2, d3, d4)]
        if not (math.isfinite(q) and math.isfinite(qd)):
            raise FloatingPointError(f"closed loop diverged at t={t + h}")
        if (k + 1) % record_every == 0:
            record((k + 1) * h)
    return {k: np.array(v) for k, v in rec.items()}

"""Planar single-segment constant-curvature dynamics.

The segment is an inextensible circular arc clamped at the origin with its
base tangent along +x. Its configuration is the degree of curvature ``q``
(total bend angle, base tangent to tip tangent). The mass is lumped at the
arc's centre of mass, which gives

    M(q) = m L^2 a(q),        a(q) = |d com / dq|^2 / L^2
    C(q, qdot) = 0.5 m L^2 a'(q) qdot

and the equation of motion (horizontal plane, no gravity)

    M(q) qddot + C qdot + D qdot + K q = tau
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

logger = logging.getLogger(__name__)

# |q| below which the closed forms lose digits to cancellation
KIN_SERIES_BELOW = 1e-6
COM_SERIES_BELOW = 1e-3
SHAPE_SERIES_BELOW = 0.5

# even Taylor coefficients of a(q) about 0 (q^0, q^2, ..., q^16)
_A_SERIES = (
    1.0 / 36.0,
    -1.0 / 720.0,
    1.0 / 33600.0,
    -1.0 / 2721600.0,
    1.0 / 335301120.0,
    -1.0 / 58118860800.0,
    1.0 / 13450364928000.0,
    -1.0 / 4001483566080000.0,
    1.0 / 1486773449441280000.0,
)

WORKSPACE_LIMIT = math.pi
DEFAULT_STEP = 1.0 / 600.0


class NonFiniteState(FloatingPointError):
    """Integration produced NaN or Inf."""


@dataclass(frozen=True)
class SegmentParams:
    """Physical description of one constant-curvature segment.

    Defaults describe the measured single segment: 124 mm long, 0.110 kg,
    K_s = 1 N m/rad and D_s = 0.2 N m s/rad. ``skin_offset`` is the distance
    between the inextensible middle layer and the sensing skin.
    """

    mass: float = 0.110
    length: float = 0.124
    stiffness: float = 1.0
    damping: float = 0.2
    skin_offset: float = 0.015

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if not self.stiffness >= 0:
            raise ValueError(f"stiffness must be non-negative, got {self.stiffness}")
        if not self.damping >= 0:
            raise ValueError(f"damping must be non-negative, got {self.damping}")
        if not self.skin_offset > 0:
            raise ValueError(f"skin_offset must be positive, got {self.skin_offset}")

    @property
    def theta(self):
        """True parameter vector [m L^2, K_s, D_s] used by the adaptive law."""
        return (self.mass * self.length**2, self.stiffness, self.damping)


@dataclass(frozen=True)
class RobotState:
    q: float = 0.0
    q_dot: float = 0.0


@dataclass(frozen=True)
class PlanarPose:
    x: float
    y: float
    theta: float


def tip_pose(params: SegmentParams, q: float) -> PlanarPose:
    L = params.length
    if abs(q) < KIN_SERIES_BELOW:
        return PlanarPose(L * (1.0 - q * q / 6.0), L * q / 2.0, q)
    return PlanarPose(L * math.sin(q) / q, L * (1.0 - math.cos(q)) / q, q)


def com_position(params: SegmentParams, q: float) -> tuple[float, float]:
    """Centre of mass of the uniform arc."""
    L = params.length
    if abs(q) < COM_SERIES_BELOW:
        q2 = q * q
        x = 0.5 - q2 / 24.0 + q2 * q2 / 720.0 - q2**3 / 40320.0
        y = q / 6.0 - q * q2 / 120.0 + q * q2 * q2 / 5040.0
        return L * x, L * y
    half_sin = math.sin(0.5 * q)
    one_minus_cos = 2.0 * half_sin * half_sin
    return L * one_minus_cos / (q * q), L * (q - math.sin(q)) / (q * q)


def _com_derivatives(q):
    """First and second derivatives of the unit-length CoM, closed form."""
    s, c = math.sin(q), math.cos(q)
    omc = 2.0 * math.sin(0.5 * q) ** 2
    q2, q3, q4 = q * q, q**3, q**4
    dx = s / q2 - 2.0 * omc / q3
    dy = omc / q2 - 2.0 * (q - s) / q3
    ddx = (q2 * c - 4.0 * q * s + 6.0 * omc) / q4
    ddy = (q2 * s + 4.0 * q * c + 2.0 * q - 6.0 * s) / q4
    return dx, dy, ddx, ddy


def shape_fn(q: float) -> tuple[float, float]:
    """Dimensionless inertia shape a(q) and its derivative a'(q)."""
    if abs(q) < SHAPE_SERIES_BELOW:
        q2 = q * q
        a = 0.0
        da = 0.0
        # Horner over q^2; d/dq sum c_k q^(2k) = sum 2k c_k q^(2k-1)
        for k in range(len(_A_SERIES) - 1, -1, -1):
            a = a * q2 + _A_SERIES[k]
        for k in range(len(_A_SERIES) - 1, 0, -1):
            da = da * q2 + 2 * k * _A_SERIES[k]
        return a, da * q
    dx, dy, ddx, ddy = _com_derivatives(q)
    return dx * dx + dy * dy, 2.0 * (dx * ddx + dy * ddy)


def dynamics_terms(params: SegmentParams, state: RobotState):
    """Return (M, C, K q, D qdot) at ``state``.

    ``C`` is the scalar Coriolis coefficient, so the Coriolis torque is
    ``C * q_dot``.
    """
    a, da = shape_fn(state.q)
    mL2 = params.mass * params.length**2
    M = mL2 * a
    C = 0.5 * mL2 * da * state.q_dot
    return M, C, params.stiffness * state.q, params.damping * state.q_dot


def accel(params: SegmentParams, state: RobotState, tau: float) -> float:
    M, C, Kq, Dqd = dynamics_terms(params, state)
    return (tau - C * state.q_dot - Dqd - Kq) / M


def energy(params: SegmentParams, state: RobotState) -> float:
    """Kinetic plus elastic energy."""
    a, _ = shape_fn(state.q)
    M = params.mass * params.length**2 * a
    return 0.5 * M * state.q_dot**2 + 0.5 * params.stiffness * state.q**2


def substeps_for(params: SegmentParams, q: float, h: float) -> int:
    """Number of RK4 substeps needed to integrate one step of length ``h``.

    Overdamped (real) modes only need stability, |lambda| h_sub <= 2.
    Oscillatory modes are resolved to 0.01 rad of phase per substep so the
    undamped segment conserves energy to ~1e-9 over thousands of periods.
    """
    a, _ = shape_fn(q)
    # a(q) shrinks with |q|; margin covers motion within one step
    M = 0.9 * params.mass * params.length**2 * a
    K, D = params.stiffness, params.damping
    disc = D * D - 4.0 * M * K
    if disc >= 0.0:
        fast = (D + math.sqrt(disc)) / (2.0 * M)
        n = h * fast / 2.0
    else:
        n = max(h * D / (2.0 * M) / 2.0, h * math.sqrt(-disc) / (2.0 * M) / 0.01)
    return max(1, math.ceil(n))


def _rk4(mL2, K, D, q, qd, tau, dt, n):
    # scalar inner loop, kept free of object allocation
    def f(q, qd):
        if abs(q) < SHAPE_SERIES_BELOW:
            a, da = shape_fn(q)
        else:
            dx, dy, ddx, ddy = _com_derivatives(q)
            a, da = dx * dx + dy * dy, 2.0 * (dx * ddx + dy * ddy)
        M = mL2 * a
        return (tau - 0.5 * mL2 * da * qd * qd - D * qd - K * q) / M

    half = 0.5 * dt
    for _ in range(n):
        k1q, k1v = qd, f(q, qd)
        k2q, k2v = qd + half * k1v, f(q + half * k1q, qd + half * k1v)
        k3q, k3v = qd + half * k2v, f(q + half * k2q, qd + half * k2v)
        k4q, k4v = qd + dt * k3v, f(q + dt * k3q, qd + dt * k3v)
        q = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        qd = qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q, qd


def step(
    params: SegmentParams,
    state: RobotState,
    tau: float,
    h: float = DEFAULT_STEP,
    substeps: int | None = None,
) -> RobotState:
    """Advance ``state`` by ``h`` seconds with ``tau`` held constant.

    Classical RK4, split into ``substeps`` equal substeps (chosen by
    :func:`substeps_for` when None). The result is saturated at the
    workspace limit |q| < pi.
    """
    if not 0.0 < h <= 0.01:
        raise ValueError(f"step size must be in (0, 0.01], got {h}")
    if state.q == 0.0 and state.q_dot == 0.0 and tau == 0.0:
        return state
    if not all(math.isfinite(v) for v in (state.q, state.q_dot, tau)):
        raise NonFiniteState(f"non-finite input: q={state.q}, q_dot={state.q_dot}, tau={tau}")
    n = substeps if substeps is not None else substeps_for(params, state.q, h)
    try:
        q, qd = _rk4(
            params.mass * params.length**2,
            params.stiffness,
            params.damping,
            state.q,
            state.q_dot,
            tau,
            h / n,
            n,
        )
    except (OverflowError, ValueError) as exc:
        # math.sin/cos reject inf once an intermediate stage blows up
        raise NonFiniteState(f"integration blew up: {exc}") from exc
    if not (math.isfinite(q) and math.isfinite(qd)):
        raise NonFiniteState(f"non-finite state after step: q={q}, q_dot={qd}")
    if abs(q) >= WORKSPACE_LIMIT:
        limit = math.copysign(math.nextafter(WORKSPACE_LIMIT, 0.0), q)
        # warn on entry only; a pinned segment would otherwise log every step
        level = logging.DEBUG if is_saturated(state) else logging.WARNING
        logger.log(level, "curvature %.4f rad hit the workspace limit, saturating", q)
        q = limit
        if qd * q > 0:
            qd = 0.0
    return RobotState(q, qd)


def is_saturated(state: RobotState) -> bool:
    return abs(state.q) >= math.nextafter(WORKSPACE_LIMIT, 0.0)

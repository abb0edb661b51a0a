"""Two-compartment pneumatic actuator and its torque-to-PWM calibration.

The simulated plant maps a PWM duty (0-255) on one compartment to a signed
torque. Calibration treats that plant as a black box: drive one compartment
with a duty step, wait for the curvature to settle, convert the settled
curvature to torque with a *nominal* stiffness of 1 N m/rad, and fit a cubic
duty(torque) per compartment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import DEFAULT_STEP, RobotState, SegmentParams, step

logger = logging.getLogger(__name__)

PWM_MAX = 255.0
MIN_GRID_POINTS = 8
MAX_CONDITION = 1e12


class BothCompartmentsActive(ValueError):
    pass


class CalibrationError(ValueError):
    pass


class FitIllConditioned(CalibrationError):
    pass


@dataclass(frozen=True)
class PlantActuator:
    """Ground-truth duty-to-torque behaviour of both compartments.

    g(u) = gain_lin * (u/255) + gain_quad * (u/255)^2, in N m.
    """

    gain_lin_A: float = 0.9
    gain_quad_A: float = 0.3
    gain_lin_B: float = 0.85
    gain_quad_B: float = 0.25
    max_torque: float = 1.5


@dataclass
class CompartmentMap:
    """Cubic duty(|tau|) for one compartment.

    ``coeffs`` are ascending: duty = c0 + c1 t + c2 t^2 + c3 t^3 with
    t = |tau| in N m. ``tau_max`` is the largest calibrated torque.
    """

    compartment: str
    coeffs: tuple[float, float, float, float]
    tau_max: float = 0.0
    residual_rms: float = 0.0
    duty_grid: list[float] = field(default_factory=list)
    theta_ss: list[float] = field(default_factory=list)
    pwm_range: tuple[float, float] = (0.0, PWM_MAX)

    def duty(self, tau_mag: float) -> float:
        c0, c1, c2, c3 = self.coeffs
        u = c0 + tau_mag * (c1 + tau_mag * (c2 + tau_mag * c3))
        lo, hi = self.pwm_range
        return min(max(u, lo), hi)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coeffs"] = list(self.coeffs)
        d["pwm_range"] = list(self.pwm_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CompartmentMap":
        d = dict(d)
        d["coeffs"] = tuple(d["coeffs"])
        d["pwm_range"] = tuple(d.get("pwm_range", (0.0, PWM_MAX)))
        return cls(**d)


def plant_torque(act: PlantActuator, duty_A: float, duty_B: float) -> float:
    if duty_A > 0 and duty_B > 0:
        raise BothCompartmentsActive(f"duty_A={duty_A} and duty_B={duty_B} both nonzero")
    for u in (duty_A, duty_B):
        if not 0.0 <= u <= PWM_MAX:
            raise ValueError(f"duty {u} outside [0, {PWM_MAX}]")
    uA, uB = duty_A / PWM_MAX, duty_B / PWM_MAX
    tau = (act.gain_lin_A * uA + act.gain_quad_A * uA * uA) - (
        act.gain_lin_B * uB + act.gain_quad_B * uB * uB
    )
    return min(max(tau, -act.max_torque), act.max_torque)


def settle(
    params: SegmentParams,
    tau: float,
    h: float = DEFAULT_STEP,
    tol: float = 1e-5,
    hold: float = 0.5,
    max_time: float = 60.0,
) -> float:
    """Steady-state curvature after a torque step from rest.

    Runs until |q_dot| < ``tol`` has held for ``hold`` seconds.
    """
    state = RobotState()
    quiet = 0.0
    t = 0.0
    while t < max_time:
        state = step(params, state, tau, h)
        t += h
        quiet = quiet + h if abs(state.q_dot) < tol else 0.0
        if quiet >= hold:
            return state.q
    raise CalibrationError(f"no steady state within {max_time} s for tau={tau}")


def fit_cubic(tau: np.ndarray, duty: np.ndarray):
    """Least-squares duty = c0 + c1 tau + c2 tau^2 + c3 tau^3.

    Returns (coeffs, residual_rms). Raises FitIllConditioned when the normal
    equations' condition number exceeds 1e12.
    """
    V = np.vander(np.asarray(tau, dtype=float), 4, increasing=True)
    cond = np.linalg.cond(V.T @ V)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FitIllConditioned(f"normal equations condition number {cond:.3g}")
    coeffs, *_ = np.linalg.lstsq(V, duty, rcond=None)
    resid = duty - V @ coeffs
    return tuple(float(c) for c in coeffs), float(np.sqrt(np.mean(resid**2)))


def calibrate(
    act: PlantActuator,
    params: SegmentParams,
    duty_grid=None,
    k_nominal: float = 1.0,
    h: float = DEFAULT_STEP,
    settle_tol: float = 1e-5,
    settle_hold: float = 0.5,
):
    """Identify the torque-to-duty map of both compartments.

    Each duty in ``duty_grid`` is applied to one compartment at a time; the
    settled curvature is converted to torque as ``k_nominal * theta`` (the
    true stiffness of ``params`` is deliberately not used).
    """
    if duty_grid is None:
        duty_grid = np.linspace(0.0, PWM_MAX, 18)
    grid = np.unique(np.asarray(duty_grid, dtype=float))
    if grid.size < MIN_GRID_POINTS:
        raise CalibrationError(
            f"duty grid needs at least {MIN_GRID_POINTS} distinct values, got {grid.size}"
        )
    if grid[0] < 0 or grid[-1] > PWM_MAX:
        raise CalibrationError("duty grid outside the PWM range")

    maps = []
    for comp in ("A", "B"):
        theta = []
        for u in grid:
            tau = plant_torque(act, u, 0.0) if comp == "A" else plant_torque(act, 0.0, u)
            theta.append(settle(params, tau, h, settle_tol, settle_hold))
        theta = np.array(theta)
        tau_mag = k_nominal * np.abs(theta)
        coeffs, rms = fit_cubic(tau_mag, grid)
        cmap = CompartmentMap(
            compartment=comp,
            coeffs=coeffs,
            tau_max=float(tau_mag.max()),
            residual_rms=rms,
            duty_grid=grid.tolist(),
            theta_ss=theta.tolist(),
        )
        if not is_monotone(cmap):
            logger.warning("compartment %s map is not monotone on its calibrated range", comp)
        maps.append(cmap)
    return maps[0], maps[1]


def is_monotone(cmap: CompartmentMap, n: int = 200) -> bool:
    c0, c1, c2, c3 = cmap.coeffs
    t = np.linspace(0.0, cmap.tau_max, n)
    return bool(np.all(c1 + 2 * c2 * t + 3 * c3 * t * t >= 0.0))


def torque_to_duty(maps, tau: float) -> tuple[float, float]:
    """Route a signed torque to exactly one compartment's duty."""
    map_A, map_B = maps
    if tau > 0:
        return map_A.duty(tau), 0.0
    if tau < 0:
        return 0.0, map_B.duty(-tau)
    return 0.0, 0.0


def save_calibration(maps, path) -> None:
    with open(path, "w") as fh:
        json.dump([m.to_dict() for m in maps], fh, indent=2)


def load_calibration(path):
    with open(path) as fh:
        data = json.load(fh)
    by_comp = {d["compartment"]: CompartmentMap.from_dict(d) for d in data}
    return by_comp["A"], by_comp["B"]


def torque_interval(cmap: CompartmentMap, lo: float = 0.1, hi: float = 0.9):
    """Interior of the calibrated torque range, as fractions of tau_max."""
    return lo * cmap.tau_max, hi * cmap.tau_max


__all__ = [
    "BothCompartmentsActive",
    "CalibrationError",
    "CompartmentMap",
    "FitIllConditioned",
    "PlantActuator",
    "calibrate",
    "fit_cubic",
    "is_monotone",
    "load_calibration",
    "plant_torque",
    "save_calibration",
    "settle",
    "torque_interval",
    "torque_to_duty",
]

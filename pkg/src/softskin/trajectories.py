"""Target curvature trajectories with analytic derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

PI = math.pi


@dataclass(frozen=True)
class TrajectorySpec:
    """q_d(t) and its first two derivatives, in radians.

    ``kind`` is one of uni_low, uni_high, bi_low, bi_high or custom. Custom
    trajectories pass ``fn`` returning (q_d, q_d_dot, q_d_ddot).
    """

    kind: str
    fn: Callable[[float], tuple[float, float, float]] | None = None

    def __post_init__(self):
        if self.kind != "custom" and self.kind not in BUILTIN:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom trajectory needs fn")

    def __call__(self, t: float) -> tuple[float, float, float]:
        if self.kind == "custom":
            return self.fn(t)
        return BUILTIN[self.kind](t)

    @property
    def mode(self) -> str:
        return "bi" if self.kind.startswith("bi") else "uni"


def _offset_cosine(w):
    # pi/8 - (pi/9) cos(w t)
    def f(t):
        c, s = math.cos(w * t), math.sin(w * t)
        return PI / 8 - PI / 9 * c, PI / 9 * w * s, PI / 9 * w * w * c

    return f


def _sine(w):
    # (pi/6) sin(w t)
    def f(t):
        c, s = math.cos(w * t), math.sin(w * t)
        return PI / 6 * s, PI / 6 * w * c, -PI / 6 * w * w * s

    return f


BUILTIN = {
    "uni_low": _offset_cosine(PI / 12),
    "uni_high": _offset_cosine(PI / 3),
    "bi_low": _sine(PI / 6),
    "bi_high": _sine(PI / 4),
}

ALL_KINDS = tuple(BUILTIN)

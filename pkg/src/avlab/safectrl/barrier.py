"""Time-headway barrier for the ACC plant and its induced safe control set.

The barrier is h = D - tau_h * v. Enforcing hdot + alpha h >= 0 under
vdot = u, Ddot = v0 - v gives the affine condition
    (v0 - v) - tau_h u + alpha (D - tau_h v) >= 0,
i.e. u <= ((v0 - v) + alpha h) / tau_h, intersected with |u| <= u_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim2d.vehicle import AccState
from .polytope import Polytope


class InfeasibleBarrierError(RuntimeError):
    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True)
class BarrierParams:
    tau_h: float = 1.8   # time headway, s
    alpha: float = 1.0   # class-K gain, 1/s
    u_max: float = 3.0   # actuation bound, m/s^2

    def __post_init__(self):
        if self.tau_h <= 0 or self.alpha <= 0 or self.u_max <= 0:
            raise ValueError("barrier parameters must be positive")


def barrier_value(state: AccState, p: BarrierParams) -> float:
    return state.d - p.tau_h * state.v


def safe_control_set(state: AccState, p: BarrierParams) -> Polytope:
    """1-D polytope of accelerations satisfying the barrier condition."""
    h = barrier_value(state, p)
    ub_cbf = ((state.v0 - state.v) + p.alpha * h) / p.tau_h
    upper = min(ub_cbf, p.u_max)
    if upper < -p.u_max:
        raise InfeasibleBarrierError(
            f"safe set empty: barrier bound {ub_cbf:.3f} below -u_max", upper + p.u_max
        )
    a = np.array([[1.0], [1.0], [-1.0]])
    b = np.array([ub_cbf, p.u_max, p.u_max])
    return Polytope(a, b)

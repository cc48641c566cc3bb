"""Vehicle plants: kinematic bicycle and the longitudinal ACC model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, wrap_angle


@dataclass(frozen=True)
class VehicleState:
    pose: Pose2D
    speed: float
    wheelbase: float = 0.3

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be > 0")


def step_vehicle(state: VehicleState, accel: float, steer: float, dt: float) -> VehicleState:
    """Forward-Euler kinematic bicycle step; heading renormalized."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = state.speed
    p = state.pose
    x = p.x + v * math.cos(p.theta) * dt
    y = p.y + v * math.sin(p.theta) * dt
    theta = wrap_angle(p.theta + v / state.wheelbase * math.tan(steer) * dt)
    return VehicleState(Pose2D(x, y, theta), v + accel * dt, state.wheelbase)


@dataclass(frozen=True)
class AccState:
    """Ego speed v, constant lead speed v0, and bumper gap D."""

    v: float
    v0: float
    d: float


def step_acc(state: AccState, u: float, dt: float) -> AccState:
    """Advance the longitudinal plant vdot = u, Ddot = v0 - v by one step.

    The ego speed trace within the step is integrated exactly (v is linear
    in time under constant u, clamped at zero), so the gap identity
    D(t) = D(0) + integral(v0 - v) holds to machine precision for
    piecewise-constant inputs. D <= 0 signals a collision; the plant keeps
    integrating and leaves flagging to the caller.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = state.v
    v_new = v + u * dt
    if v_new >= 0.0:
        ego_travel = v * dt + 0.5 * u * dt * dt
    else:
        # ego stops partway through the step and stays stopped
        t_stop = v / (-u)
        ego_travel = v * t_stop + 0.5 * u * t_stop * t_stop
        v_new = 0.0
    d_new = state.d + state.v0 * dt - ego_travel
    return AccState(v_new, state.v0, d_new)

"""Planar pose type shared across the workbench."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> "Pose2D":
        return cls(float(a[0]), float(a[1]), float(a[2]))


def circular_mean(angles: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Weighted circular mean via atan2 of averaged sin/cos."""
    angles = np.asarray(angles, dtype=np.float64)
    if weights is None:
        s, c = np.sin(angles).mean(), np.cos(angles).mean()
    else:
        w = np.asarray(weights, dtype=np.float64)
        s, c = np.sum(w * np.sin(angles)), np.sum(w * np.cos(angles))
    return math.atan2(s, c)

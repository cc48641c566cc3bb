"""2D LiDAR simulation by DDA grid traversal, vectorized over beams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D
from .grid import OccupancyGrid


class RaycastError(ValueError):
    pass


@dataclass(frozen=True)
class LidarSpec:
    beams: int = 108
    fov: float = 1.5 * math.pi  # 270 degrees
    max_range: float = 10.0
    noise_std: float = 0.01

    def __post_init__(self):
        if self.beams < 2:
            raise ValueError("beam count must be >= 2")
        if self.max_range <= 0:
            raise ValueError("max range must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise stddev must be >= 0")


@dataclass
class Scan:
    ranges: np.ndarray
    spec: LidarSpec

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=np.float64)
        if self.ranges.shape != (self.spec.beams,):
            raise ValueError(f"expected {self.spec.beams} ranges, got {self.ranges.shape}")


def beam_angles(spec: LidarSpec, heading: float = 0.0) -> np.ndarray:
    """World-frame beam angles, evenly spaced over the FOV, endpoints included."""
    return heading + np.linspace(-spec.fov / 2.0, spec.fov / 2.0, spec.beams)


def cast_rays(grid: OccupancyGrid, x: float, y: float, angles: np.ndarray,
              max_range: float) -> np.ndarray:
    """Noiseless distance to the first occupied cell along each angle.

    DDA traversal; distances are to the entry face of the hit cell, capped
    at max_range when nothing is hit within range.
    """
    n = len(angles)
    res = grid.resolution
    dx = np.cos(angles)
    dy = np.sin(angles)
    col0, row0 = grid.world_to_cell(x, y)
    if not grid.in_bounds(col0, row0) or grid.cells[row0, col0]:
        raise RaycastError(f"ray origin ({x:.3f}, {y:.3f}) is not in free space")

    cols = np.full(n, col0, dtype=np.int64)
    rows = np.full(n, row0, dtype=np.int64)
    step_x = np.where(dx > 0, 1, -1).astype(np.int64)
    step_y = np.where(dy > 0, 1, -1).astype(np.int64)
    with np.errstate(divide="ignore"):
        inv_dx = np.where(np.abs(dx) > 1e-300, 1.0 / dx, np.inf)
        inv_dy = np.where(np.abs(dy) > 1e-300, 1.0 / dy, np.inf)
    # parametric distance to the next vertical / horizontal cell boundary
    next_vx = grid.origin.x + (cols + (step_x > 0)) * res
    next_hy = grid.origin.y + (rows + (step_y > 0)) * res
    t_max_x = np.abs((next_vx - x) * inv_dx)
    t_max_y = np.abs((next_hy - y) * inv_dy)
    t_delta_x = np.abs(res * inv_dx)
    t_delta_y = np.abs(res * inv_dy)

    out = np.full(n, max_range, dtype=np.float64)
    active = np.ones(n, dtype=bool)
    while active.any():
        take_x = active & (t_max_x <= t_max_y)
        take_y = active & ~take_x
        t_here = np.where(take_x, t_max_x, t_max_y)
        cols[take_x] += step_x[take_x]
        rows[take_y] += step_y[take_y]
        t_max_x[take_x] += t_delta_x[take_x]
        t_max_y[take_y] += t_delta_y[take_y]
        beyond = active & (t_here > max_range)
        active &= ~beyond  # capped at max_range (already initialized)
        inb = active.copy()
        inb[active] = (
            (cols[active] >= 0) & (cols[active] < grid.width)
            & (rows[active] >= 0) & (rows[active] < grid.height)
        )
        escaped = active & ~inb
        active &= ~escaped
        hit = active.copy()
        hit[active] = grid.cells[rows[active], cols[active]]
        out[hit] = t_here[hit]
        active &= ~hit
    return out


def raycast(grid: OccupancyGrid, pose: Pose2D, spec: LidarSpec,
            rng: np.random.Generator | int | None = None) -> Scan:
    """Simulate one scan from pose; Gaussian range noise if spec.noise_std > 0."""
    angles = beam_angles(spec, pose.theta)
    ranges = cast_rays(grid, pose.x, pose.y, angles, spec.max_range)
    if spec.noise_std > 0:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        ranges = ranges + rng.normal(0.0, spec.noise_std, size=spec.beams)
    ranges = np.clip(ranges, 1e-9, spec.max_range)
    return Scan(ranges, spec)


def scan_endpoints(pose: Pose2D, scan: Scan) -> np.ndarray:
    """World-frame beam endpoints of a scan taken at pose, shape (beams, 2)."""
    angles = beam_angles(scan.spec, pose.theta)
    xs = pose.x + scan.ranges * np.cos(angles)
    ys = pose.y + scan.ranges * np.sin(angles)
    return np.column_stack([xs, ys])

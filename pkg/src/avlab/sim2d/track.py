"""Closed race tracks: centerline polylines with per-point width.

Track file format (version 1):
    avlab-track 1
    points <n>
    <n lines of "x y width">
Points trace the closed centerline counter-clockwise; the last point
connects back to the first. Width is the full corridor width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D
from .grid import OccupancyGrid


class TrackError(ValueError):
    pass


@dataclass
class Track:
    centerline: np.ndarray  # (n, 2)
    widths: np.ndarray      # (n,)

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=np.float64)
        self.widths = np.asarray(self.widths, dtype=np.float64)
        if self.centerline.ndim != 2 or self.centerline.shape[1] != 2:
            raise TrackError("centerline must have shape (n, 2)")
        if len(self.widths) != len(self.centerline):
            raise TrackError("widths must match centerline length")
        if (self.widths <= 0).any():
            raise TrackError("widths must be positive")
        seg = np.roll(self.centerline, -1, axis=0) - self.centerline
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if (self._seg_len <= 0).any():
            raise TrackError("degenerate centerline segment")
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._seg_dir = seg / self._seg_len[:, None]

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def _locate(self, s: float) -> tuple[int, float]:
        s = float(s) % self.length
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        return i, s - self._cum[i]

    def point_at(self, s: float) -> np.ndarray:
        i, ds = self._locate(s)
        return self.centerline[i] + self._seg_dir[i] * ds

    def heading_at(self, s: float) -> float:
        i, _ = self._locate(s)
        d = self._seg_dir[i]
        return math.atan2(d[1], d[0])

    def normal_at(self, s: float) -> np.ndarray:
        """Left-hand unit normal of the travel direction."""
        i, _ = self._locate(s)
        d = self._seg_dir[i]
        return np.array([-d[1], d[0]])

    def width_at(self, s: float) -> float:
        i, ds = self._locate(s)
        j = (i + 1) % len(self.widths)
        frac = ds / self._seg_len[i]
        return float((1 - frac) * self.widths[i] + frac * self.widths[j])

    def curvature_at(self, s: float, lookahead: float = 1.0) -> float:
        """Mean absolute heading rate over [s, s+lookahead], in rad/m."""
        h0 = self.heading_at(s)
        h1 = self.heading_at(s + lookahead)
        dh = math.atan2(math.sin(h1 - h0), math.cos(h1 - h0))
        return abs(dh) / lookahead

    def project(self, point) -> tuple[float, float]:
        """(arc length, signed lateral offset) of the closest centerline point.

        Positive offset is to the left of the travel direction.
        """
        p = np.asarray(point, dtype=np.float64)
        rel = p[None, :] - self.centerline
        t = np.clip(np.einsum("ij,ij->i", rel, self._seg_dir), 0.0, self._seg_len)
        foot = self.centerline + self._seg_dir * t[:, None]
        d2 = np.sum((p[None, :] - foot) ** 2, axis=1)
        i = int(np.argmin(d2))
        s = float(self._cum[i] + t[i])
        n = np.array([-self._seg_dir[i, 1], self._seg_dir[i, 0]])
        lateral = float(np.dot(p - foot[i], n))
        return s, lateral

    def start_pose(self, s: float, lateral: float = 0.0) -> Pose2D:
        p = self.point_at(s) + self.normal_at(s) * lateral
        return Pose2D(float(p[0]), float(p[1]), self.heading_at(s))


def save_track(track: Track, path: str) -> None:
    with open(path, "w") as f:
        f.write("avlab-track 1\n")
        f.write(f"points {len(track.centerline)}\n")
        for (x, y), w in zip(track.centerline, track.widths):
            f.write(f"{float(x)!r} {float(y)!r} {float(w)!r}\n")


def load_track(path: str) -> Track:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0].split() != ["avlab-track", "1"]:
        raise TrackError(f"{path}: not an avlab-track version 1 file")
    head = lines[1].split()
    if head[0] != "points":
        raise TrackError(f"{path}: expected 'points <n>' on line 2")
    n = int(head[1])
    pts, widths = [], []
    for ln in lines[2 : 2 + n]:
        x, y, w = (float(v) for v in ln.split())
        pts.append((x, y))
        widths.append(w)
    return Track(np.array(pts), np.array(widths))


def make_oval_track(straight: float = 8.0, radius: float = 2.5, width: float = 3.0,
                    points_per_meter: float = 4.0) -> Track:
    """Stadium-shaped closed track centred at the origin, CCW travel."""
    segs = []
    # bottom straight, left to right, at y = -radius
    n1 = max(2, int(straight * points_per_meter))
    xs = np.linspace(-straight / 2, straight / 2, n1, endpoint=False)
    segs.append(np.column_stack([xs, np.full(n1, -radius)]))
    # right semicircle
    n2 = max(4, int(math.pi * radius * points_per_meter))
    ang = np.linspace(-math.pi / 2, math.pi / 2, n2, endpoint=False)
    segs.append(np.column_stack([straight / 2 + radius * np.cos(ang), radius * np.sin(ang)]))
    # top straight, right to left
    xs = np.linspace(straight / 2, -straight / 2, n1, endpoint=False)
    segs.append(np.column_stack([xs, np.full(n1, radius)]))
    # left semicircle
    ang = np.linspace(math.pi / 2, 3 * math.pi / 2, n2, endpoint=False)
    segs.append(np.column_stack([-straight / 2 + radius * np.cos(ang), radius * np.sin(ang)]))
    center = np.vstack(segs)
    return Track(center, np.full(len(center), width))


def grid_from_track(track: Track, resolution: float = 0.05, pad: float = 0.5) -> OccupancyGrid:
    """Rasterize the corridor: cells farther than width/2 from the
    centerline are occupied. Used as the LiDAR world for race-style maps."""
    lo = track.centerline.min(axis=0) - track.widths.max() / 2 - pad
    hi = track.centerline.max(axis=0) + track.widths.max() / 2 + pad
    w = int(math.ceil((hi[0] - lo[0]) / resolution)) + 2
    h = int(math.ceil((hi[1] - lo[1]) / resolution)) + 2
    xs = lo[0] + (np.arange(w) + 0.5) * resolution
    ys = lo[1] + (np.arange(h) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    centers = np.column_stack([gx.ravel(), gy.ravel()])

    a = track.centerline
    d = np.roll(a, -1, axis=0) - a
    seg_len2 = np.sum(d * d, axis=1)
    occupied = np.ones(len(centers), dtype=bool)
    half_w = track.widths / 2.0
    # distance from every cell center to every segment, chunked to bound memory
    chunk = 8192
    for s0 in range(0, len(centers), chunk):
        pts = centers[s0 : s0 + chunk]
        rel = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", rel, d) / seg_len2[None, :], 0.0, 1.0)
        foot = a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.sqrt(np.sum((pts[:, None, :] - foot) ** 2, axis=2))
        # corridor half-width interpolated per segment start
        inside = (dist <= half_w[None, :]).any(axis=1)
        occupied[s0 : s0 + chunk] = ~inside
    cells = occupied.reshape(h, w)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(resolution, Pose2D(float(lo[0]), float(lo[1]), 0.0), cells)


@dataclass(frozen=True)
class BehaviorGains:
    """Pure-pursuit follower gains; produced from objective-space points."""

    target_speed: float        # straight-line speed target, m/s
    corner_caution: float      # >0; larger slows more in curves
    follow_gap: float          # m; desired gap before overtaking starts
    lateral_margin: float      # m; extra margin kept from track edges
    lookahead_time: float = 0.45  # s; pure-pursuit lookahead = max(t*v, min)
    min_lookahead: float = 0.6

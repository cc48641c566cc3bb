"""Occupancy grids: storage, plain-text file format, builders, pose sampling.

Map file format (version 1), one item per line:
    avlab-gridmap 1
    width <cells>
    height <cells>
    resolution <meters-per-cell>
    origin <x> <y> <theta>
    <height rows of width 0/1 characters, row 0 = smallest y>
Cell (col, row) covers [origin.x + col*res, origin.x + (col+1)*res) x
[origin.y + row*res, ...). '1' marks occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D


class MapError(ValueError):
    pass


@dataclass
class OccupancyGrid:
    resolution: float
    origin: Pose2D
    cells: np.ndarray  # bool, shape (height, width); cells[row, col]

    def __post_init__(self):
        if self.resolution <= 0:
            raise MapError("resolution must be > 0")
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.cells.ndim != 2:
            raise MapError("cells must be a 2-D array")
        border = np.concatenate(
            [self.cells[0, :], self.cells[-1, :], self.cells[:, 0], self.cells[:, -1]]
        )
        if not border.all():
            raise MapError("border cells must be occupied (closed world)")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def extent_x(self) -> tuple[float, float]:
        return self.origin.x, self.origin.x + self.width * self.resolution

    @property
    def extent_y(self) -> tuple[float, float]:
        return self.origin.y, self.origin.y + self.height * self.resolution

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(math.floor((x - self.origin.x) / self.resolution))
        row = int(math.floor((y - self.origin.y) / self.resolution))
        return col, row

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def is_free(self, x: float, y: float) -> bool:
        col, row = self.world_to_cell(x, y)
        return self.in_bounds(col, row) and not self.cells[row, col]

    def occupied_points(self) -> np.ndarray:
        """Cell-center coordinates of occupied cells, shape (n, 2)."""
        rows, cols = np.nonzero(self.cells)
        xs = self.origin.x + (cols + 0.5) * self.resolution
        ys = self.origin.y + (rows + 0.5) * self.resolution
        return np.column_stack([xs, ys])


def save_grid(grid: OccupancyGrid, path: str) -> None:
    with open(path, "w") as f:
        f.write("avlab-gridmap 1\n")
        f.write(f"width {grid.width}\n")
        f.write(f"height {grid.height}\n")
        f.write(f"resolution {grid.resolution!r}\n")
        f.write(f"origin {grid.origin.x!r} {grid.origin.y!r} {grid.origin.theta!r}\n")
        for row in grid.cells:
            f.write("".join("1" if c else "0" for c in row) + "\n")


def load_grid(path: str) -> OccupancyGrid:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0].split() != ["avlab-gridmap", "1"]:
        raise MapError(f"{path}: not an avlab-gridmap version 1 file")
    header = {}
    idx = 1
    for key in ("width", "height", "resolution", "origin"):
        parts = lines[idx].split()
        if parts[0] != key:
            raise MapError(f"{path}: expected '{key}' on line {idx + 1}")
        header[key] = parts[1:]
        idx += 1
    width, height = int(header["width"][0]), int(header["height"][0])
    resolution = float(header["resolution"][0])
    ox, oy, oth = (float(v) for v in header["origin"])
    rows = []
    for r in range(height):
        line = lines[idx + r]
        if len(line) != width:
            raise MapError(f"{path}: row {r} has {len(line)} cells, expected {width}")
        rows.append([c == "1" for c in line])
    return OccupancyGrid(resolution, Pose2D(ox, oy, oth), np.array(rows, dtype=bool))


def make_room(size_x: float, size_y: float, resolution: float = 0.05) -> OccupancyGrid:
    """Closed rectangular room with free interior; walls one cell thick."""
    w = int(round(size_x / resolution)) + 2
    h = int(round(size_y / resolution)) + 2
    cells = np.zeros((h, w), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(resolution, Pose2D(-resolution, -resolution, 0.0), cells)


def make_corridor(length: float, width: float, resolution: float = 0.05) -> OccupancyGrid:
    """Long featureless corridor along +x."""
    return make_room(length, width, resolution)


def make_notched_room(size_x: float, size_y: float, notch: float = 0.6,
                      resolution: float = 0.05) -> OccupancyGrid:
    """Rectangular room with one small square bump on the east wall.

    Nearly 180-degree symmetric: scans far from the notch look identical
    under rotation by pi about the room center.
    """
    grid = make_room(size_x, size_y, resolution)
    cells = grid.cells.copy()
    n = max(1, int(round(notch / resolution)))
    # bump protruding into the room near the north end of the east wall
    row0 = int(cells.shape[0] * 0.72)
    cells[row0 : row0 + n, -1 - n : -1] = True
    return OccupancyGrid(grid.resolution, grid.origin, cells)


def sample_free_poses(grid: OccupancyGrid, n: int, seed: int) -> list[Pose2D]:
    """n poses uniform over free space x (-pi, pi], by rejection sampling."""
    if n == 0:
        return []
    if not (~grid.cells).any():
        raise MapError("grid has no free cells")
    rng = np.random.default_rng(seed)
    x0, x1 = grid.extent_x
    y0, y1 = grid.extent_y
    poses: list[Pose2D] = []
    while len(poses) < n:
        want = n - len(poses)
        # batch rejection; free fraction is bounded below by 1/ncells
        xs = rng.uniform(x0, x1, size=2 * want + 16)
        ys = rng.uniform(y0, y1, size=2 * want + 16)
        ths = rng.uniform(-math.pi, math.pi, size=2 * want + 16)
        cols = np.floor((xs - grid.origin.x) / grid.resolution).astype(int)
        rows = np.floor((ys - grid.origin.y) / grid.resolution).astype(int)
        inb = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
        free = np.zeros_like(inb)
        free[inb] = ~grid.cells[rows[inb], cols[inb]]
        for x, y, t in zip(xs[free], ys[free], ths[free]):
            poses.append(Pose2D(float(x), float(y), float(t)))
            if len(poses) == n:
                break
    return poses

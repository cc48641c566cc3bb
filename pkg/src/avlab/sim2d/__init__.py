"""Deterministic 2D world: grids, LiDAR, vehicle plants, and race rollouts."""

from .geometry import Pose2D, wrap_angle
from .grid import OccupancyGrid, load_grid, save_grid, make_room, make_corridor, make_notched_room, sample_free_poses
from .lidar import LidarSpec, Scan, raycast, beam_angles, scan_endpoints
from .vehicle import VehicleState, step_vehicle, AccState, step_acc
from .track import Track, load_track, save_track, make_oval_track, grid_from_track, BehaviorGains
from .race import RaceOutcome, rollout_race, min_ttc

__all__ = [
    "Pose2D", "wrap_angle",
    "OccupancyGrid", "load_grid", "save_grid", "make_room", "make_corridor",
    "make_notched_room", "sample_free_poses",
    "LidarSpec", "Scan", "raycast", "beam_angles", "scan_endpoints",
    "VehicleState", "step_vehicle", "AccState", "step_acc",
    "Track", "load_track", "save_track", "make_oval_track", "grid_from_track",
    "BehaviorGains",
    "RaceOutcome", "rollout_race", "min_ttc",
]

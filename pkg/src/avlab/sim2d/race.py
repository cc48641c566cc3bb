"""Two-agent race rollouts with pure-pursuit followers.

Speed is genuinely dangerous here: steering authority is limited by a
lateral-grip budget, so a car that enters a corner too fast physically
cannot hold the line and drifts toward the wall. Restraint buys corner
caution, earlier reaction gaps, and wall margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, wrap_angle
from .track import BehaviorGains, Track
from .vehicle import VehicleState, step_vehicle

BODY_RADIUS = 0.15   # m; desk-scale car half-width
GRIP_LIMIT = 6.0     # m/s^2; max lateral acceleration before understeer
ACCEL_LIMIT = 4.0    # m/s^2
SPEED_GAIN = 3.0     # P-gain on speed error
LANE_RATE = 1.2      # m/s lane-offset slew


@dataclass
class RaceOutcome:
    lead: float                # ego minus opponent progress at the end, m
    ttc_env: float             # ego min time-to-collision to walls, s
    ttc_opp: float             # min time-to-collision between the cars, s
    ego_collision: bool
    opp_collision: bool
    result: int                # +1 ego win, -1 ego loss, 0 draw
    ego_progress: np.ndarray   # per-step cumulative progress, m
    opp_progress: np.ndarray
    steps: int

    @property
    def win(self) -> bool:
        return self.result > 0


def min_ttc(surface_gaps: np.ndarray, dt: float, horizon_cap: float = 100.0) -> float:
    """Minimum gap/closing-speed over a series of surface gaps.

    Closing speed is the per-step backward difference; steps where the gap
    is opening contribute nothing.
    """
    gaps = np.asarray(surface_gaps, dtype=np.float64)
    if len(gaps) < 2:
        return horizon_cap
    closing = (gaps[:-1] - gaps[1:]) / dt
    ttc = horizon_cap * np.ones_like(closing)
    pos = closing > 1e-9
    ttc[pos] = np.maximum(gaps[1:][pos], 0.0) / closing[pos]
    return float(min(ttc.min(), horizon_cap))


@dataclass
class _Agent:
    gains: BehaviorGains
    state: VehicleState
    lane: float          # current lateral offset from centerline, m
    s: float             # last projected arc length
    progress: float = 0.0
    collided: bool = False


def _steer_limit(v: float, wheelbase: float) -> float:
    """Steering angle cap from the lateral-grip budget."""
    if v < 0.3:
        return 0.45
    return min(0.45, math.atan(GRIP_LIMIT * wheelbase / (v * v)))


def _drive(agent: _Agent, other: _Agent, track: Track, dt: float) -> VehicleState:
    g = agent.gains
    st = agent.state
    s, lat = track.project([st.pose.x, st.pose.y])
    dp = (s - agent.s) % track.length
    if dp > track.length / 2:
        dp -= track.length
    agent.progress += dp
    agent.s = s
    agent.lane = lat

    width = track.width_at(s)
    half = width / 2.0

    # corner speed target: slow down for upcoming curvature, more so with caution
    curv = track.curvature_at(s, lookahead=max(1.0, st.speed * 0.8))
    v_corner = math.sqrt(GRIP_LIMIT / max(curv, 1e-6)) / (1.0 + 0.55 * g.corner_caution)
    v_target = min(g.target_speed, v_corner)

    # interaction with the other car
    gap_ahead = (other.s - s) % track.length
    surface_gap = gap_ahead - 2 * BODY_RADIUS
    lanes_overlap = abs(other.lane - lat) < 2.2 * BODY_RADIUS
    lane_target = 0.0
    if 0.0 < gap_ahead < g.follow_gap and lanes_overlap:
        # blocked: move to the freer side; restrained cars also back off
        side = 1.0 if other.lane <= 0.0 else -1.0
        lane_target = other.lane + side * 3.0 * BODY_RADIUS
        if surface_gap < 0.6 * g.follow_gap:
            v_target = min(v_target, max(0.0, other.state.speed) * 0.85)

    # keep the wall margin
    reach = half - BODY_RADIUS - g.lateral_margin
    lane_target = float(np.clip(lane_target, -reach, reach))
    lane_next = lat + float(np.clip(lane_target - lat, -LANE_RATE * dt, LANE_RATE * dt))

    # pure pursuit toward a lookahead point on the offset line
    look = max(g.min_lookahead, g.lookahead_time * st.speed)
    target = track.point_at(s + look) + track.normal_at(s + look) * lane_next
    dxy = target - np.array([st.pose.x, st.pose.y])
    dist = float(np.hypot(dxy[0], dxy[1]))
    alpha = wrap_angle(math.atan2(dxy[1], dxy[0]) - st.pose.theta)
    steer = math.atan2(2.0 * st.wheelbase * math.sin(alpha), max(dist, 1e-6))
    cap = _steer_limit(st.speed, st.wheelbase)
    steer = float(np.clip(steer, -cap, cap))

    accel = float(np.clip(SPEED_GAIN * (v_target - st.speed), -ACCEL_LIMIT, ACCEL_LIMIT))
    nxt = step_vehicle(st, accel, steer, dt)
    if nxt.speed < 0.0:
        nxt = VehicleState(nxt.pose, 0.0, nxt.wheelbase)
    return nxt


def rollout_race(
    ego_gains: BehaviorGains,
    opp_gains: BehaviorGains,
    track: Track,
    horizon: int,
    dt: float = 0.02,
    seed: int = 0,
    start_s: float = 0.0,
    start_speed: float = 1.5,
    start_jitter: float = 0.05,
    stagger: float = 1.0,
    opp_ds: float | None = None,
) -> RaceOutcome:
    """Race two followers for `horizon` steps (or until a collision).

    By default the cars start on the centerline, staggered longitudinally
    by `stagger` with the starting order decided by the seed. Passing
    `opp_ds` places the opponent at an explicit arc-length offset instead
    (e.g. half the track length for a rotationally symmetric start).
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = np.random.default_rng(seed)
    jitter = rng.normal(0.0, start_jitter, size=4) if start_jitter > 0 else np.zeros(4)

    def spawn(gains: BehaviorGains, lane: float, ds: float, dv: float) -> _Agent:
        s = (start_s + ds) % track.length
        pose = track.start_pose(s, lane)
        state = VehicleState(pose, max(0.2, start_speed + dv), 0.3)
        return _Agent(gains=gains, state=state, lane=lane, s=s)

    if opp_ds is None:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        ego_off, opp_off = -sign * stagger / 2 + jitter[0], sign * stagger / 2 + jitter[2]
    else:
        ego_off, opp_off = jitter[0], opp_ds + jitter[2]
    ego = spawn(ego_gains, 0.0, ego_off, jitter[1])
    opp = spawn(opp_gains, 0.0, opp_off, jitter[3])

    ego_prog = np.zeros(horizon)
    opp_prog = np.zeros(horizon)
    gaps = np.zeros(horizon + 1)
    env_margins_e = np.zeros(horizon + 1)
    env_margins_o = np.zeros(horizon + 1)

    def surface_gap() -> float:
        d = math.hypot(ego.state.pose.x - opp.state.pose.x, ego.state.pose.y - opp.state.pose.y)
        return d - 2 * BODY_RADIUS

    def env_margin(a: _Agent) -> float:
        s, lat = track.project([a.state.pose.x, a.state.pose.y])
        return track.width_at(s) / 2 - abs(lat) - BODY_RADIUS

    gaps[0] = surface_gap()
    env_margins_e[0] = env_margin(ego)
    env_margins_o[0] = env_margin(opp)

    steps = horizon
    for t in range(horizon):
        ego_next = _drive(ego, opp, track, dt)
        opp_next = _drive(opp, ego, track, dt)
        ego.state, opp.state = ego_next, opp_next
        ego_prog[t] = ego.progress
        opp_prog[t] = opp.progress
        gaps[t + 1] = surface_gap()
        env_margins_e[t + 1] = env_margin(ego)
        env_margins_o[t + 1] = env_margin(opp)
        mutual = gaps[t + 1] <= 0.0
        ego.collided = ego.collided or env_margins_e[t + 1] <= 0.0 or mutual
        opp.collided = opp.collided or env_margins_o[t + 1] <= 0.0 or mutual
        if ego.collided or opp.collided:
            steps = t + 1
            break

    lead = float(ego.progress - opp.progress)
    ttc_opp = min_ttc(gaps[: steps + 1], dt)
    ttc_env = min_ttc(env_margins_e[: steps + 1], dt)

    mutual = ego.collided and opp.collided
    if mutual:
        result = 0
    elif ego.collided:
        result = -1
    elif opp.collided:
        result = 1
    elif lead > 0.05:
        result = 1
    elif lead < -0.05:
        result = -1
    else:
        result = 0
    return RaceOutcome(
        lead=lead,
        ttc_env=ttc_env,
        ttc_opp=ttc_opp,
        ego_collision=ego.collided,
        opp_collision=opp.collided,
        result=result,
        ego_progress=ego_prog[:steps],
        opp_progress=opp_prog[:steps],
        steps=steps,
    )

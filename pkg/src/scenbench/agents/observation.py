"""Ego observations: the basic 4D vector and 4D plus direction features."""
from __future__ import annotations

import math

import numpy as np

SPACES = {"4D": 4, "4D+Dir": 11}
COMMANDS = ("left", "right", "straight")
LOOKAHEAD = 8.0          # m along the route to the tracked waypoint
FRONT_RANGE = 20.0       # m of forward corridor for the front-vehicle signal

# rough per-feature scales used by the networks
OBS_SCALE = {
    "4D": np.array([0.2, 0.1, 2.0, 1.0]),
    "4D+Dir": np.array([0.2, 0.1, 2.0, 1.0] + [1.0] * 7),
}


def front_vehicle(world) -> int:
    """1 iff some actor overlaps the lane-wide corridor up to 20 m ahead of the ego's front bumper."""
    ego = world.ego
    route = world.route
    poly = route.polyline
    s_ego = world.sensing.progress
    half = route.lane_width / 2.0
    for a in world.actors:
        st = a.state
        if (st.x - ego.x) ** 2 + (st.y - ego.y) ** 2 > (FRONT_RANGE + 10.0) ** 2:
            continue
        s, lat, _ = poly.project(st.x, st.y)
        ahead = s - s_ego - ego.half_length
        if -st.half_length <= ahead <= FRONT_RANGE and abs(lat) <= half + st.half_width:
            return 1
    return 0


def target_waypoint(world) -> tuple[float, float]:
    x, y, _ = world.route.polyline.point_at(world.sensing.progress + LOOKAHEAD)
    return x, y


def extract_observation(world, space: str = "4D") -> np.ndarray:
    if space not in SPACES:
        raise ValueError(f"unknown observation space {space!r}")
    ego = world.ego
    tx, ty = target_waypoint(world)
    dx, dy = tx - ego.x, ty - ego.y
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    lateral = -s * dx + c * dy           # target offset in the ego frame, left positive
    base = [lateral, ego.speed, world.sensing.yaw_rate, float(front_vehicle(world))]
    if space == "4D":
        return np.array(base)
    cmd = world.route.command_at(world.sensing.progress)
    onehot = [1.0 if cmd == k else 0.0 for k in COMMANDS]
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        _, _, th = world.route.polyline.point_at(world.sensing.progress)
        wx, wy = math.cos(th), math.sin(th)
    else:
        wx, wy = dx / norm, dy / norm
    return np.array(base + onehot + [c, s, wx, wy])

"""Hand-authored flat junction maps and the paths driven on them.

Every map is a single junction at the origin. The main road runs west-east
(ego approaches from the west, driving east); the cross road runs south-north.
Right-hand traffic, 3.5 m lanes, a 2 m shoulder on the right of every carriageway.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..sim.geometry import Polyline
from ..sim.world import Lane, StopSign, TrafficLight, WorldMap

LANE_W = 3.5
SHOULDER_W = 2.0
J = 14.0            # junction half-size; keeps turn radii above the 9.2 m steering limit
ARM = 90.0          # arm length beyond the junction
SPEED_LIMIT = 8.0
MAIN_SCHEDULE = (10.0, 3.0, 10.0)
CROSS_SCHEDULE = (7.0, 3.0, 13.0)   # red while the main road is green or yellow


@dataclass(frozen=True)
class Layout:
    lanes_east: int = 1                 # eastbound lanes on the main road (1 or 2)
    missing_arm: str | None = None      # None for a 4-way junction, else 'north'|'south'|'east'
    signage: str = "light"              # light | stop | none (applies to the ego approach)
    approach: float = 50.0              # ego start distance before the junction
    light_offset: float = 0.0

    @property
    def junction(self) -> str:
        return "4way" if self.missing_arm is None else "T"

    def has_arm(self, arm: str) -> bool:
        return arm != self.missing_arm


def eastbound_y(k: int) -> float:
    return -LANE_W / 2 - k * LANE_W


def arc(cx, cy, r, a0, a1, step=math.radians(3)):
    n = max(2, int(abs(a1 - a0) / step) + 1)
    th = np.linspace(a0, a1, n)
    return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])


def join(*parts) -> np.ndarray:
    pts = [np.asarray(parts[0], float)]
    for p in parts[1:]:
        p = np.asarray(p, float)
        if np.allclose(pts[-1][-1], p[0]):
            p = p[1:]
        pts.append(p)
    out = np.vstack(pts)
    keep = np.concatenate([[True], np.any(np.abs(np.diff(out, axis=0)) > 1e-9, axis=1)])
    return out[keep]


def _line(p, q):
    return np.array([p, q], float)


# -- paths through the junction ------------------------------------------------
def path_east(y: float, x0: float, x1: float) -> np.ndarray:
    return _line((x0, y), (x1, y))


def path_west(y: float, x0: float, x1: float) -> np.ndarray:
    return _line((x0, y), (x1, y))


def path_left_turn(x_start: float, y: float, y_end: float) -> np.ndarray:
    """Eastbound lane at ``y`` turning left into the northbound lane."""
    r = J - y   # y is negative
    x_out = -J + r
    return join(_line((x_start, y), (-J, y)), arc(-J, J, r, -math.pi / 2, 0.0), _line((x_out, J), (x_out, y_end)))


def path_right_turn(x_start: float, y: float, y_end: float) -> np.ndarray:
    """Eastbound lane at ``y`` turning right into the southbound lane."""
    r = J + y
    x_out = -J + r
    return join(_line((x_start, y), (-J, y)), arc(-J, -J, r, math.pi / 2, 0.0), _line((x_out, -J), (x_out, y_end)))


def path_north(x: float, y0: float, y1: float) -> np.ndarray:
    return _line((x, y0), (x, y1))


def cosine_shift(x0: float, x1: float, y0: float, y1: float, n: int = 16) -> np.ndarray:
    u = np.linspace(0.0, 1.0, n)
    return np.column_stack([x0 + (x1 - x0) * u, y0 + (y1 - y0) * (1 - np.cos(np.pi * u)) / 2])


def build_map(layout: Layout, name: str = "map") -> WorldMap:
    le = layout.lanes_east
    west_x0 = -J - layout.approach - 30.0
    lanes = []

    def add(lane_id, pts, width=LANE_W, kind="driving"):
        lanes.append(Lane(lane_id, Polyline(pts), width, SPEED_LIMIT, kind))

    # main road, west arm always present
    for k in range(le):
        add(f"E{k}_w", path_east(eastbound_y(k), west_x0, -J))
    add("W0_w", path_west(LANE_W / 2, -J, west_x0))
    add("Esh_w", path_east(-le * LANE_W - SHOULDER_W / 2, west_x0, -J), SHOULDER_W, "shoulder")
    add("Wsh_w", path_west(LANE_W + SHOULDER_W / 2, -J, west_x0), SHOULDER_W, "shoulder")
    if layout.has_arm("east"):
        for k in range(le):
            add(f"E{k}_e", path_east(eastbound_y(k), J, J + ARM))
        add("W0_e", path_west(LANE_W / 2, J + ARM, J))
        add("Esh_e", path_east(-le * LANE_W - SHOULDER_W / 2, J, J + ARM), SHOULDER_W, "shoulder")
        add("Wsh_e", path_west(LANE_W + SHOULDER_W / 2, J + ARM, J), SHOULDER_W, "shoulder")
    if layout.has_arm("north"):
        add("N0_n", path_north(LANE_W / 2, J, J + ARM))
        add("S0_n", path_north(-LANE_W / 2, J + ARM, J))
        add("Nsh_n", path_north(LANE_W + SHOULDER_W / 2, J, J + ARM), SHOULDER_W, "shoulder")
        add("Ssh_n", path_north(-LANE_W - SHOULDER_W / 2, J + ARM, J), SHOULDER_W, "shoulder")
    if layout.has_arm("south"):
        add("N0_s", path_north(LANE_W / 2, -J - ARM, -J))
        add("S0_s", path_north(-LANE_W / 2, -J, -J - ARM))
        add("Nsh_s", path_north(LANE_W + SHOULDER_W / 2, -J - ARM, -J), SHOULDER_W, "shoulder")
        add("Ssh_s", path_north(-LANE_W - SHOULDER_W / 2, -J, -J - ARM), SHOULDER_W, "shoulder")

    junction = np.array([(-J, -J), (J, -J), (J, J), (-J, J)])
    lights, signs = [], []
    ego_line = ((-J, 0.0), (-J, -le * LANE_W))
    if layout.signage == "light":
        lights.append(TrafficLight(ego_line, (1.0, 0.0), MAIN_SCHEDULE, layout.light_offset))
        if layout.has_arm("east"):
            lights.append(TrafficLight(((J, 0.0), (J, LANE_W)), (-1.0, 0.0), MAIN_SCHEDULE, layout.light_offset))
        cross_offset = layout.light_offset + MAIN_SCHEDULE[0]
        if layout.has_arm("south"):
            lights.append(TrafficLight(((0.0, -J), (LANE_W, -J)), (0.0, 1.0), CROSS_SCHEDULE, cross_offset))
        if layout.has_arm("north"):
            lights.append(TrafficLight(((-LANE_W, J), (0.0, J)), (0.0, -1.0), CROSS_SCHEDULE, cross_offset))
    elif layout.signage == "stop":
        signs.append(StopSign(ego_line, (1.0, 0.0)))
    return WorldMap(lanes, lights, signs, [junction], name=name)


@dataclass
class Route:
    """Ego route: waypoints on a map plus route-local signage and junction maneuvers."""
    template_id: int
    route_id: int
    waypoints: np.ndarray
    map: WorldMap
    layout: Layout
    lane_width: float = LANE_W
    speed_limit: float = SPEED_LIMIT
    maneuvers: list = field(default_factory=list)   # (s_begin, s_end, 'left'|'right'|'straight')
    anchors: dict = field(default_factory=dict)     # named arc-length positions on the route

    def __post_init__(self):
        self.polyline = Polyline(self.waypoints)

    @property
    def length(self) -> float:
        return self.polyline.length

    @property
    def signage(self) -> dict:
        return {"junction": self.layout.junction, "lanes": self.layout.lanes_east + 1,
                "control": self.layout.signage, "speed_limit": self.speed_limit}

    def command_at(self, s: float, horizon: float = 30.0) -> str:
        for s0, s1, cmd in self.maneuvers:
            if s0 - horizon <= s <= s1:
                return cmd
        return "straight"


def junction_span(poly: Polyline) -> tuple[float, float]:
    """Arc-length interval of ``poly`` inside the junction square."""
    ss = np.arange(0.0, poly.length, 0.25)
    pts = np.array([poly.point_at(s)[:2] for s in ss])
    idx = np.flatnonzero(np.all(np.abs(pts) <= J + 1e-9, axis=1))
    if len(idx) == 0:
        raise ValueError("path does not cross the junction")
    return float(ss[idx[0]]), float(ss[idx[-1]])

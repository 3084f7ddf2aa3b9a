"""World map, world state and the fixed-timestep world update with rule sensing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .geometry import Polyline, detect_collision, point_in_polygon, segments_cross
from .vehicle import Control, VehicleState, step_vehicle

DT = 0.05
EPISODE_LIMIT_S = 60.0

EVENT_KINDS = (
    "collision",
    "red_light_run",
    "stop_sign_run",
    "out_of_road_enter",
    "out_of_road_exit",
    "lane_invasion",
    "route_complete",
)
ACTOR_KINDS = ("vehicle", "cyclist", "pedestrian")

STOP_SPEED = 0.5          # m/s counted as a full stop at a sign
STOP_ZONE = 10.0          # m upstream of a stop line where the stop must happen
ROUTE_END_TOLERANCE = 0.5  # m short of the last waypoint still counts as complete


@dataclass(frozen=True)
class Lane:
    lane_id: str
    polyline: Polyline
    width: float = 3.5
    speed_limit: float = 8.0
    kind: str = "driving"


@dataclass(frozen=True)
class TrafficLight:
    stop_line: tuple[tuple[float, float], tuple[float, float]]
    normal: tuple[float, float]        # unit vector pointing into the junction
    schedule: tuple[float, float, float] = (10.0, 3.0, 10.0)   # green, yellow, red seconds
    offset: float = 0.0                # seconds into the green-yellow-red cycle at t=0

    def __post_init__(self):
        if any(d <= 0 for d in self.schedule):
            raise ValueError("light phase durations must be positive")

    def phase(self, t: float) -> str:
        g, y, r = self.schedule
        c = (t + self.offset) % (g + y + r)
        if c < g:
            return "green"
        if c < g + y:
            return "yellow"
        return "red"

    def time_to_change(self, t: float) -> float:
        g, y, r = self.schedule
        c = (t + self.offset) % (g + y + r)
        for edge in (g, g + y, g + y + r):
            if c < edge:
                return edge - c
        return 0.0


@dataclass(frozen=True)
class StopSign:
    stop_line: tuple[tuple[float, float], tuple[float, float]]
    normal: tuple[float, float]


def signed_distance_to_line(x, y, stop_line, normal) -> tuple[float, float]:
    """(distance along ``normal`` past the line, offset along the line from its midpoint)."""
    (ax, ay), (bx, by) = stop_line
    mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
    nx, ny = normal
    along = (x - mx) * nx + (y - my) * ny
    across = -(x - mx) * ny + (y - my) * nx
    return along, across


class WorldMap:
    """Immutable flat map: lane corridors, junction polygons, lights and stop signs."""

    def __init__(self, lanes, traffic_lights=(), stop_signs=(), junctions=(), name="map"):
        self.name = name
        self.lanes: tuple[Lane, ...] = tuple(lanes)
        self.traffic_lights: tuple[TrafficLight, ...] = tuple(traffic_lights)
        self.stop_signs: tuple[StopSign, ...] = tuple(stop_signs)
        self.junctions = tuple(np.asarray(j, dtype=float) for j in junctions)
        sx, sy, vx, vy, hw = [], [], [], [], []
        for lane in self.lanes:
            p = lane.polyline
            sx.append(p._sx); sy.append(p._sy); vx.append(p._vx); vy.append(p._vy)
            hw.append(np.full(len(p._sx), lane.width / 2.0))
        if self.lanes:
            self._sx = np.concatenate(sx)
            self._sy = np.concatenate(sy)
            self._vx = np.concatenate(vx)
            self._vy = np.concatenate(vy)
            self._hw2 = np.concatenate(hw) ** 2
            self._len2 = self._vx ** 2 + self._vy ** 2
        self._jbox = [(j[:, 0].min(), j[:, 0].max(), j[:, 1].min(), j[:, 1].max()) for j in self.junctions]
        pts = [lane.polyline.points for lane in self.lanes] + list(self.junctions)
        if pts:
            allp = np.concatenate(pts)
            self.extent = (allp[:, 0].min(), allp[:, 0].max(), allp[:, 1].min(), allp[:, 1].max())
        else:
            self.extent = (0.0, 0.0, 0.0, 0.0)

    def contains(self, x: float, y: float) -> bool:
        """True inside the bounding box of the modelled road network."""
        x0, x1, y0, y1 = self.extent
        return x0 <= x <= x1 and y0 <= y <= y1

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        raise KeyError(lane_id)

    def in_junction(self, x: float, y: float) -> bool:
        for (x0, x1, y0, y1), poly in zip(self._jbox, self.junctions):
            if x0 <= x <= x1 and y0 <= y <= y1 and point_in_polygon(x, y, poly):
                return True
        return False

    def is_drivable(self, x: float, y: float) -> bool:
        if self.in_junction(x, y):
            return True
        if not self.lanes:
            return False
        dx = x - self._sx
        dy = y - self._sy
        t = np.clip((dx * self._vx + dy * self._vy) / self._len2, 0.0, 1.0)
        ex = dx - t * self._vx
        ey = dy - t * self._vy
        return bool(np.any(ex * ex + ey * ey <= self._hw2))


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tick": self.tick, "kind": self.kind, "payload": dict(self.payload)}


@dataclass
class Actor:
    actor_id: int
    kind: str
    state: VehicleState
    role: str = "traffic"          # adversary | traffic | blocker
    behavior: Any = None           # object with .control(actor, world) -> Control; None = static

    @property
    def static(self) -> bool:
        return self.behavior is None

    def with_state(self, state: VehicleState) -> "Actor":
        return Actor(self.actor_id, self.kind, state, self.role, self.behavior)


@dataclass(frozen=True)
class Sensing:
    """Per-world memory used to fire each rule event once per contiguous episode."""
    contacts: frozenset = frozenset()
    offroad: bool = False
    invading: bool = False
    stopped_at: frozenset = frozenset()
    completed: bool = False
    progress: float = 0.0        # arc length along the route
    deviation: float = 0.0
    signed_lateral: float = 0.0
    yaw_rate: float = 0.0
    acceleration: float = 0.0


@dataclass
class WorldState:
    tick: int
    dt: float
    ego: VehicleState
    actors: tuple
    map: WorldMap
    route: Any                     # scenbench.scenarios Route (needs .polyline and .lane_width)
    event_log: tuple = ()
    sensing: Sensing = Sensing()

    def __post_init__(self):
        ids = [a.actor_id for a in self.actors]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate actor ids")

    @property
    def time(self) -> float:
        return self.tick * self.dt

    def actor(self, actor_id: int) -> Actor:
        for a in self.actors:
            if a.actor_id == actor_id:
                return a
        raise KeyError(actor_id)

    def events_at(self, tick: int) -> list[Event]:
        return [e for e in self.event_log if e.tick == tick]


def initial_sensing(ego: VehicleState, wmap: WorldMap, route) -> Sensing:
    s, lat, dist = route.polyline.project(ego.x, ego.y)
    return Sensing(offroad=not wmap.is_drivable(ego.x, ego.y),
                   invading=dist > route.lane_width / 2.0,
                   progress=s, deviation=dist, signed_lateral=lat)


def make_world(ego: VehicleState, actors, wmap: WorldMap, route, dt: float = DT) -> WorldState:
    return WorldState(0, dt, ego, tuple(actors), wmap, route, (), initial_sensing(ego, wmap, route))


def world_step(world: WorldState, ego_control: Control, actor_controls: dict) -> WorldState:
    """Advance every vehicle one tick and append the rule events this tick produced."""
    dt = world.dt
    new_actors = []
    for a in world.actors:
        if a.static:
            new_actors.append(a)
            continue
        try:
            ctrl = actor_controls[a.actor_id]
        except KeyError:
            raise KeyError(f"missing control for actor {a.actor_id}") from None
        new_actors.append(a.with_state(step_vehicle(a.state, ctrl, dt)))
    prev = world.ego
    ego = step_vehicle(prev, ego_control, dt)
    tick = world.tick + 1
    t = tick * dt
    sens = world.sensing
    wmap = world.map
    route = world.route
    events = []

    contacts = set()
    for a in new_actors:
        if detect_collision(ego, a.state):
            contacts.add(a.actor_id)
            if a.actor_id not in sens.contacts:
                events.append(Event(tick, "collision", {"actors": ["ego", a.actor_id]}))

    p0, p1 = (prev.x, prev.y), (ego.x, ego.y)
    mx, my = ego.x - prev.x, ego.y - prev.y
    for i, light in enumerate(wmap.traffic_lights):
        if mx * light.normal[0] + my * light.normal[1] > 0 and segments_cross(p0, p1, *light.stop_line):
            if light.phase(t) == "red":
                events.append(Event(tick, "red_light_run", {"light": i}))

    stopped = set(sens.stopped_at)
    for i, sign in enumerate(wmap.stop_signs):
        along, across = signed_distance_to_line(ego.x, ego.y, sign.stop_line, sign.normal)
        half = 0.5 * math.dist(*sign.stop_line)
        if -STOP_ZONE <= along <= 0.5 and abs(across) <= half + 1.0 and ego.speed < STOP_SPEED:
            stopped.add(i)
        if mx * sign.normal[0] + my * sign.normal[1] > 0 and segments_cross(p0, p1, *sign.stop_line):
            if i not in stopped:
                events.append(Event(tick, "stop_sign_run", {"sign": i}))
            stopped.discard(i)

    offroad = not wmap.is_drivable(ego.x, ego.y)
    if offroad and not sens.offroad:
        events.append(Event(tick, "out_of_road_enter", {}))
    elif sens.offroad and not offroad:
        events.append(Event(tick, "out_of_road_exit", {}))

    s, lat, dist = route.polyline.project(ego.x, ego.y)
    invading = dist > route.lane_width / 2.0
    if invading and not sens.invading:
        events.append(Event(tick, "lane_invasion", {"deviation": dist}))

    completed = sens.completed
    if not completed and s >= route.polyline.length - ROUTE_END_TOLERANCE:
        completed = True
        events.append(Event(tick, "route_complete", {}))

    dpsi = ego.heading - prev.heading
    dpsi = (dpsi + math.pi) % (2 * math.pi) - math.pi
    sensing = Sensing(frozenset(contacts), offroad, invading, frozenset(stopped), completed,
                      s, dist, lat, dpsi / dt, (ego.speed - prev.speed) / dt)
    return WorldState(tick, dt, ego, tuple(new_actors), wmap, route,
                      world.event_log + tuple(events), sensing)

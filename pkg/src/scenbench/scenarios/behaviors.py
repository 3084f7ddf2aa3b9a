"""Controllers for traffic participants and the rule-following driver they share with the ego baseline."""
from __future__ import annotations

import math

import numpy as np

from ..sim.geometry import Polyline, segments_cross
from ..sim.vehicle import ACCEL_MAX, ACCEL_MIN, STEER_MAX, Control, VehicleState, step_vehicle
from ..sim.world import WorldMap

LAT_ACCEL_MAX = 2.5     # m/s^2, cornering speed cap for the rule-following driver
IDM_HEADWAY = 2.0       # s
IDM_MIN_GAP = 2.0       # m
IDM_COMFORT_DECEL = 3.0
LEADER_RANGE = 50.0
STOP_SIGN_DWELL_SPEED = 0.3


class DrivePath:
    """A path with its speed limit, cornering speed caps and the stop lines that govern it."""

    def __init__(self, points, wmap: WorldMap | None = None, speed_limit: float = 8.0,
                 lane_width: float = 3.5):
        self.polyline = points if isinstance(points, Polyline) else Polyline(points)
        self.speed_limit = speed_limit
        self.lane_width = lane_width
        pts = self.polyline.points
        cap_s, cap_v = [], []
        for i in range(1, len(pts) - 1):
            a = pts[i] - pts[i - 1]
            b = pts[i + 1] - pts[i]
            turn = abs(math.atan2(a[0] * b[1] - a[1] * b[0], a @ b))
            if turn > 1e-6:
                kappa = turn / (0.5 * (np.hypot(*a) + np.hypot(*b)))
                cap_s.append(self.polyline.cum[i])
                cap_v.append(math.sqrt(LAT_ACCEL_MAX / kappa))
        self._cap_s = np.array(cap_s)
        self._cap_v = np.array(cap_v)
        self.stops = find_stops(self.polyline, wmap) if wmap is not None else []

    def target_speed(self, s: float, horizon: float = 15.0) -> float:
        v = self.speed_limit
        if len(self._cap_s):
            m = (self._cap_s >= s - 2.0) & (self._cap_s <= s + horizon)
            if m.any():
                v = min(v, float(self._cap_v[m].min()))
        return v


def find_stops(poly: Polyline, wmap: WorldMap) -> list[tuple[float, str, int]]:
    """Arc positions where ``poly`` crosses a stop line in the controlled direction."""
    stops = []
    pts = poly.points
    for kind, items in (("light", wmap.traffic_lights), ("sign", wmap.stop_signs)):
        for idx, item in enumerate(items):
            q0, q1 = item.stop_line
            for i in range(len(pts) - 1):
                d = pts[i + 1] - pts[i]
                if d[0] * item.normal[0] + d[1] * item.normal[1] <= 0:
                    continue
                if segments_cross(pts[i], pts[i + 1], q0, q1) or _touches(pts[i], pts[i + 1], q0, q1):
                    # arc length of the crossing point
                    s, _, _ = poly.project(*_intersection(pts[i], pts[i + 1], q0, q1))
                    stops.append((s, kind, idx))
                    break
    stops.sort()
    return stops


def _touches(p0, p1, q0, q1) -> bool:
    return segments_cross(p0, p1, q0, q1) or segments_cross(p1, p0, q0, q1)


def _intersection(p0, p1, q0, q1):
    p0, p1, q0, q1 = (np.asarray(v, float) for v in (p0, p1, q0, q1))
    r = p1 - p0
    s = q1 - q0
    den = r[0] * s[1] - r[1] * s[0]
    t = ((q0[0] - p0[0]) * s[1] - (q0[1] - p0[1]) * s[0]) / den
    return tuple(p0 + t * r)


def pursuit_steer(state: VehicleState, poly: Polyline, s: float) -> float:
    """Pure-pursuit steering toward the path point one look-ahead distance past ``s``."""
    ld = max(5.0, 0.8 * state.speed + 3.0)
    tx, ty, _ = poly.point_at(s + ld)
    dx, dy = tx - state.x, ty - state.y
    dist = math.hypot(dx, dy)
    if dist < 1e-6:
        return 0.0
    alpha = math.atan2(dy, dx) - state.heading
    wheelbase = state.front_axle_dist + state.rear_axle_dist
    delta = math.atan2(2.0 * wheelbase * math.sin(alpha), dist)
    return min(max(delta, -STEER_MAX), STEER_MAX)


def idm_accel(v: float, v0: float, gap: float | None = None, dv: float = 0.0) -> float:
    if v0 <= 0:
        free = -IDM_COMFORT_DECEL if v > 0 else 0.0
    else:
        free = max(-IDM_COMFORT_DECEL, ACCEL_MAX * (1.0 - (v / v0) ** 4))
    if gap is None:
        return min(max(free, ACCEL_MIN), ACCEL_MAX)
    if gap <= 0.1:
        return ACCEL_MIN
    s_star = IDM_MIN_GAP + max(0.0, v * IDM_HEADWAY + v * dv / (2.0 * math.sqrt(ACCEL_MAX * IDM_COMFORT_DECEL)))
    a = ACCEL_MAX * (1.0 - (v / max(v0, 1e-3)) ** 4 - (s_star / gap) ** 2) if v0 > 0 else -(s_star / gap) ** 2
    return min(max(min(a, free), ACCEL_MIN), ACCEL_MAX)


def others(world, self_id):
    """(id, state) of every vehicle in ``world`` except ``self_id``; the ego has id 'ego'."""
    if self_id != "ego":
        yield "ego", world.ego
    for a in world.actors:
        if a.actor_id != self_id:
            yield a.actor_id, a.state


def nearest_leader(state: VehicleState, path: DrivePath, s: float, world, self_id):
    """Closest vehicle in the forward corridor of ``path``: (bumper gap, speed along path)."""
    best = None
    poly = path.polyline
    half = path.lane_width / 2.0
    for _, other in others(world, self_id):
        dx, dy = other.x - state.x, other.y - state.y
        if dx * dx + dy * dy > (LEADER_RANGE + 5.0) ** 2:
            continue
        so, lat, _ = poly.project(other.x, other.y)
        ds = so - s
        if ds <= 0 or ds > LEADER_RANGE or abs(lat) > half + other.half_width:
            continue
        gap = ds - state.half_length - other.half_length
        _, _, th = poly.point_at(so)
        v_along = other.speed * math.cos(other.heading - th)
        if best is None or gap < best[0]:
            best = (gap, v_along)
    return best


class RuleDriver:
    """Lane keeping by pure pursuit plus IDM car following that obeys lights and stop signs."""

    def __init__(self, path: DrivePath, self_id="ego", obey_rules: bool = True):
        self.path = path
        self.self_id = self_id
        self.obey_rules = obey_rules
        self._signs_done: set[int] = set()

    def _stop_gap(self, state: VehicleState, s: float, world) -> float | None:
        gap_min = None
        for s_line, kind, idx in self.path.stops:
            gap = s_line - s - state.half_length
            if gap < -0.5 or gap > LEADER_RANGE:
                continue
            if kind == "light":
                light = world.map.traffic_lights[idx]
                phase = light.phase(world.time)
                if phase == "green":
                    continue
                if phase == "yellow":
                    # commit when a comfortable stop is no longer possible
                    if gap <= 0 or state.speed ** 2 / (2.0 * max(gap, 1e-3)) > IDM_COMFORT_DECEL:
                        continue
            else:
                if idx in self._signs_done:
                    continue
                if gap < 3.0 and state.speed < STOP_SIGN_DWELL_SPEED:
                    self._signs_done.add(idx)
                    continue
            gap = max(gap, 0.05)
            if gap_min is None or gap < gap_min:
                gap_min = gap
        return gap_min

    def control(self, state: VehicleState, world) -> Control:
        poly = self.path.polyline
        s, lat, dist = poly.project(state.x, state.y)
        if dist > self.path.lane_width:
            return Control.clipped(ACCEL_MIN if state.speed > 0 else 0.0, 0.0)
        steer = pursuit_steer(state, poly, s)
        v0 = self.path.target_speed(s)
        lead = nearest_leader(state, self.path, s, world, self.self_id)
        cands = []
        if lead is not None:
            cands.append(lead)
        if self.obey_rules:
            g = self._stop_gap(state, s, world)
            if g is not None:
                cands.append((g, 0.0))
        acc = idm_accel(state.speed, v0)
        for gap, v_lead in cands:
            acc = min(acc, idm_accel(state.speed, v0, gap, state.speed - v_lead))
        if state.speed <= 0.0 and acc < 0:
            acc = 0.0
        return Control.clipped(acc, steer)


class BenignBehavior:
    """Autopilot for a traffic participant: the rule-following driver on its own path."""

    def __init__(self, path: DrivePath, actor_id):
        self.driver = RuleDriver(path, actor_id)

    def control(self, actor, world) -> Control:
        return self.driver.control(actor.state, world)


def benign_policy(actor, world) -> Control:
    """Control for an actor carrying a benign behavior (see ``BenignBehavior``)."""
    return actor.behavior.control(actor, world)


class EgoRouteTrigger:
    """Fires once the ego's route progress is within ``distance`` of a route arc position."""

    def __init__(self, s_conflict: float, distance: float):
        self.s_conflict = s_conflict
        self.distance = distance

    def __call__(self, actor, world) -> bool:
        return world.sensing.progress >= self.s_conflict - self.distance


class EgoProximityTrigger:
    def __init__(self, distance: float):
        self.distance = distance

    def __call__(self, actor, world) -> bool:
        return math.hypot(world.ego.x - actor.state.x, world.ego.y - actor.state.y) <= self.distance


def _hold(state: VehicleState) -> Control:
    return Control(ACCEL_MIN if state.speed > 0 else 0.0, 0.0)


class AdversarialBehavior:
    """Scripted adversary: a nominal trajectory plus a segment-wise (acceleration, steering)
    perturbation profile that starts when the trigger fires.

    Before the trigger the vehicle either waits or cruises along ``path``. Afterwards the
    nominal steering comes from an unperturbed shadow vehicle tracking ``path``, so
    steering perturbations accumulate open loop. With ``follow`` the vehicle also keeps
    an IDM gap to whoever is ahead in its lane. With ``path=None`` the nominal controls
    are zero.
    """

    def __init__(self, path: DrivePath | None, cruise_speed: float, trigger, profile=(),
                 horizon: float = 20.0, cruise_before_trigger: bool = False, follow: bool = False):
        self.path = path
        self.cruise_before_trigger = cruise_before_trigger
        self.follow = follow
        self.cruise_speed = cruise_speed
        self.trigger = trigger
        self.profile = [tuple(map(float, p)) for p in profile]
        self.segment = horizon / len(self.profile) if self.profile else horizon
        self.horizon = horizon
        self.activated_tick: int | None = None
        self.shadow: VehicleState | None = None

    def nominal_accel(self, state: VehicleState) -> float:
        return min(max(1.5 * (self.cruise_speed - state.speed), -ACCEL_MAX), ACCEL_MAX)

    def nominal(self, state: VehicleState) -> tuple[float, float]:
        if self.path is None:
            return 0.0, 0.0
        s, _, _ = self.path.polyline.project(state.x, state.y)
        return self.nominal_accel(state), pursuit_steer(state, self.path.polyline, s)

    def _react(self, a0: float, actor, world) -> float:
        if not self.follow or self.path is None:
            return a0
        state = actor.state
        s, _, _ = self.path.polyline.project(state.x, state.y)
        lead = nearest_leader(state, self.path, s, world, actor.actor_id)
        if lead is None:
            return a0
        return min(a0, idm_accel(state.speed, self.cruise_speed, lead[0], state.speed - lead[1]))

    def perturbation(self, t: float) -> tuple[float, float]:
        if not self.profile or t >= self.horizon:
            return 0.0, 0.0
        k = min(int(t / self.segment), len(self.profile) - 1)
        return self.profile[k]

    def control(self, actor, world) -> Control:
        state = actor.state
        if self.activated_tick is None:
            if self.trigger is not None and not self.trigger(actor, world):
                if not self.cruise_before_trigger:
                    return _hold(state)
                a0, d0 = self.nominal(state)
                return Control.clipped(self._react(a0, actor, world), d0)
            self.activated_tick = world.tick
            self.shadow = state
        t = (world.tick - self.activated_tick) * world.dt
        # steering follows the unperturbed shadow; speed tracking acts on the vehicle itself
        a_shadow, d0 = self.nominal(self.shadow)
        self.shadow = step_vehicle(self.shadow, Control.clipped(a_shadow, d0), world.dt)
        a0 = self._react(self.nominal_accel(state), actor, world) if self.path is not None else 0.0
        da, dd = self.perturbation(t)
        return Control.clipped(a0 + da, d0 + dd)


def adversarial_behavior(actor, world, behavior: AdversarialBehavior) -> Control:
    return behavior.control(actor, world)


class CrossingObstacle:
    """Cyclist or pedestrian that stands still, then crosses straight ahead once triggered."""

    def __init__(self, speed: float, trigger):
        self.speed = speed
        self.trigger = trigger
        self.activated_tick: int | None = None

    def control(self, actor, world) -> Control:
        if self.activated_tick is None:
            if not self.trigger(actor, world):
                return _hold(actor.state)
            self.activated_tick = world.tick
        acc = min(max(2.0 * (self.speed - actor.state.speed), ACCEL_MIN), ACCEL_MAX)
        return Control.clipped(acc, 0.0)

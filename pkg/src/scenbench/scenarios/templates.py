"""The eight pre-crash templates, their parameter schemas and ten route variants each."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..sim.geometry import Polyline
from .layout import (ARM, J, LANE_W, Layout, Route, build_map, cosine_shift, eastbound_y, join,
                     junction_span, path_east, path_left_turn, path_right_turn, arc)

EXIT_LEN = 45.0
TRIGGER_LEAD = 25.0     # m, trigger point ahead of the conflict point on the ego route

OBSTACLE_SCHEMA = (
    ("spawn_dist", 10.0, 40.0, "m"),
    ("lateral_offset", -3.0, 3.0, "m"),
    ("trigger_dist", 5.0, 25.0, "m"),
    ("actor_speed", 0.5, 6.0, "m/s"),
)
VEHICLE_SCHEMA = (
    ("initial_gap", 5.0, 40.0, "m"),
    ("cruise_speed", 3.0, 12.0, "m/s"),
    ("trigger_dist", 5.0, 30.0, "m"),
) + tuple(p for k in range(1, 5) for p in ((f"da_{k}", -3.0, 3.0, "m/s^2"), (f"dd_{k}", -0.3, 0.3, "rad")))

OBSTACLE_BENIGN = (30.0, 0.0, 15.0, 4.0)
VEHICLE_BENIGN = (40.0, 8.0, 30.0) + (0.0,) * 8


@dataclass(frozen=True)
class ScenarioTemplate:
    template_id: int
    name: str
    parameter_schema: tuple
    actor_roster: tuple          # (kind, role) of the non-ego actors
    trigger_rule: str
    benign_params: tuple
    # benign actors start this side of the conflict point (-1 upstream, +1 already past it)
    benign_side: int = -1

    @property
    def dim(self) -> int:
        return len(self.parameter_schema)

    @property
    def names(self) -> list[str]:
        return [p[0] for p in self.parameter_schema]

    @property
    def lower(self) -> np.ndarray:
        return np.array([p[1] for p in self.parameter_schema])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p[2] for p in self.parameter_schema])

    @property
    def is_obstacle(self) -> bool:
        return self.template_id in (1, 2)

    @property
    def initial_condition_dims(self) -> int:
        """Leading parameters that set initial poses and triggers (the rest perturb trajectories)."""
        return 4 if self.is_obstacle else 3


_OBSTACLE_TRIGGER = "activates when the ego comes within trigger_dist (euclidean) of the obstacle"
_VEHICLE_TRIGGER = ("starts its perturbation profile when the ego's route progress is within trigger_dist "
                    "of the trigger point, 25 m before the conflict point")

TEMPLATES: dict[int, ScenarioTemplate] = {
    1: ScenarioTemplate(1, "StraightObstacle", OBSTACLE_SCHEMA, (("cyclist|pedestrian", "adversary"),),
                        _OBSTACLE_TRIGGER, OBSTACLE_BENIGN),
    2: ScenarioTemplate(2, "TurningObstacle", OBSTACLE_SCHEMA, (("pedestrian|cyclist", "adversary"),),
                        _OBSTACLE_TRIGGER, OBSTACLE_BENIGN),
    3: ScenarioTemplate(3, "LaneChanging", VEHICLE_SCHEMA, (("vehicle", "adversary"), ("vehicle", "blocker")),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN, benign_side=1),
    4: ScenarioTemplate(4, "VehiclePassing", VEHICLE_SCHEMA, (("vehicle", "adversary"), ("vehicle", "blocker")),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN, benign_side=1),
    5: ScenarioTemplate(5, "RedLightRunning", VEHICLE_SCHEMA, (("vehicle", "adversary"),),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN),
    6: ScenarioTemplate(6, "UnprotectedLeftTurn", VEHICLE_SCHEMA, (("vehicle", "adversary"),),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN),
    7: ScenarioTemplate(7, "RightTurn", VEHICLE_SCHEMA, (("vehicle", "adversary"),),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN),
    8: ScenarioTemplate(8, "CrossingNegotiation", VEHICLE_SCHEMA, (("vehicle", "adversary"),),
                        _VEHICLE_TRIGGER, VEHICLE_BENIGN),
}
TEMPLATE_NAMES = {t.name: t.template_id for t in TEMPLATES.values()}
N_ROUTES = 10

# (eastbound lanes, T-junction?, signage, approach length, light offset)
ROUTE_VARIANTS = (
    (1, False, "light", 50.0, 0.0),
    (2, False, "light", 60.0, 0.0),
    (1, True, "stop", 45.0, 0.0),
    (2, True, "none", 55.0, 0.0),
    (1, False, "stop", 60.0, 0.0),
    (2, False, "none", 45.0, 0.0),
    (1, True, "light", 65.0, 12.0),
    (2, True, "light", 50.0, 0.0),
    (1, False, "none", 70.0, 0.0),
    (2, False, "stop", 50.0, 0.0),
)


def get_template(template_id: int) -> ScenarioTemplate:
    try:
        return TEMPLATES[int(template_id)]
    except (KeyError, ValueError, TypeError):
        raise KeyError(f"unknown template {template_id!r}") from None


@dataclass
class ScenarioGeometry:
    """Everything about a template x route pair that does not depend on the parameters."""
    template: ScenarioTemplate
    route: Route
    adversary_kind: str
    # vehicle templates: adversary path and the conflict arc positions on both paths
    adversary_path: np.ndarray | None = None
    adv_conflict_s: float = 0.0
    ego_conflict_s: float = 0.0
    # obstacle templates: route arc position the spawn distance is measured from
    anchor_s: float = 0.0
    blockers: list = field(default_factory=list)     # (x, y, heading)
    # vehicle adversary: extra spawn distance beyond initial_gap, whether it cruises or
    # waits before its trigger, and whether it keeps a gap to traffic ahead in its lane
    adversary_lead: float = 0.0
    adversary_cruises: bool = False
    adversary_follows: bool = False

    @property
    def trigger_point_s(self) -> float:
        """Arc position on the ego route that trigger_dist is measured to."""
        return self.ego_conflict_s - TRIGGER_LEAD

    @property
    def map(self):
        return self.route.map


def first_crossing(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Arc positions (on a, on b) of the first intersection of two polylines along a."""
    pa, pb = Polyline(a), Polyline(b)
    best = None
    for i in range(len(a) - 1):
        p, r = a[i], a[i + 1] - a[i]
        for j in range(len(b) - 1):
            q, s = b[j], b[j + 1] - b[j]
            den = r[0] * s[1] - r[1] * s[0]
            if abs(den) < 1e-12:
                continue
            t = ((q[0] - p[0]) * s[1] - (q[1] - p[1]) * s[0]) / den
            u = ((q[0] - p[0]) * r[1] - (q[1] - p[1]) * r[0]) / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                sa = pa.cum[i] + t * pa.seg_len[i]
                if best is None or sa < best[0]:
                    best = (sa, pb.cum[j] + u * pb.seg_len[j])
    if best is None:
        raise ValueError("paths do not cross")
    return float(best[0]), float(best[1])


def _layout(template_id: int, route_id: int) -> tuple[Layout, str]:
    """Route variant adjusted to what the template needs; returns (layout, ego maneuver)."""
    lanes, is_t, signage, approach, offset = ROUTE_VARIANTS[route_id]
    odd = route_id % 2 == 1
    maneuver = "straight"
    missing = None
    if template_id == 1:
        missing = ("north" if odd else "south") if is_t else None
    elif template_id == 2:
        maneuver = "right" if odd else "left"
        missing = ("north" if maneuver == "right" else "south") if is_t else None
    elif template_id == 3:
        lanes, approach = 2, max(approach, 95.0)
        missing = ("north" if odd else "south") if is_t else None
    elif template_id == 4:
        approach = max(approach, 85.0)
        missing = ("north" if odd else "south") if is_t else None
    elif template_id == 5:
        signage, approach = "light", min(approach, 60.0)
        missing = "north" if is_t else None
    elif template_id == 6:
        maneuver = "left"
        missing = "south" if is_t else None
    elif template_id == 7:
        maneuver = "right"
    elif template_id == 8:
        signage = "none" if signage == "light" else signage
        missing = "north" if is_t else None
    if template_id >= 5:
        offset = 0.0
    return Layout(lanes, missing, signage, approach, offset), maneuver


def _ego_path(layout: Layout, maneuver: str, k: int = 0) -> np.ndarray:
    x0 = -J - layout.approach
    y = eastbound_y(k)
    if maneuver == "left":
        return path_left_turn(x0, y, J + EXIT_LEN)
    if maneuver == "right":
        return path_right_turn(x0, y, -J - EXIT_LEN)
    return path_east(y, x0, J + EXIT_LEN)


def _cross_path(layout: Layout) -> np.ndarray:
    """Northbound adversary path from the south arm; turns left into the westbound lane on a T."""
    x = LANE_W / 2
    start = (x, -J - ARM)
    if layout.has_arm("north"):
        return np.array([start, (x, J + ARM)])
    r = J + x
    west_end = -J - layout.approach - 30.0
    return join(np.array([start, (x, -J)]), arc(-J, -J, r, 0.0, math.pi / 2),
                np.array([(-J, LANE_W / 2), (west_end, LANE_W / 2)]))


@lru_cache(maxsize=None)
def scenario_geometry(template_id: int, route_id: int) -> ScenarioGeometry:
    template = get_template(template_id)
    if not 0 <= int(route_id) < N_ROUTES:
        raise KeyError(f"unknown route {route_id!r}")
    layout, maneuver = _layout(template_id, route_id)
    wmap = build_map(layout, name=f"t{template_id}_r{route_id}")
    west_end = -J - layout.approach - 30.0
    x0 = -J - layout.approach
    blockers = []
    adv_path = None
    anchors = {}

    if template_id == 3:
        x_merge = x0 + 60.0
        ego = join(np.array([(x0, eastbound_y(1)), (x0 + 35.0, eastbound_y(1))]),
                   cosine_shift(x0 + 35.0, x_merge, eastbound_y(1), eastbound_y(0)),
                   np.array([(x_merge, eastbound_y(0)), (J + EXIT_LEN, eastbound_y(0))]))
        blockers.append((x0 + 75.0, eastbound_y(1), 0.0))
        adv_path = path_east(eastbound_y(0), west_end, J + ARM)
        conflict_xy = (x_merge, eastbound_y(0))
    elif template_id == 4:
        xb = x0 + 45.0
        lo, hi = eastbound_y(0), LANE_W / 2
        ego = join(np.array([(x0, lo), (xb - 22.0, lo)]),
                   cosine_shift(xb - 22.0, xb - 8.0, lo, hi),
                   cosine_shift(xb + 8.0, xb + 22.0, hi, lo),
                   np.array([(xb + 22.0, lo), (J + EXIT_LEN, lo)]))
        blockers.append((xb, lo, 0.0))
        adv_path = np.array([(J + ARM, hi), (west_end, hi)])
        conflict_xy = (xb, hi)
    else:
        ego = _ego_path(layout, maneuver)
        conflict_xy = None
        if template_id in (5, 8):
            adv_path = _cross_path(layout)
        elif template_id == 6:
            adv_path = np.array([(J + ARM, LANE_W / 2), (west_end, LANE_W / 2)])
        elif template_id == 7:
            adv_path = np.array([(-LANE_W / 2, J + ARM), (-LANE_W / 2, -J - ARM)])

    route = Route(template_id, route_id, ego, wmap, layout)
    j0, j1 = junction_span(route.polyline)
    route.maneuvers = [(j0, j1, maneuver)]
    anchors.update(junction_entry=j0, junction_exit=j1)
    route.anchors = anchors

    geo = ScenarioGeometry(template, route, "vehicle")
    geo.blockers = blockers
    if template.is_obstacle:
        geo.adversary_kind = ("cyclist" if route_id % 2 == 0 else "pedestrian") if template_id == 1 \
            else ("pedestrian" if route_id % 2 == 0 else "cyclist")
        geo.anchor_s = 0.0 if template_id == 1 else j1
        return geo

    adv_poly = Polyline(adv_path)
    if template_id == 7:
        x, y, _ = route.polyline.point_at(j1)
        geo.ego_conflict_s = j1
        geo.adv_conflict_s = adv_poly.project(x, y)[0]
    elif conflict_xy is not None:
        geo.ego_conflict_s = route.polyline.project(*conflict_xy)[0]
        geo.adv_conflict_s = adv_poly.project(*conflict_xy)[0]
    else:
        geo.ego_conflict_s, geo.adv_conflict_s = first_crossing(ego, adv_path)
    geo.adversary_path = adv_path
    if template_id == 3:
        geo.adversary_lead, geo.adversary_cruises, geo.adversary_follows = 30.0, True, True
    elif template_id == 4:
        geo.adversary_lead = 40.0
    else:
        geo.adversary_lead = 20.0
    route.anchors["conflict"] = geo.ego_conflict_s
    return geo


def get_route(template_id: int, route_id: int) -> Route:
    return scenario_geometry(template_id, route_id).route

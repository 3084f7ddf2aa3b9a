"""Scenario specs: validation, instantiation into worlds, and the scenario library file."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..sim.vehicle import make_state
from ..sim.world import DT, Actor, WorldState, make_world
from .behaviors import (AdversarialBehavior, BenignBehavior, CrossingObstacle, DrivePath,
                        EgoProximityTrigger, EgoRouteTrigger)
from .templates import N_ROUTES, TEMPLATES, get_template, scenario_geometry

GENERATOR_IDS = ("LC", "AS", "CS", "AT", "benign", "random")
LIBRARY_SCHEMA = "scenbench.library/1"
ADVERSARY_ID = 1


class SpecError(ValueError):
    """Spec does not match its template schema."""


class PlacementError(ValueError):
    """Parameters put an actor outside the drivable area."""


@dataclass(frozen=True)
class ScenarioSpec:
    template_id: int
    route_id: int
    generator_id: str
    params: tuple
    seed: int = 0
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def template(self):
        return get_template(self.template_id)

    @property
    def key(self) -> tuple:
        return (self.template_id, self.route_id, self.generator_id, self.params, self.seed)

    def to_dict(self) -> dict:
        names = TEMPLATES[self.template_id].names if self.template_id in TEMPLATES else \
            [f"p{i}" for i in range(len(self.params))]
        return {"template_id": self.template_id, "route_id": self.route_id,
                "generator_id": self.generator_id,
                "params": dict(zip(names, self.params)), "seed": self.seed,
                "provenance": dict(self.provenance)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        tid = int(d["template_id"])
        params = d["params"]
        if isinstance(params, dict):
            names = get_template(tid).names
            missing = [n for n in names if n not in params]
            if missing or len(params) != len(names):
                raise SpecError(f"params do not match the schema of template {tid}: missing {missing}")
            params = [params[n] for n in names]
        return cls(tid, int(d["route_id"]), str(d["generator_id"]), tuple(params),
                   int(d.get("seed", 0)), dict(d.get("provenance", {})))


def benign_spec(template_id: int, route_id: int, seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec(template_id, route_id, "benign", get_template(template_id).benign_params, seed)


def validate_spec(spec: ScenarioSpec) -> list[str]:
    """Human-readable violations; empty iff the spec is well formed."""
    if spec.template_id not in TEMPLATES:
        return [f"unknown template {spec.template_id}"]
    out = []
    if not 0 <= spec.route_id < N_ROUTES:
        out.append(f"unknown route {spec.route_id}")
    if spec.generator_id not in GENERATOR_IDS:
        out.append(f"unknown generator {spec.generator_id!r}")
    schema = TEMPLATES[spec.template_id].parameter_schema
    if len(spec.params) != len(schema):
        out.append(f"arity violation: expected {len(schema)} params, got {len(spec.params)}")
        return out
    for value, (name, lo, hi, unit) in zip(spec.params, schema):
        if not math.isfinite(value):
            out.append(f"{name} is not finite")
        elif value < lo or value > hi:
            out.append(f"{name}={value:g} outside [{lo:g}, {hi:g}] {unit}")
    return out




def _offset_path(poly, s0: float, lat: float, extend: float = 60.0) -> np.ndarray:
    ss = np.append(np.arange(s0, poly.length, 1.0), poly.length)
    pts = []
    for s in ss:
        x, y, th = poly.point_at(s)
        pts.append((x - lat * math.sin(th), y + lat * math.cos(th)))
    x, y, th = poly.point_at(poly.length)
    pts.append((pts[-1][0] + extend * math.cos(th), pts[-1][1] + extend * math.sin(th)))
    pts = np.array(pts)
    keep = np.concatenate([[True], np.hypot(*np.diff(pts, axis=0).T) > 1e-6])
    return pts[keep]


def instantiate_scenario(spec: ScenarioSpec, strict: bool = True, dt: float = DT) -> WorldState:
    """Build the initial world for ``spec``.

    ``strict=False`` skips the drivable-area placement check (constraint-aware search
    handles infeasible placements itself).
    """
    problems = validate_spec(spec)
    if problems:
        raise SpecError("; ".join(problems))
    geo = scenario_geometry(spec.template_id, spec.route_id)
    route, wmap = geo.route, geo.map
    template = geo.template
    p = spec.params
    benign = spec.generator_id == "benign"
    x, y, th = route.polyline.point_at(0.0)
    ego = make_state("vehicle", x, y, th, 0.0)
    actors = []

    if template.is_obstacle:
        spawn, lat, trigger, speed = p
        s = geo.anchor_s + spawn
        bx, by, bth = route.polyline.point_at(s)
        ox, oy = bx - lat * math.sin(bth), by + lat * math.cos(bth)
        if benign:
            path = DrivePath(_offset_path(route.polyline, s, lat), wmap, speed_limit=speed)
            behavior = BenignBehavior(path, ADVERSARY_ID)
            heading = bth
        else:
            behavior = CrossingObstacle(speed, EgoProximityTrigger(trigger))
            heading = bth - math.pi / 2 if lat > 0 else bth + math.pi / 2
        actors.append(Actor(ADVERSARY_ID, geo.adversary_kind,
                            make_state(geo.adversary_kind, ox, oy, heading, 0.0), "adversary", behavior))
    else:
        gap, cruise, trigger = p[:3]
        profile = [(p[3 + 2 * k], p[4 + 2 * k]) for k in range(4)]
        s0 = geo.adv_conflict_s + (template.benign_side * gap if benign else -(gap + geo.adversary_lead))
        path = DrivePath(geo.adversary_path, wmap)
        ax, ay, ath = path.polyline.point_at(s0)
        if benign:
            behavior = BenignBehavior(path, ADVERSARY_ID)
        else:
            behavior = AdversarialBehavior(path, cruise, EgoRouteTrigger(geo.trigger_point_s, trigger), profile,
                                           cruise_before_trigger=geo.adversary_cruises,
                                           follow=geo.adversary_follows)
        v0 = cruise if geo.adversary_cruises and not benign else 0.0
        actors.append(Actor(ADVERSARY_ID, "vehicle", make_state("vehicle", ax, ay, ath, v0),
                            "adversary", behavior))
    for k, (bx, by, bh) in enumerate(geo.blockers):
        actors.append(Actor(ADVERSARY_ID + 1 + k, "vehicle", make_state("vehicle", bx, by, bh, 0.0), "blocker"))

    if strict:
        for a in actors:
            if not wmap.is_drivable(a.state.x, a.state.y):
                raise PlacementError(f"actor {a.actor_id} placed off the drivable area at "
                                     f"({a.state.x:.2f}, {a.state.y:.2f})")
    return make_world(ego, actors, wmap, route, dt)


def world_snapshot(world: WorldState) -> tuple:
    """Plain-data view of a world for equality checks (behaviors are compared by type)."""
    return (world.tick, world.dt, world.ego.as_list(), world.map.name,
            tuple((a.actor_id, a.kind, a.role, tuple(a.state.as_list()), type(a.behavior).__name__)
                  for a in world.actors))


# -- library file -----------------------------------------------------------
def write_library(path, specs, header: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(library_text(specs, header))


def library_text(specs, header: dict | None = None) -> str:
    head = {"schema": LIBRARY_SCHEMA, **(header or {})}
    lines = [json.dumps(head, sort_keys=True)]
    lines += [json.dumps(s.to_dict(), sort_keys=True) for s in specs]
    return "\n".join(lines) + "\n"


def read_library(path) -> tuple[dict, list[ScenarioSpec]]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise SpecError("empty library file")
    head = json.loads(lines[0])
    if head.get("schema") != LIBRARY_SCHEMA:
        raise SpecError(f"library schema mismatch: {head.get('schema')!r} vs {LIBRARY_SCHEMA!r}")
    specs = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            specs.append(ScenarioSpec.from_dict(json.loads(ln)))
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError(f"line {i}: {exc}") from None
    return head, specs

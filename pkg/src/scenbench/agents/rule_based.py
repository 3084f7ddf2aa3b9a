"""Rule-following ego baseline built on the traffic autopilot."""
from __future__ import annotations

from ..scenarios.behaviors import DrivePath, RuleDriver
from ..sim.vehicle import Control


class RuleBasedPolicy:
    """Pure pursuit on the ego route with IDM following, lights and stop signs."""

    kind = "rule_based"

    def __init__(self):
        self._driver = None
        self._route = None

    def reset(self, world) -> None:
        route = world.route
        if self._route is not route:
            path = DrivePath(route.polyline, world.map, route.speed_limit, route.lane_width)
            self._path = path
            self._route = route
        self._driver = RuleDriver(self._path, "ego")

    def __call__(self, world) -> Control:
        if self._driver is None or self._route is not world.route:
            self.reset(world)
        return self._driver.control(world.ego, world)


def rule_based_policy(world, _cache={}) -> Control:
    """Functional form; keeps one driver per route object."""
    pol = _cache.get(id(world.route))
    if pol is None or pol._route is not world.route:
        pol = _cache[id(world.route)] = RuleBasedPolicy()
        pol.reset(world)
    return pol(world)

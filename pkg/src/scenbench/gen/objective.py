"""Risk objective and the knowledge-constraint violation measure."""
from __future__ import annotations

import numpy as np

D_NORM = 10.0


def risk_value(collided: bool, d_min: float) -> float:
    return float(collided) + 0.5 * max(0.0, 1.0 - d_min / D_NORM)


def risk_objective(trace) -> float:
    """1 for a collision plus a proximity bonus from the closest adversary approach."""
    return risk_value(trace.collided, trace.min_adversary_distance)


def constraint_violation(trace, world) -> float:
    """Fraction of ticks a vehicle adversary spends off the drivable area. Ticks after it
    has driven out of the modelled road network count as on-road."""
    idx = [j for j, m in enumerate(trace.actor_meta) if m["role"] == "adversary" and m["kind"] == "vehicle"]
    if not idx:
        return 0.0
    wmap = world.map
    off = 0
    total = 0
    for j in idx:
        for x, y in trace.actors[:, j, :2]:
            off += wmap.contains(float(x), float(y)) and not wmap.is_drivable(float(x), float(y))
            total += 1
    return float(off / total) if total else 0.0

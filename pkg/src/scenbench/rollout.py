"""Closed-loop episode rollout with the shared termination rules."""
from __future__ import annotations

import math

import numpy as np

from .sim.trace import EpisodeTrace
from .sim.vehicle import Control
from .sim.world import EPISODE_LIMIT_S, WorldState, world_step

OFFROUTE_LIMIT = 10.0    # m of lateral deviation while off the road ends the episode


def termination(world: WorldState, limit_s: float = EPISODE_LIMIT_S) -> str | None:
    """Reason the episode ends at this world, or None to continue."""
    new = world.events_at(world.tick) if world.tick > 0 else []
    kinds = {e.kind for e in new}
    if "collision" in kinds:
        return "collision"
    if "route_complete" in kinds:
        return "route_complete"
    sens = world.sensing
    if sens.offroad and sens.deviation > OFFROUTE_LIMIT:
        return "off_route"
    if world.tick * world.dt >= limit_s - 1e-9:
        return "timeout"
    return None


def actor_controls(world: WorldState) -> dict:
    return {a.actor_id: a.behavior.control(a, world) for a in world.actors if not a.static}


def _adversary_distance(world: WorldState) -> float:
    d = math.inf
    for a in world.actors:
        if a.role == "adversary":
            d = min(d, math.hypot(a.state.x - world.ego.x, a.state.y - world.ego.y))
    return d


def run_episode(world: WorldState, ego_policy, limit_s: float = EPISODE_LIMIT_S,
                header: dict | None = None) -> EpisodeTrace:
    """Roll ``world`` forward until a termination rule fires.

    ``ego_policy`` is a callable ``world -> Control``; if it has a ``reset(world)``
    method that is called first.
    """
    if hasattr(ego_policy, "reset"):
        ego_policy.reset(world)
    ids = [a.actor_id for a in world.actors]
    n = len(ids)
    ego_rows = [world.ego.as_list()]
    ego_ctl = [[math.nan, math.nan]]
    act_rows = [[a.state.as_list() for a in world.actors]]
    act_ctl = [[[math.nan, math.nan]] * n]
    sens = world.sensing
    signals = [[sens.progress, sens.deviation, float(sens.offroad)]]
    min_d = _adversary_distance(world)
    reason = termination(world, limit_s)
    while reason is None:
        ctrls = actor_controls(world)
        ego_c = ego_policy(world)
        if not isinstance(ego_c, Control):
            ego_c = Control.clipped(*ego_c)
        world = world_step(world, ego_c, ctrls)
        ego_rows.append(world.ego.as_list())
        ego_ctl.append([ego_c.acceleration, ego_c.steering])
        act_rows.append([a.state.as_list() for a in world.actors])
        act_ctl.append([[ctrls[i].acceleration, ctrls[i].steering] if i in ctrls else [math.nan, math.nan]
                        for i in ids])
        sens = world.sensing
        signals.append([sens.progress, sens.deviation, float(sens.offroad)])
        min_d = min(min_d, _adversary_distance(world))
        reason = termination(world, limit_s)
    T = len(ego_rows)
    return EpisodeTrace(
        dt=world.dt,
        ego=np.array(ego_rows),
        ego_controls=np.array(ego_ctl, dtype=float),
        actor_ids=ids,
        actor_meta=[{"kind": a.kind, "role": a.role} for a in world.actors],
        actors=np.array(act_rows, dtype=float).reshape(T, n, 4),
        actor_controls=np.array(act_ctl, dtype=float).reshape(T, n, 2),
        events=list(world.event_log),
        end_reason=reason,
        header=dict(header or {}),
        min_adversary_distance=min_d,
        signals=np.array(signals),
    )

"""Roll scenario specs out against an agent."""
from __future__ import annotations

from ..agents.registry import make_controller
from ..rollout import run_episode
from ..scenarios.spec import instantiate_scenario
from .metrics import MetricRecord, episode_signals


def rollout_traces(specs, agent, seed: int = 0) -> list:
    """One EpisodeTrace per spec, each with a fresh controller seeded by ``seed``."""
    out = []
    for spec in specs:
        world = instantiate_scenario(spec)
        out.append(run_episode(world, make_controller(agent, seed=seed)))
    return out


def rollout_records(specs, agent, seed: int = 0) -> list[MetricRecord]:
    records = []
    for spec in specs:
        world = instantiate_scenario(spec)
        trace = run_episode(world, make_controller(agent, seed=seed))
        records.append(episode_signals(trace, world.route))
    return records

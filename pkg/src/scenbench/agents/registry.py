"""Turn agent specs (names, checkpoint paths or Policy objects) into ego controllers."""
from __future__ import annotations

from .policy import Policy, PolicyController
from .rule_based import RuleBasedPolicy


def load_agent(agent):
    if isinstance(agent, (Policy, RuleBasedPolicy)) or agent == "rule_based":
        return agent
    return Policy.load(agent)


def make_controller(agent, seed: int = 0, mode: str = "deterministic"):
    agent = load_agent(agent)
    if agent == "rule_based" or isinstance(agent, RuleBasedPolicy):
        return RuleBasedPolicy()
    return PolicyController(agent, mode, seed)


def agent_name(agent) -> str:
    agent = load_agent(agent)
    if agent == "rule_based" or isinstance(agent, RuleBasedPolicy):
        return "rule_based"
    return agent.meta.get("name") or f"{agent.kind}-{agent.space}-s{agent.meta.get('seed', 0)}"

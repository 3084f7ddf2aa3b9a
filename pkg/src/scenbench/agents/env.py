"""Gym-style environments: benign driving episodes and a one-step bandit for unit checks."""
from __future__ import annotations

import numpy as np

from ..rollout import actor_controls, termination
from ..scenarios.spec import benign_spec, instantiate_scenario
from ..sim.world import EPISODE_LIMIT_S, world_step
from .observation import SPACES, extract_observation
from .policy import DRIVING_ACT_SCALE, action_to_control
from .reward import RewardInfo, compute_reward, reward_terms


class DrivingEnv:
    """Episodes on randomly drawn benign scenarios.

    Each step holds the action for ``action_repeat`` ticks. Collisions and leaving
    the lane by more than ``max_deviation`` terminate; route completion and the time
    limit truncate.
    """

    def __init__(self, space: str = "4D", templates=tuple(range(1, 9)), routes=tuple(range(10)),
                 action_repeat: int = 2, max_deviation: float = 3.5, limit_s: float = EPISODE_LIMIT_S,
                 spec_fn=None):
        self.space = space
        self.obs_dim = SPACES[space]
        self.act_scale = np.array(DRIVING_ACT_SCALE)
        self.templates = tuple(templates)
        self.routes = tuple(routes)
        self.action_repeat = action_repeat
        self.max_deviation = max_deviation
        self.limit_s = limit_s
        self.spec_fn = spec_fn
        self.world = None

    def config(self) -> dict:
        return {"space": self.space, "templates": list(self.templates), "routes": list(self.routes),
                "action_repeat": self.action_repeat, "max_deviation": self.max_deviation,
                "limit_s": self.limit_s}

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.spec_fn is not None:
            spec = self.spec_fn(rng)
        else:
            spec = benign_spec(int(rng.choice(self.templates)), int(rng.choice(self.routes)), int(seed))
        self.spec = spec
        self.world = instantiate_scenario(spec)
        return extract_observation(self.world, self.space)

    def step(self, action):
        ctrl = action_to_control(action)
        world = self.world
        collided = False
        reason = None
        for _ in range(self.action_repeat):
            world = world_step(world, ctrl, actor_controls(world))
            reason = termination(world, self.limit_s)
            if any(e.kind == "collision" for e in world.events_at(world.tick)):
                collided = True
            if reason is not None:
                break
        self.world = world
        sens = world.sensing
        info = RewardInfo(world.ego.speed, ctrl.steering, collided, sens.invading)
        r = compute_reward(info)
        terminated = collided or sens.deviation > self.max_deviation or reason == "off_route"
        truncated = not terminated and reason is not None
        obs = extract_observation(world, self.space)
        return obs, r, terminated, truncated, {"terms": reward_terms(info), "reason": reason,
                                               "progress": sens.progress / world.route.length,
                                               "collision": collided}


class BanditEnv:
    """One-step continuous bandit with reward -(a - optimum)^2 on a single action in [-1, 1]."""

    def __init__(self, optimum: float = 0.5):
        self.optimum = optimum
        self.obs_dim = 1
        self.act_scale = np.array([1.0])
        self.space = "custom"

    def config(self) -> dict:
        return {"bandit": self.optimum}

    def reset(self, seed: int) -> np.ndarray:
        return np.zeros(1)

    def step(self, action):
        a = float(np.asarray(action).ravel()[0])
        return np.zeros(1), -(a - self.optimum) ** 2, True, False, {}

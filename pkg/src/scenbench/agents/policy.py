"""MLP driving policies stored as flat parameter vectors, with a numpy forward pass."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..sim.vehicle import Control, control_from_action, control_from_pedals
from .observation import OBS_SCALE, SPACES, extract_observation

POLICY_SCHEMA = "scenbench.policy/1"
POLICY_KINDS = ("rule_based", "stochastic_pg", "deterministic_pg")
DRIVING_ACT_SCALE = (3.0, 0.3)      # acceleration, steering
HIDDEN = (256, 256)


def layer_sizes(obs_dim: int, hidden, act_dim: int) -> list[tuple[int, int]]:
    dims = [obs_dim, *hidden, act_dim]
    return list(zip(dims[:-1], dims[1:]))


def n_params(obs_dim: int, hidden, act_dim: int, stochastic: bool) -> int:
    n = sum(i * o + o for i, o in layer_sizes(obs_dim, hidden, act_dim))
    return n + (act_dim if stochastic else 0)


@dataclass
class Policy:
    kind: str
    space: str
    obs_dim: int
    act_scale: np.ndarray
    params: np.ndarray
    hidden: tuple = HIDDEN
    obs_scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("stochastic_pg", "deterministic_pg"):
            raise ValueError(f"not a network policy kind: {self.kind!r}")
        self.act_scale = np.asarray(self.act_scale, dtype=float)
        self.params = np.asarray(self.params, dtype=float)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.obs_scale is None:
            self.obs_scale = OBS_SCALE.get(self.space, np.ones(self.obs_dim))
        self.obs_scale = np.asarray(self.obs_scale, dtype=float)
        want = n_params(self.obs_dim, self.hidden, self.act_dim, self.stochastic)
        if self.params.shape != (want,):
            raise ValueError(f"expected {want} parameters, got {self.params.shape}")
        self._unpack()

    @property
    def act_dim(self) -> int:
        return len(self.act_scale)

    @property
    def stochastic(self) -> bool:
        return self.kind == "stochastic_pg"

    def _unpack(self):
        layers, k = [], 0
        for i, o in layer_sizes(self.obs_dim, self.hidden, self.act_dim):
            w = self.params[k:k + i * o].reshape(i, o)
            k += i * o
            b = self.params[k:k + o]
            k += o
            layers.append((w, b))
        self._layers = layers
        self.log_std = self.params[k:] if self.stochastic else None

    def mean_preactivation(self, obs: np.ndarray) -> np.ndarray:
        h = np.asarray(obs, dtype=float) * self.obs_scale
        for w, b in self._layers[:-1]:
            h = np.tanh(h @ w + b)
        w, b = self._layers[-1]
        return h @ w + b

    # -- checkpoint --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"schema": POLICY_SCHEMA, "kind": self.kind, "space": self.space, "obs_dim": self.obs_dim,
                "act_scale": self.act_scale.tolist(), "hidden": list(self.hidden),
                "obs_scale": self.obs_scale.tolist(), "params": self.params.tolist(), "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "Policy":
        if d.get("schema") != POLICY_SCHEMA:
            raise ValueError(f"policy schema mismatch: {d.get('schema')!r} vs {POLICY_SCHEMA!r}")
        return cls(d["kind"], d["space"], int(d["obs_dim"]), d["act_scale"], d["params"],
                   tuple(d["hidden"]), d["obs_scale"], d.get("meta", {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Policy":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_policy(kind: str, space: str = "4D", obs_dim: int | None = None, act_scale=DRIVING_ACT_SCALE,
                hidden=HIDDEN, rng=None, log_std: float = -0.5, zero: bool = False) -> Policy:
    obs_dim = SPACES[space] if obs_dim is None else obs_dim
    act_dim = len(act_scale)
    stochastic = kind == "stochastic_pg"
    if zero:
        return Policy(kind, space, obs_dim, act_scale, np.zeros(n_params(obs_dim, hidden, act_dim, stochastic)),
                      hidden)
    rng = np.random.default_rng(rng)
    parts = []
    for i, o in layer_sizes(obs_dim, hidden, act_dim):
        parts += [rng.uniform(-1, 1, i * o) / np.sqrt(i), np.zeros(o)]
    if stochastic:
        parts.append(np.full(act_dim, log_std))
    return Policy(kind, space, obs_dim, act_scale, np.concatenate(parts), hidden)


def act(policy: Policy, obs, mode: str = "deterministic", rng=None) -> np.ndarray:
    """Squashed action; stochastic mode samples in pre-squash space from ``rng``."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (policy.obs_dim,):
        raise ValueError(f"observation has shape {obs.shape}, policy expects ({policy.obs_dim},)")
    u = policy.mean_preactivation(obs)
    if mode == "stochastic" and policy.stochastic:
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        u = u + np.exp(policy.log_std) * rng.standard_normal(policy.act_dim)
    elif mode not in ("stochastic", "deterministic"):
        raise ValueError(f"unknown mode {mode!r}")
    return np.tanh(u) * policy.act_scale


def action_to_control(action) -> Control:
    throttle, brake, steer = control_from_action(float(action[0]), float(action[1]))
    return control_from_pedals(throttle, brake, steer)


class PolicyController:
    """Drives the ego with a network policy, holding each action for ``action_repeat`` ticks."""

    def __init__(self, policy: Policy, mode: str = "deterministic", seed: int = 0, action_repeat: int = 2):
        self.policy = policy
        self.mode = mode
        self.seed = seed
        self.action_repeat = action_repeat
        self.reset()

    @property
    def kind(self) -> str:
        return self.policy.kind

    def reset(self, world=None) -> None:
        self.rng = np.random.default_rng(self.seed)
        self._held = None
        self._count = 0

    def __call__(self, world) -> Control:
        if self._held is None or self._count % self.action_repeat == 0:
            obs = extract_observation(world, self.policy.space)
            self._held = action_to_control(act(self.policy, obs, self.mode, self.rng))
        self._count += 1
        return self._held

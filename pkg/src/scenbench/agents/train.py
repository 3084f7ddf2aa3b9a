"""Desk-scale policy-gradient training: a clipped-surrogate on-policy learner and a
deterministic off-policy actor-critic learner. Torch does the gradients; the learned
actor is exported as a flat numpy ``Policy``."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .policy import HIDDEN, Policy, act
from .observation import OBS_SCALE


class TrainingDivergence(RuntimeError):
    """Raised when a loss or parameter becomes non-finite."""


@dataclass
class PGConfig:
    total_steps: int = 150_000
    steps_per_iter: int = 2048
    epochs: int = 10
    minibatch: int = 128
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    target_kl: float = 0.01
    pi_lr: float = 3e-4
    vf_lr: float = 1e-3
    init_log_std: float = -0.5
    hidden: tuple = HIDDEN


@dataclass
class DPGConfig:
    total_steps: int = 60_000
    warmup: int = 600
    batch: int = 64
    buffer: int = 100_000
    gamma: float = 0.99
    polyak: float = 0.995
    noise: float = 0.1
    pi_lr: float = 3e-4
    q_lr: float = 1e-3
    updates_per_step: float = 1.0
    hidden: tuple = HIDDEN


def mlp(sizes, out_act=None) -> nn.Sequential:
    layers = []
    for k, (i, o) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(nn.Linear(i, o))
        if k < len(sizes) - 2:
            layers.append(nn.Tanh())
    if out_act is not None:
        layers.append(out_act)
    return nn.Sequential(*layers)


def flatten_mlp(net: nn.Sequential) -> np.ndarray:
    """Flat layout matching ``Policy``: per layer W (in x out, row-major) then b."""
    parts = []
    for m in net:
        if isinstance(m, nn.Linear):
            parts.append(m.weight.detach().double().numpy().T.ravel())
            parts.append(m.bias.detach().double().numpy().ravel())
    return np.concatenate(parts)


def config_hash(cfg: dict) -> str:
    return hashlib.blake2b(json.dumps(cfg, sort_keys=True).encode(), digest_size=8).hexdigest()


def _obs_scale(env) -> np.ndarray:
    return OBS_SCALE.get(env.space, np.ones(env.obs_dim))


def _check(*values):
    for v in values:
        if not math.isfinite(float(v)):
            raise TrainingDivergence("non-finite loss")


def gaussian_score_gradient(mean, log_std, samples, rewards, baseline: float = 0.0):
    """Score-function (REINFORCE) gradient of E[r] for a diagonal Gaussian.

    Returns (d/d mean, d/d log_std), each averaged over the batch.
    """
    mean = np.asarray(mean, float)
    std = np.exp(np.asarray(log_std, float))
    z = (np.asarray(samples, float) - mean) / std
    adv = (np.asarray(rewards, float) - baseline)[:, None]
    g_mean = (adv * z / std).mean(axis=0)
    g_log_std = (adv * (z ** 2 - 1.0)).mean(axis=0)
    return g_mean, g_log_std


# -- stochastic on-policy -------------------------------------------------------
def train_stochastic_pg(env, cfg: PGConfig | None = None, seed: int = 0, log=None):
    """Returns (Policy, training curve). ``log`` receives one dict per iteration."""
    cfg = cfg or PGConfig()
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    d, k = env.obs_dim, len(env.act_scale)
    scale = torch.as_tensor(_obs_scale(env), dtype=torch.float32)
    pi = mlp([d, *cfg.hidden, k])
    vf = mlp([d, *cfg.hidden, 1])
    log_std = nn.Parameter(torch.full((k,), cfg.init_log_std))
    pi_opt = torch.optim.Adam(list(pi.parameters()) + [log_std], lr=cfg.pi_lr)
    vf_opt = torch.optim.Adam(vf.parameters(), lr=cfg.vf_lr)
    act_scale = np.asarray(env.act_scale, float)

    curve = []
    steps = 0
    ep_ret, ep_len = 0.0, 0
    obs = env.reset(int(rng.integers(2 ** 31)))
    finished = []
    t0 = time.time()
    it = 0
    while steps < cfg.total_steps:
        n = min(cfg.steps_per_iter, cfg.total_steps - steps)
        O = np.zeros((n, d), np.float32)
        U = np.zeros((n, k), np.float32)
        R = np.zeros(n)
        V = np.zeros(n + 1)
        nonterm = np.zeros(n)     # 0 where the step ended the episode without bootstrap
        cut = np.zeros(n, bool)   # episode boundary after this step
        with torch.no_grad():
            for t in range(n):
                o = torch.as_tensor(obs, dtype=torch.float32) * scale
                mu = pi(o)
                u = mu + torch.exp(log_std) * torch.as_tensor(rng.standard_normal(k), dtype=torch.float32)
                V[t] = float(vf(o))
                a = np.tanh(u.numpy().astype(float)) * act_scale
                nobs, r, term, trunc, _ = env.step(a)
                O[t], U[t] = obs, u.numpy()
                ep_ret += r
                ep_len += 1
                if trunc:
                    r += cfg.gamma * float(vf(torch.as_tensor(nobs, dtype=torch.float32) * scale))
                R[t] = r
                nonterm[t] = 0.0 if (term or trunc) else 1.0
                cut[t] = term or trunc
                if term or trunc:
                    finished.append((ep_ret, ep_len))
                    ep_ret, ep_len = 0.0, 0
                    obs = env.reset(int(rng.integers(2 ** 31)))
                else:
                    obs = nobs
            V[n] = float(vf(torch.as_tensor(obs, dtype=torch.float32) * scale))
        steps += n
        # GAE; a cut step's successor value is masked out
        adv = np.zeros(n)
        last = 0.0
        for t in reversed(range(n)):
            delta = R[t] + cfg.gamma * V[t + 1] * nonterm[t] - V[t]
            last = delta + cfg.gamma * cfg.lam * nonterm[t] * last
            adv[t] = last
        ret = adv + V[:n]
        adv_n = (adv - adv.mean()) / (adv.std() + 1e-8)

        Ot = torch.as_tensor(O) * scale
        Ut = torch.as_tensor(U)
        At = torch.as_tensor(adv_n, dtype=torch.float32)
        Rt = torch.as_tensor(ret, dtype=torch.float32)
        with torch.no_grad():
            logp_old = _normal_logp(pi(Ot), log_std, Ut)
        kl = 0.0
        stop = False
        for _ in range(cfg.epochs):
            perm = torch.as_tensor(rng.permutation(n))
            for b0 in range(0, n, cfg.minibatch):
                idx = perm[b0:b0 + cfg.minibatch]
                logp = _normal_logp(pi(Ot[idx]), log_std, Ut[idx])
                ratio = torch.exp(logp - logp_old[idx])
                clipped = torch.clamp(ratio, 1 - cfg.clip, 1 + cfg.clip) * At[idx]
                loss_pi = -torch.min(ratio * At[idx], clipped).mean()
                loss_v = ((vf(Ot[idx]).squeeze(-1) - Rt[idx]) ** 2).mean()
                _check(loss_pi.item(), loss_v.item())
                pi_opt.zero_grad()
                loss_pi.backward()
                pi_opt.step()
                vf_opt.zero_grad()
                loss_v.backward()
                vf_opt.step()
            with torch.no_grad():
                kl = float((logp_old - _normal_logp(pi(Ot), log_std, Ut)).mean())
            if kl > 1.5 * cfg.target_kl:
                stop = True
                break
        it += 1
        recent = finished[-20:]
        rec = {"iteration": it, "steps": steps, "episodes": len(finished),
               "mean_return": float(np.mean([r for r, _ in recent])) if recent else float("nan"),
               "mean_length": float(np.mean([l for _, l in recent])) if recent else float("nan"),
               "kl": kl, "early_stop": stop, "log_std": log_std.detach().numpy().tolist(),
               "wall": time.time() - t0}
        curve.append(rec)
        if log:
            log(rec)

    params = np.concatenate([flatten_mlp(pi), log_std.detach().double().numpy()])
    _check(float(np.sum(params)))
    policy = Policy("stochastic_pg", env.space, d, act_scale, params, tuple(cfg.hidden),
                    _obs_scale(env), {"seed": seed, "algorithm": "clipped-surrogate",
                                      "env_config_hash": config_hash(env.config()),
                                      "hyper": _jsonable(asdict(cfg))})
    return policy, curve


def _normal_logp(mu, log_std, u):
    return (-0.5 * ((u - mu) / torch.exp(log_std)) ** 2 - log_std - 0.5 * math.log(2 * math.pi)).sum(-1)


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# -- deterministic off-policy ----------------------------------------------------
class _Actor(nn.Module):
    def __init__(self, d, k, hidden, act_scale):
        super().__init__()
        self.net = mlp([d, *hidden, k])
        self.register_buffer("act_scale", torch.as_tensor(act_scale, dtype=torch.float32))

    def forward(self, o):
        return torch.tanh(self.net(o)) * self.act_scale


def train_deterministic_pg(env, cfg: DPGConfig | None = None, seed: int = 0, log=None):
    cfg = cfg or DPGConfig()
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    d, k = env.obs_dim, len(env.act_scale)
    act_scale = np.asarray(env.act_scale, float)
    scale = torch.as_tensor(_obs_scale(env), dtype=torch.float32)
    a_scale_t = torch.as_tensor(act_scale, dtype=torch.float32)
    actor = _Actor(d, k, cfg.hidden, act_scale)
    critic = mlp([d + k, *cfg.hidden, 1])
    actor_t, critic_t = copy.deepcopy(actor), copy.deepcopy(critic)
    for p in list(actor_t.parameters()) + list(critic_t.parameters()):
        p.requires_grad_(False)
    pi_opt = torch.optim.Adam(actor.parameters(), lr=cfg.pi_lr)
    q_opt = torch.optim.Adam(critic.parameters(), lr=cfg.q_lr)

    cap = min(cfg.buffer, cfg.total_steps)
    B_o = np.zeros((cap, d), np.float32)
    B_a = np.zeros((cap, k), np.float32)
    B_r = np.zeros(cap, np.float32)
    B_o2 = np.zeros((cap, d), np.float32)
    B_m = np.zeros(cap, np.float32)     # 1 - terminal
    size = ptr = 0

    def q(net, o, a):
        return net(torch.cat([o * scale, a / a_scale_t], -1)).squeeze(-1)

    curve, finished = [], []
    obs = env.reset(int(rng.integers(2 ** 31)))
    ep_ret, ep_len = 0.0, 0
    owed = 0.0
    t0 = time.time()
    for step in range(cfg.total_steps):
        if step < cfg.warmup:
            a = rng.uniform(-1, 1, k) * act_scale
        else:
            with torch.no_grad():
                a = actor(torch.as_tensor(obs, dtype=torch.float32) * scale).numpy().astype(float)
            a = np.clip(a + cfg.noise * act_scale * rng.standard_normal(k), -act_scale, act_scale)
        nobs, r, term, trunc, _ = env.step(a)
        B_o[ptr], B_a[ptr], B_r[ptr], B_o2[ptr], B_m[ptr] = obs, a, r, nobs, 0.0 if term else 1.0
        ptr = (ptr + 1) % cap
        size = min(size + 1, cap)
        ep_ret += r
        ep_len += 1
        if term or trunc:
            finished.append((ep_ret, ep_len))
            ep_ret, ep_len = 0.0, 0
            obs = env.reset(int(rng.integers(2 ** 31)))
        else:
            obs = nobs
        if step + 1 < cfg.warmup:
            continue
        owed += cfg.updates_per_step
        while owed >= 1.0:
            owed -= 1.0
            idx = rng.integers(0, size, cfg.batch)
            o = torch.as_tensor(B_o[idx])
            a_b = torch.as_tensor(B_a[idx])
            o2 = torch.as_tensor(B_o2[idx])
            with torch.no_grad():
                target = torch.as_tensor(B_r[idx]) + cfg.gamma * torch.as_tensor(B_m[idx]) * \
                    q(critic_t, o2, actor_t(o2 * scale))
            loss_q = ((q(critic, o, a_b) - target) ** 2).mean()
            q_opt.zero_grad()
            loss_q.backward()
            q_opt.step()
            loss_pi = -q(critic, o, actor(o * scale)).mean()
            _check(loss_q.item(), loss_pi.item())
            pi_opt.zero_grad()
            loss_pi.backward()
            pi_opt.step()
            with torch.no_grad():
                for net, tgt in ((actor, actor_t), (critic, critic_t)):
                    for p, pt in zip(net.parameters(), tgt.parameters()):
                        pt.mul_(cfg.polyak).add_((1 - cfg.polyak) * p)
        if (step + 1) % 2000 == 0 or step + 1 == cfg.total_steps:
            recent = finished[-20:]
            rec = {"steps": step + 1, "episodes": len(finished),
                   "mean_return": float(np.mean([r for r, _ in recent])) if recent else float("nan"),
                   "mean_length": float(np.mean([l for _, l in recent])) if recent else float("nan"),
                   "wall": time.time() - t0}
            curve.append(rec)
            if log:
                log(rec)

    policy = Policy("deterministic_pg", env.space, d, act_scale, flatten_mlp(actor.net), tuple(cfg.hidden),
                    _obs_scale(env), {"seed": seed, "algorithm": "deterministic-actor-critic",
                                      "env_config_hash": config_hash(env.config()),
                                      "hyper": _jsonable(asdict(cfg))})
    return policy, curve


def train_policy(algorithm: str, env, hyper: dict | None = None, seed: int = 0, log=None):
    hyper = dict(hyper or {})
    if "hidden" in hyper:
        hyper["hidden"] = tuple(hyper["hidden"])
    if algorithm == "stochastic_pg":
        return train_stochastic_pg(env, PGConfig(**hyper), seed, log)
    if algorithm == "deterministic_pg":
        return train_deterministic_pg(env, DPGConfig(**hyper), seed, log)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def evaluate_policy(env, policy, episodes: int = 10, mode: str = "deterministic", seed: int = 0):
    """Episode returns and info for ``policy`` (a Policy, or a callable obs -> action)."""
    rng = np.random.default_rng(seed)
    returns, infos = [], []
    for _ in range(episodes):
        obs = env.reset(int(rng.integers(2 ** 31)))
        total, done, info = 0.0, False, {}
        while not done:
            a = act(policy, obs, mode, rng) if isinstance(policy, Policy) else policy(obs)
            obs, r, term, trunc, info = env.step(a)
            total += r
            done = term or trunc
        returns.append(total)
        infos.append(info)
    return np.array(returns), infos

"""Black-box maximisers on the unit cube: Gaussian REINFORCE, GP-UCB, grid, PSO, random.

Every optimizer takes an objective ``f(x) -> float`` (or ``(value, feasible)`` where
noted) and returns a ``SearchResult`` with one record per evaluation.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .gp import GaussianProcess, fit_hyperparameters

PSO_INERTIA = 0.7298
PSO_C1 = 1.4962
PSO_C2 = 1.4962


@dataclass
class Evaluation:
    index: int
    iteration: int
    x: np.ndarray
    value: float
    feasible: bool = True
    wall: float = 0.0


@dataclass
class SearchResult:
    evaluations: list = field(default_factory=list)
    state: list = field(default_factory=list)     # optimizer-specific per-iteration snapshots
    diagnostic: str = ""

    @property
    def n_evals(self) -> int:
        return len(self.evaluations)

    def best(self, feasible_only: bool = True):
        pool = [e for e in self.evaluations if e.feasible or not feasible_only]
        return max(pool, key=lambda e: e.value) if pool else None

    def incumbents(self) -> np.ndarray:
        """Running best value after each evaluation."""
        return np.maximum.accumulate([e.value for e in self.evaluations]) if self.evaluations else np.array([])


class _Budget:
    def __init__(self, f, budget: int, result: SearchResult):
        self.f = f
        self.left = int(budget)
        self.result = result
        self.t0 = time.perf_counter()

    def __call__(self, x, iteration: int) -> float:
        if self.left <= 0:
            raise RuntimeError("evaluation budget exhausted")
        self.left -= 1
        out = self.f(np.asarray(x, float))
        value, feasible = out if isinstance(out, tuple) else (out, True)
        self.result.evaluations.append(Evaluation(len(self.result.evaluations), iteration,
                                                  np.array(x, float), float(value), bool(feasible),
                                                  time.perf_counter() - self.t0))
        return float(value)


# -- random ------------------------------------------------------------------
def random_search(f, dim: int, budget: int, rng) -> SearchResult:
    res = SearchResult()
    ev = _Budget(f, budget, res)
    X = rng.uniform(0.0, 1.0, (budget, dim))
    for i, x in enumerate(X):
        ev(x, i)
    return res


# -- Gaussian REINFORCE ------------------------------------------------------------
def reinforce_search(f, dim: int, budget: int, rng, batch: int = 10, lr: float = 0.1,
                     init_mean=None, init_std: float = 0.25, min_std: float = 0.02,
                     baseline_decay: float = 0.8) -> SearchResult:
    """Diagonal Gaussian over the cube, updated by the score-function gradient with a
    moving-average reward baseline. Samples are clipped into the cube."""
    res = SearchResult()
    ev = _Budget(f, budget, res)
    mean = np.full(dim, 0.5) if init_mean is None else np.array(init_mean, float)
    log_std = np.full(dim, math.log(init_std))
    baseline = None
    it = 0
    while ev.left > 0:
        n = min(batch, ev.left)
        std = np.exp(log_std)
        raw = mean + std * rng.standard_normal((n, dim))
        xs = np.clip(raw, 0.0, 1.0)
        r = np.array([ev(x, it) for x in xs])
        if baseline is None:
            baseline = float(r.mean())
        adv = r - baseline
        scale = adv.std() if n > 1 and adv.std() > 1e-12 else max(abs(adv).max(), 1e-12)
        z = (raw - mean) / std
        g_mean = (adv[:, None] * z / std).mean(0) / scale
        g_log_std = (adv[:, None] * (z ** 2 - 1.0)).mean(0) / scale
        mean = np.clip(mean + lr * std ** 2 * g_mean, 0.0, 1.0)
        log_std = np.maximum(log_std + 0.5 * lr * g_log_std, math.log(min_std))
        baseline = baseline_decay * baseline + (1 - baseline_decay) * float(r.mean())
        res.state.append({"iteration": it, "mean": mean.tolist(), "std": np.exp(log_std).tolist(),
                          "baseline": baseline})
        it += 1
    return res


# -- GP-UCB ----------------------------------------------------------------------
def bayes_opt(f, dim: int, budget: int, rng, kappa: float = 2.0, n_init: int | None = None,
              refit_every: int = 5, n_candidates: int = 1000, n_local: int = 4) -> SearchResult:
    res = SearchResult()
    ev = _Budget(f, budget, res)
    n_init = min(budget, n_init if n_init is not None else max(5, min(10, dim + 1)))
    X = list(rng.uniform(0.0, 1.0, (n_init, dim)))
    y = [ev(x, 0) for x in X]
    gp = None
    theta = None
    it = 1
    while ev.left > 0:
        Xa, ya = np.array(X), np.array(y)
        mu_y, sd_y = ya.mean(), ya.std() if ya.std() > 1e-12 else 1.0
        yn = (ya - mu_y) / sd_y
        if gp is None or (it - 1) % refit_every == 0:
            gp = fit_hyperparameters(Xa, yn, rng, n_starts=2, init=theta)
            theta = gp.theta
        else:
            gp = GaussianProcess(gp.lengthscales, gp.signal_var, gp.noise_var).fit(Xa, yn)

        def neg_ucb(x):
            m, v = gp.predict(np.atleast_2d(x))
            return -(m + kappa * np.sqrt(v))

        cand = rng.uniform(0.0, 1.0, (n_candidates, dim))
        scores = neg_ucb(cand)
        starts = cand[np.argsort(scores)[:n_local]]
        best_x, best_v = cand[np.argmin(scores)], float(scores.min())

        def neg_ucb_grad(x):
            m, s, dm, ds = gp.predict_with_grad(x)
            return -(m + kappa * s), -(dm + kappa * ds)

        for x0 in starts:
            r = minimize(neg_ucb_grad, x0, jac=True, method="L-BFGS-B",
                         bounds=[(0.0, 1.0)] * dim, options={"maxiter": 50})
            if r.fun < best_v:
                best_x, best_v = np.clip(r.x, 0.0, 1.0), float(r.fun)
        X.append(best_x)
        y.append(ev(best_x, it))
        res.state.append({"iteration": it, "ucb": -best_v, "lengthscales": gp.lengthscales.tolist()})
        it += 1
    return res


# -- grid --------------------------------------------------------------------------
def grid_points(dim: int, points_per_dim: int) -> np.ndarray:
    """Cell-centred grid on the unit cube, in lexicographic order."""
    axis = (np.arange(points_per_dim) + 0.5) / points_per_dim
    return np.array(list(itertools.product(axis, repeat=dim)))


def grid_search(f, dim: int, budget: int, points_per_dim: int | None = None, feasible=None) -> SearchResult:
    """Evaluate every grid point passing ``feasible`` (filtered points cost nothing)."""
    res = SearchResult()
    if points_per_dim is None:
        points_per_dim = default_grid_resolution(dim, budget)
    pts = grid_points(dim, points_per_dim)
    if feasible is not None:
        pts = np.array([p for p in pts if feasible(p)]).reshape(-1, dim)
    if len(pts) == 0:
        res.diagnostic = "empty feasible grid"
        return res
    ev = _Budget(f, min(budget, len(pts)), res)
    for i, p in enumerate(pts[:budget]):
        ev(p, i)
    return res


def default_grid_resolution(dim: int, budget: int, cap: int = 4) -> int:
    n = cap
    while n > 1 and n ** dim > budget:
        n -= 1
    return n


# -- PSO ----------------------------------------------------------------------------
def pso_step(x, v, pbest, gbest, r1, r2, w=PSO_INERTIA, c1=PSO_C1, c2=PSO_C2):
    """One velocity/position update followed by reflection into the unit cube."""
    v = w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
    x = x + v
    # reflect off the faces, reversing the velocity component that crossed
    for _ in range(2):
        lo, hi = x < 0.0, x > 1.0
        x = np.where(lo, -x, x)
        x = np.where(hi, 2.0 - x, x)
        v = np.where(lo | hi, -v, v)
    return np.clip(x, 0.0, 1.0), v


def pso(f, dim: int, budget: int, rng, swarm: int = 20, iterations: int | None = None,
        w=PSO_INERTIA, c1=PSO_C1, c2=PSO_C2, vmax: float = 0.5, init_spread=None) -> SearchResult:
    """Maximise ``f``; ``f`` may return (value, feasible). Infeasible values are expected
    to be penalised by the caller already. ``init_spread`` (per dim, in (0, 1]) narrows the
    initial swarm to a band of that width around the cube centre."""
    res = SearchResult()
    swarm = min(swarm, budget)
    iterations = iterations if iterations is not None else max(1, budget // swarm)
    ev = _Budget(f, min(budget, swarm * iterations), res)
    spread = np.ones(dim) if init_spread is None else np.asarray(init_spread, dtype=float)
    x = 0.5 + spread * (rng.uniform(0.0, 1.0, (swarm, dim)) - 0.5)
    v = rng.uniform(-vmax, vmax, (swarm, dim)) * 0.5 * spread
    val = np.array([ev(p, 0) for p in x])
    pbest, pval = x.copy(), val.copy()
    g = int(np.argmax(pval))
    for it in range(1, iterations):
        r1 = rng.uniform(size=(swarm, dim))
        r2 = rng.uniform(size=(swarm, dim))
        x, v = pso_step(x, v, pbest, pbest[g], r1, r2, w, c1, c2)
        v = np.clip(v, -vmax, vmax)
        val = np.array([ev(p, it) for p in x])
        better = val > pval
        pbest[better], pval[better] = x[better], val[better]
        g = int(np.argmax(pval))
        res.state.append({"iteration": it, "gbest": float(pval[g])})
    return res

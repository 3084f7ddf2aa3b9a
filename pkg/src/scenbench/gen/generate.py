"""Scenario generation tasks: map each search algorithm onto a template's parameter space,
roll candidates out against a surrogate ego and keep the top distinct scenarios."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..agents.registry import make_controller
from ..evaluation.metrics import MetricRecord, episode_signals
from ..evaluation.runner import rollout_records
from ..rollout import run_episode
from ..scenarios.spec import PlacementError, ScenarioSpec, instantiate_scenario
from ..scenarios.templates import get_template, scenario_geometry
from .objective import constraint_violation, risk_objective
from .optimizers import SearchResult, bayes_opt, grid_search, pso, random_search, reinforce_search

GENERATORS = ("LC", "AS", "CS", "AT", "random")
AT_PENALTY = 10.0
DEDUP_TOL = 0.01
# AT starts its swarm near the unperturbed profile, where trajectories stay on the road
AT_PERTURB_SPREAD = 0.2
LC_LR = 0.3
LC_INIT_STD = 0.35


@dataclass
class GenerationTask:
    template_id: int
    route_id: int
    generator: str
    surrogate: object = "rule_based"     # agent spec understood by make_controller
    budget: int = 100
    keep_k: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.budget < self.keep_k:
            raise ValueError("budget must be at least keep_k")

    @property
    def template(self):
        return get_template(self.template_id)


@dataclass
class GenerationOutput:
    task: GenerationTask
    specs: list                       # kept ScenarioSpecs, best first
    records: list                     # MetricRecord of each kept spec against the surrogate
    log: list                         # one dict per evaluation
    n_evals: int
    diagnostic: str = ""
    state: list = field(default_factory=list)

    @property
    def collision_rate(self) -> float:
        return float(np.mean([r.c for r in self.records])) if self.records else float("nan")


def searched_dims(template, generator: str) -> list[int]:
    """Parameter indices a generator searches; the rest stay at zero perturbation."""
    if generator in ("LC", "CS"):
        return list(range(template.initial_condition_dims))
    return list(range(template.dim))


def params_from_unit(template, dims, u) -> tuple:
    lo, hi = template.lower, template.upper
    full = np.clip(np.zeros(template.dim), lo, hi)
    full[dims] = lo[dims] + np.clip(u, 0.0, 1.0) * (hi[dims] - lo[dims])
    return tuple(float(v) for v in full)


def unit_from_params(template, params) -> np.ndarray:
    lo, hi = template.lower, template.upper
    return (np.asarray(params, float) - lo) / (hi - lo)


def evaluate_objective(task: GenerationTask, params, strict: bool = True):
    """(J, trace, violation) of one candidate. ``strict=False`` tolerates off-road placement
    and reports it through the violation measure instead of raising."""
    spec = ScenarioSpec(task.template_id, task.route_id, task.generator, tuple(params), task.seed)
    try:
        world = instantiate_scenario(spec, strict=strict)
    except PlacementError:
        if strict:
            raise
        return 0.0, None, 1.0
    trace = run_episode(world, make_controller(task.surrogate, seed=task.seed))
    return risk_objective(trace), trace, constraint_violation(trace, world)


def _rule_filter(task: GenerationTask, params) -> bool:
    """Grid rule filter: actor on the drivable area and its trigger point before the route end."""
    geo = scenario_geometry(task.template_id, task.route_id)
    spec = ScenarioSpec(task.template_id, task.route_id, task.generator, tuple(params), task.seed)
    try:
        instantiate_scenario(spec, strict=True)
    except PlacementError:
        return False
    length = geo.route.length
    if geo.template.is_obstacle:
        return geo.anchor_s + params[0] < length
    return geo.trigger_point_s - params[2] < length


def run_generation(task: GenerationTask) -> GenerationOutput:
    template = task.template
    dims = searched_dims(template, task.generator)
    rng = np.random.default_rng(task.seed)
    cache: dict[int, tuple] = {}
    log: list[dict] = []
    t0 = time.perf_counter()

    def f(u):
        params = params_from_unit(template, dims, u)
        if task.generator == "AT":
            J, trace, viol = evaluate_objective(task, params, strict=False)
            value, feasible = J - AT_PENALTY * viol, bool(viol == 0.0)
        else:
            J, trace, viol = evaluate_objective(task, params)
            value, feasible = J, True
        cache[len(cache)] = (params, trace, J)
        log.append({"evaluation": len(log), "params": list(params), "J": J, "value": value,
                    "feasible": feasible, "wall": time.perf_counter() - t0})
        return value, feasible

    if task.generator == "random":
        res = random_search(f, len(dims), task.budget, rng)
    elif task.generator == "LC":
        res = reinforce_search(f, len(dims), task.budget, rng, batch=min(10, task.budget), lr=LC_LR,
                               init_std=LC_INIT_STD)
    elif task.generator == "AS":
        res = bayes_opt(f, len(dims), task.budget, rng)
    elif task.generator == "CS":
        res = grid_search(f, len(dims), task.budget,
                          feasible=lambda u: _rule_filter(task, params_from_unit(template, dims, u)))
    else:
        spread = [1.0 if i < template.initial_condition_dims else AT_PERTURB_SPREAD for i in dims]
        res = pso(f, len(dims), task.budget, rng, swarm=min(20, task.budget), init_spread=spread)
    for rec, e in zip(log, res.evaluations):
        rec["iteration"] = e.iteration

    kept = select_top_k(res, cache, template, task.keep_k)
    specs, records = [], []
    route = scenario_geometry(task.template_id, task.route_id).route
    for e in kept:
        params, trace, J = cache[e.index]
        specs.append(ScenarioSpec(task.template_id, task.route_id, task.generator, params, task.seed,
                                  {"objective": J, "iteration": e.iteration, "evaluation": e.index}))
        records.append(episode_signals(trace, route))
    diag = res.diagnostic
    if not specs and not diag:
        diag = "no feasible scenario found" + (
            f"; best violation {min(r['J'] - r['value'] for r in log) / AT_PENALTY:.3f}" if log else "")
    return GenerationOutput(task, specs, records, log, res.n_evals, diag, res.state)


def select_top_k(res: SearchResult, cache: dict, template, k: int) -> list:
    """Best feasible evaluations by value, skipping near-duplicates (L-inf < 1% of the range)."""
    order = sorted((e for e in res.evaluations if e.feasible), key=lambda e: (-e.value, e.index))
    kept, units = [], []
    for e in order:
        u = unit_from_params(template, cache[e.index][0])
        if any(np.max(np.abs(u - v)) < DEDUP_TOL for v in units):
            continue
        kept.append(e)
        units.append(u)
        if len(kept) == k:
            break
    return kept


def records_for(specs, agent, seed: int = 0) -> list[MetricRecord]:
    """Roll each spec out against ``agent`` and return the metric records."""
    return rollout_records(specs, agent, seed)


def _generate(task: GenerationTask, generator: str) -> list[ScenarioSpec]:
    if task.generator != generator:
        task = GenerationTask(task.template_id, task.route_id, generator, task.surrogate,
                              task.budget, task.keep_k, task.seed)
    return run_generation(task).specs


def generate_lc(task: GenerationTask) -> list[ScenarioSpec]:
    """REINFORCE over the initial-condition block."""
    return _generate(task, "LC")


def generate_as(task: GenerationTask) -> list[ScenarioSpec]:
    """GP-UCB Bayesian optimisation over the full parameter vector."""
    return _generate(task, "AS")


def generate_cs(task: GenerationTask) -> list[ScenarioSpec]:
    """Rule-filtered grid over the initial-condition block, perturbations pinned to zero."""
    return _generate(task, "CS")


def generate_at(task: GenerationTask) -> list[ScenarioSpec]:
    """Penalised PSO keeping only scenarios whose adversary stays on the drivable area."""
    return _generate(task, "AT")


def generate_random(task: GenerationTask) -> list[ScenarioSpec]:
    """Uniform samples in bounds."""
    return _generate(task, "random")

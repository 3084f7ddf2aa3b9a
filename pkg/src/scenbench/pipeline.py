"""Stage orchestration: train -> generate -> select -> evaluate -> report, with atomic
artifact writes, derived seeds and a run manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .agents.env import DrivingEnv
from .agents.registry import agent_name, load_agent
from .agents.train import train_policy
from .evaluation.metrics import MetricConfig, MetricRecord
from .evaluation.report import diagnostic_report, format_report, leaderboard_csv, report_json, stats_csv
from .evaluation.metrics import episode_signals
from .evaluation.selection import generation_stats, select_scenarios
from .gen.generate import GENERATORS, GenerationTask, run_generation
from .scenarios.spec import ScenarioSpec, benign_spec, library_text, read_library
from .scenarios.templates import N_ROUTES, TEMPLATES

STAGES = ("train", "generate", "select", "evaluate", "report")
ALGORITHMS = ("stochastic_pg", "deterministic_pg")
MANIFEST_SCHEMA = "scenbench.manifest/1"
MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid pipeline configuration (exit status 2)."""


class StageError(RuntimeError):
    """A stage failed while running (exit status 3)."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass
class AgentEntry:
    """An agent trained by the pipeline or loaded from a checkpoint."""
    name: str
    algorithm: str | None = None       # stochastic_pg | deterministic_pg | None (checkpoint/rule_based)
    seed: int = 0
    space: str = "4D"
    hyper: dict = field(default_factory=dict)
    checkpoint: str | None = None

    @property
    def trained(self) -> bool:
        return self.algorithm is not None


@dataclass
class PipelineConfig:
    stage: str = "all"
    out: str = "runs/default"
    seed: int = 0
    workers: int = 1
    templates: list = field(default_factory=lambda: list(range(1, 9)))
    routes: list = field(default_factory=lambda: [0])
    generators: list = field(default_factory=lambda: list(GENERATORS))
    agents: list = field(default_factory=list)          # list[AgentEntry]
    surrogate: str | None = None                        # agent name used during generation
    selection_agents: list | None = None                # agent names; default: all agents
    budget: int = 100
    keep_k: int = 10
    benign_routes: list | None = None                   # routes of the benign library; default: routes
    save_traces: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["agents"] = [asdict(a) for a in self.agents]
        return d

    @property
    def hash(self) -> str:
        """Hash of everything that affects artifact content (not stage, out or workers)."""
        d = self.to_dict()
        for k in ("stage", "out", "workers"):
            d.pop(k)
        return hashlib.blake2b(json.dumps(d, sort_keys=True).encode(), digest_size=8).hexdigest()

    def agent(self, name: str) -> AgentEntry:
        for a in self.agents:
            if a.name == name:
                return a
        raise ConfigError(f"unknown agent {name!r}")


# -- configuration -------------------------------------------------------------
def _int_list(value, what: str) -> list[int]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a list of integers, got {value!r}") from None


def _str_list(value) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def _agent_entry(item) -> AgentEntry:
    if isinstance(item, str):
        if item == "rule_based":
            return AgentEntry("rule_based")
        return AgentEntry(Path(item).stem, checkpoint=item)
    if not isinstance(item, dict) or "name" not in item:
        raise ConfigError(f"agent entries need a name: {item!r}")
    unknown = set(item) - {f for f in AgentEntry.__dataclass_fields__}
    if unknown:
        raise ConfigError(f"agent {item['name']!r}: unknown keys {sorted(unknown)}")
    return AgentEntry(**item)


def parse_config(raw: dict | None = None, **overrides) -> PipelineConfig:
    """Build and validate a PipelineConfig from a mapping; non-None ``overrides`` win."""
    raw = dict(raw or {})
    raw.update({k: v for k, v in overrides.items() if v is not None})
    fields = PipelineConfig.__dataclass_fields__
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        cfg = PipelineConfig(**{k: v for k, v in raw.items() if k != "agents"})
        cfg.seed = int(cfg.seed)
        cfg.workers = int(cfg.workers)
        cfg.budget = int(cfg.budget)
        cfg.keep_k = int(cfg.keep_k)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.templates = _int_list(cfg.templates, "templates")
    cfg.routes = _int_list(cfg.routes, "routes")
    cfg.benign_routes = cfg.routes if cfg.benign_routes is None else _int_list(cfg.benign_routes, "benign_routes")
    cfg.generators = _str_list(cfg.generators)
    agents = raw.get("agents", [])
    cfg.agents = [_agent_entry(a) for a in _str_list(agents)] if isinstance(agents, str) else \
        [_agent_entry(a) for a in agents]
    if cfg.selection_agents is not None:
        cfg.selection_agents = _str_list(cfg.selection_agents)
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.stage not in STAGES + ("all",):
        raise ConfigError(f"stage must be one of {STAGES + ('all',)}, got {cfg.stage!r}")
    if not 0 <= cfg.seed <= MASK64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not cfg.templates or any(t not in TEMPLATES for t in cfg.templates):
        raise ConfigError(f"templates must be a non-empty subset of 1..8, got {cfg.templates}")
    for what, routes in (("routes", cfg.routes), ("benign_routes", cfg.benign_routes)):
        if not routes or any(not 0 <= r < N_ROUTES for r in routes):
            raise ConfigError(f"{what} must be a non-empty subset of 0..{N_ROUTES - 1}, got {routes}")
    bad = [g for g in cfg.generators if g not in GENERATORS]
    if not cfg.generators or bad:
        raise ConfigError(f"generators must be a non-empty subset of {GENERATORS}, got {cfg.generators}")
    if cfg.keep_k < 1 or cfg.budget < cfg.keep_k:
        raise ConfigError(f"budget ({cfg.budget}) must be >= keep_k ({cfg.keep_k}) >= 1")
    names = [a.name for a in cfg.agents]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate agent names in {names}")
    for a in cfg.agents:
        if a.algorithm is not None and a.algorithm not in ALGORITHMS:
            raise ConfigError(f"agent {a.name!r}: algorithm must be one of {ALGORITHMS}")
        if a.algorithm is None and a.checkpoint is None and a.name != "rule_based":
            raise ConfigError(f"agent {a.name!r} needs an algorithm or a checkpoint")
        if a.algorithm is None and a.checkpoint is not None and not Path(a.checkpoint).is_file():
            raise ConfigError(f"agent {a.name!r}: checkpoint {a.checkpoint} does not exist")
    if cfg.surrogate is not None and cfg.surrogate not in names:
        raise ConfigError(f"surrogate {cfg.surrogate!r} is not a configured agent")
    for n in cfg.selection_agents or []:
        if n not in names:
            raise ConfigError(f"selection agent {n!r} is not a configured agent")
    if cfg.stage in ("all", "generate") and cfg.surrogate is None:
        raise ConfigError("generation needs a surrogate agent")
    if cfg.stage in ("all", "select") and len(cfg.selection_agents or names) < 2:
        raise ConfigError("selection needs at least 2 agents")


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a mapping")
    return raw


# -- seeds ---------------------------------------------------------------------
def _h64(obj) -> int:
    return int.from_bytes(hashlib.blake2b(repr(obj).encode(), digest_size=8).digest(), "little")


def stage_seed(master: int, stage: str) -> int:
    return (master ^ _h64(stage)) & MASK64


def task_seed(stage_s: int, key: tuple) -> int:
    """Per-task seed; depends only on the task identity, never on scheduling order."""
    return (stage_s ^ _h64(tuple(key))) & MASK64


def _small(seed: int) -> int:
    # torch and the policy samplers take 63-bit seeds
    return seed & ((1 << 63) - 1)


# -- atomic artifact writes ------------------------------------------------------
def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def atomic_figure(path, plot_fn, *args, **kwargs) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{path.suffix}")
    plot_fn(*args, path=tmp, **kwargs)
    os.replace(tmp, path)


def _csv_header(cfg: PipelineConfig) -> str:
    return f"# config_hash={cfg.hash} seed={cfg.seed}\n"


def read_csv_artifact(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO("".join(ln for ln in text.splitlines(True)
                                                   if not ln.startswith("#")))))


def _records_text(records, cfg: PipelineConfig) -> str:
    head = {"schema": "scenbench.records/1", "config_hash": cfg.hash, "seed": cfg.seed}
    return "\n".join([json.dumps(head, sort_keys=True)] +
                     [json.dumps(r.to_dict(), sort_keys=True) for r in records]) + "\n"


def read_records(path) -> list[MetricRecord]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    return [MetricRecord(**json.loads(ln)) for ln in lines[1:]]


# -- the run -------------------------------------------------------------------
class Pipeline:
    """Runs stages against an output directory laid out as

    agents/<name>.json, agents/<name>_curve.csv|png     train
    library/generated.jsonl, library/surrogate_records.jsonl,
    library/generation_log.csv, library/generation_runs.jsonl                     generate
    library/selected.jsonl, selection/collision_matrix.csv, selection/generation_stats.csv|png   select
    eval/<agent>_{selected,benign}.jsonl, traces/...     evaluate
    reports/*.json, leaderboard*.csv|png, summary.txt    report
    manifest.json
    """

    def __init__(self, cfg: PipelineConfig, log=print):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.log = log or (lambda *a: None)
        self.metric_cfg = MetricConfig()

    # paths
    def agent_path(self, entry: AgentEntry) -> str:
        if entry.name == "rule_based" and not entry.trained and entry.checkpoint is None:
            return "rule_based"
        if entry.checkpoint is not None:
            return entry.checkpoint
        return str(self.out / "agents" / f"{entry.name}.json")

    def _header(self, stage: str) -> dict:
        return {"config_hash": self.cfg.hash, "seed": self.cfg.seed, "stage": stage}

    # manifest
    def _manifest(self) -> dict:
        path = self.out / "manifest.json"
        if path.exists():
            try:
                m = json.loads(path.read_text())
                if m.get("config_hash") == self.cfg.hash:
                    return m
            except json.JSONDecodeError:
                pass
        return {"schema": MANIFEST_SCHEMA, "config_hash": self.cfg.hash, "seed": self.cfg.seed,
                "config": self.cfg.to_dict(), "stages": {}}

    def _record_stage(self, stage: str, status: str, wall: float, error: str | None = None) -> None:
        m = self._manifest()
        m["stages"][stage] = {"status": status, "seed": stage_seed(self.cfg.seed, stage),
                              "wall_s": round(wall, 3), **({"error": error} if error else {})}
        atomic_write(self.out / "manifest.json", json.dumps(m, indent=2, sort_keys=True) + "\n")

    def run(self, stage: str | None = None) -> None:
        stage = stage or self.cfg.stage
        order = STAGES if stage == "all" else (stage,)
        self.out.mkdir(parents=True, exist_ok=True)
        for s in order:
            t0 = time.perf_counter()
            self.log(f"[{s}] start")
            try:
                getattr(self, f"stage_{s}")()
            except StageError as exc:
                self._record_stage(s, "failed", time.perf_counter() - t0, exc.message)
                raise
            except (OSError, ValueError, RuntimeError, KeyError) as exc:
                self._record_stage(s, "failed", time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
                raise StageError(s, f"{type(exc).__name__}: {exc}") from exc
            wall = time.perf_counter() - t0
            self._record_stage(s, "ok", wall)
            self.log(f"[{s}] done in {wall:.1f}s")

    def _map(self, fn, items):
        if self.cfg.workers > 1 and len(items) > 1:
            with ProcessPoolExecutor(self.cfg.workers) as ex:
                return list(ex.map(fn, items))
        return [fn(i) for i in items]

    # -- stages --------------------------------------------------------------
    def stage_train(self) -> None:
        s = stage_seed(self.cfg.seed, "train")
        jobs = [(asdict(a), _small(task_seed(s, (a.name, a.seed))), str(self.out / "agents"), self.cfg.hash,
                 self.cfg.seed) for a in self.cfg.agents if a.trained]
        for name in self._map(_train_job, jobs):
            self.log(f"  trained {name}")

    def _require_agents(self, names) -> list[str]:
        paths = []
        for n in names:
            p = self.agent_path(self.cfg.agent(n))
            if p != "rule_based" and not Path(p).exists():
                raise StageError("evaluate", f"checkpoint for agent {n!r} not found at {p}; run the train stage")
            paths.append(p)
        return paths

    def stage_generate(self) -> None:
        cfg = self.cfg
        (surrogate,) = self._require_agents([cfg.surrogate])
        s = stage_seed(cfg.seed, "generate")
        jobs = [(t, r, g, surrogate, cfg.budget, cfg.keep_k, _small(task_seed(s, (t, r, g))))
                for t in cfg.templates for r in cfg.routes for g in cfg.generators]
        results = self._map(_generate_job, jobs)
        specs, records, rows, run_log = [], [], [], []
        for job, (spec_dicts, rec_dicts, summary, log) in zip(jobs, results):
            specs += [ScenarioSpec.from_dict(d) for d in spec_dicts]
            records += [MetricRecord(**d) for d in rec_dicts]
            rows.append(summary)
            run_log += log
            if summary["diagnostic"]:
                self.log(f"  T{job[0]} R{job[1]} {job[2]}: {summary['diagnostic']}")
        head = self._header("generate") | {"surrogate": cfg.surrogate, "budget": cfg.budget, "keep_k": cfg.keep_k}
        atomic_write(self.out / "library" / "generated.jsonl", library_text(specs, head))
        atomic_write(self.out / "library" / "surrogate_records.jsonl", _records_text(records, cfg))
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["template", "route", "generator", "evaluations", "kept", "kept_CR",
                                 "diagnostic"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        atomic_write(self.out / "library" / "generation_log.csv", _csv_header(cfg) + buf.getvalue())
        # per-evaluation optimizer log; its wall-clock column is the only non-reproducible field
        atomic_write(self.out / "library" / "generation_runs.jsonl",
                     "\n".join(json.dumps(rec, sort_keys=True) for rec in
                               [self._header("generate")] + run_log) + "\n")
        self.log(f"  generated {len(specs)} specs")

    def stage_select(self) -> None:
        cfg = self.cfg
        _, specs = read_library(self.out / "library" / "generated.jsonl")
        surrogate_records = read_records(self.out / "library" / "surrogate_records.jsonl")
        names = cfg.selection_agents or [a.name for a in cfg.agents]
        paths = self._require_agents(names)
        seed = _small(stage_seed(cfg.seed, "select"))
        cols = self._map(_rollout_job, [(p, [s.to_dict() for s in specs], seed) for p in paths])
        matrix = np.array([[r["c"] for r in col] for col in cols], dtype=int).T.reshape(len(specs), len(paths))
        chosen = select_scenarios(matrix)
        selected = [specs[i] for i in chosen]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["spec"] + names)
        w.writerows([i] + list(row) for i, row in enumerate(matrix))
        atomic_write(self.out / "selection" / "collision_matrix.csv", _csv_header(cfg) + buf.getvalue())
        head = self._header("select") | {"selection_agents": names, "source": "generated.jsonl",
                                         "source_indices": chosen}
        atomic_write(self.out / "library" / "selected.jsonl", library_text(selected, head))
        table = generation_stats(specs, surrogate_records, chosen, self.metric_cfg)
        atomic_write(self.out / "selection" / "generation_stats.csv", _csv_header(cfg) + stats_csv(table))
        from .plotting import plot_generation_stats
        for col in ("CR", "S-CR", "SR"):
            atomic_figure(self.out / "selection" / f"generation_{col}.png", plot_generation_stats, table, column=col)
        self.log(f"  selected {len(selected)} of {len(specs)} specs")

    def _libraries(self) -> dict:
        libs = {"benign": [benign_spec(t, r, 0) for t in self.cfg.templates for r in self.cfg.benign_routes]}
        sel = self.out / "library" / "selected.jsonl"
        if sel.exists():
            libs["selected"] = read_library(sel)[1]
        return libs

    def stage_evaluate(self) -> None:
        cfg = self.cfg
        names = [a.name for a in cfg.agents]
        paths = self._require_agents(names)
        seed = _small(stage_seed(cfg.seed, "evaluate"))
        for lib, specs in self._libraries().items():
            trace_dir = str(self.out / "traces" / lib) if cfg.save_traces else None
            jobs = [(p, [s.to_dict() for s in specs], seed, trace_dir, n) for n, p in zip(names, paths)]
            for name, recs in zip(names, self._map(_rollout_job, jobs)):
                records = [MetricRecord(**d) for d in recs]
                atomic_write(self.out / "eval" / f"{name}_{lib}.jsonl", _records_text(records, cfg))
            self.log(f"  evaluated {len(names)} agents on {len(specs)} {lib} specs")

    def stage_report(self) -> None:
        cfg = self.cfg
        from .plotting import plot_leaderboard, plot_levels
        summary = []
        for lib in ("selected", "benign"):
            reports = []
            for a in cfg.agents:
                path = self.out / "eval" / f"{a.name}_{lib}.jsonl"
                if not path.exists():
                    continue
                records = read_records(path)
                if not records:
                    continue
                rep = diagnostic_report(a.name, records, self.metric_cfg) | self._header("report") | {"library": lib}
                reports.append(rep)
                atomic_write(self.out / "reports" / f"{a.name}_{lib}.json", report_json(rep))
                summary.append(f"[{lib}] " + format_report(rep))
            if not reports:
                continue
            atomic_write(self.out / f"leaderboard_{lib}.csv", _csv_header(cfg) + leaderboard_csv(reports))
            atomic_figure(self.out / f"leaderboard_{lib}.png", plot_leaderboard, reports, cfg=self.metric_cfg)
            atomic_figure(self.out / f"levels_{lib}.png", plot_levels, reports)
        if not summary:
            raise StageError("report", "no evaluation records found; run the evaluate stage")
        atomic_write(self.out / "summary.txt", f"config_hash={cfg.hash} seed={cfg.seed}\n\n" +
                     "\n\n".join(summary) + "\n")


# -- worker jobs (module level so they pickle) -----------------------------------
def _quiet_torch() -> None:
    import torch
    torch.set_num_threads(1)


def _train_job(job) -> str:
    entry, seed, out_dir, chash, master = job
    _quiet_torch()
    a = AgentEntry(**entry)
    env = DrivingEnv(space=a.space)
    policy, curve = train_policy(a.algorithm, env, a.hyper, seed=seed)
    policy.meta.update({"name": a.name, "config_hash": chash, "master_seed": master, "train_seed": seed})
    out = Path(out_dir)
    atomic_write(out / f"{a.name}.json", json.dumps(policy.to_dict(), sort_keys=True) + "\n")
    rows = [{"steps": c["steps"], "episodes": c["episodes"], "mean_return": c["mean_return"]} for c in curve]
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["steps", "episodes", "mean_return"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    atomic_write(out / f"{a.name}_curve.csv", f"# config_hash={chash} seed={master}\n" + buf.getvalue())
    if rows:
        from .plotting import plot_training_curve
        atomic_figure(out / f"{a.name}_curve.png", plot_training_curve, rows, label=a.name)
    return a.name


def _generate_job(job):
    t, r, g, surrogate, budget, keep_k, seed = job
    _quiet_torch()
    out = run_generation(GenerationTask(t, r, g, surrogate=load_agent(surrogate), budget=budget,
                                        keep_k=keep_k, seed=seed))
    summary = {"template": t, "route": r, "generator": g, "evaluations": out.n_evals,
               "kept": len(out.specs), "kept_CR": f"{out.collision_rate:.6f}" if out.specs else "",
               "diagnostic": out.diagnostic}
    run_log = [{"template": t, "route": r, "generator": g, **rec} for rec in out.log]
    return [s.to_dict() for s in out.specs], [rec.to_dict() for rec in out.records], summary, run_log


def _rollout_job(job):
    path, spec_dicts, seed = job[:3]
    trace_dir, name = (job[3], job[4]) if len(job) > 3 else (None, None)
    _quiet_torch()
    specs = [ScenarioSpec.from_dict(d) for d in spec_dicts]
    agent = load_agent(path)
    from .scenarios.spec import instantiate_scenario
    from .rollout import run_episode
    from .agents.registry import make_controller
    out = []
    for i, spec in enumerate(specs):
        world = instantiate_scenario(spec)
        header = {"agent": name or agent_name(agent), "template_id": spec.template_id,
                  "route_id": spec.route_id, "generator_id": spec.generator_id, "params": list(spec.params)}
        trace = run_episode(world, make_controller(agent, seed=seed), header=header)
        if trace_dir is not None:
            p = Path(trace_dir) / (name or "agent") / f"{i:04d}.jsonl"
            atomic_write(p, "\n".join(trace.to_lines()) + "\n")
        out.append(episode_signals(trace, world.route).to_dict())
    return out


def run_pipeline(cfg: PipelineConfig, stage: str | None = None, log=print) -> Pipeline:
    pipe = Pipeline(cfg, log)
    pipe.run(stage)
    return pipe

"""Per-episode metric records, their aggregation and the weighted overall score."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..sim.trace import EpisodeTrace, TraceError

METRICS = ("CR", "RR", "SS", "OR", "RF", "Comp", "TS", "ACC", "YV", "LI")
LEVELS = {
    "safety": ("CR", "RR", "SS", "OR"),
    "functionality": ("RF", "Comp", "TS"),
    "etiquette": ("ACC", "YV", "LI"),
}
DEFAULT_M_MAX = dict(zip(METRICS, (1.0, 1.0, 1.0, 50.0, 1.0, 1.0, 60.0, 8.0, 3.0, 20.0)))
DEFAULT_WEIGHTS = dict(zip(METRICS, (0.495, 0.099, 0.099, 0.099, 0.050, 0.050, 0.050, 0.020, 0.020, 0.020)))
HIGHER_BETTER = frozenset({"RF", "Comp"})


@dataclass(frozen=True)
class MetricConfig:
    m_max: dict = field(default_factory=lambda: dict(DEFAULT_M_MAX))
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    higher_better: frozenset = HIGHER_BETTER
    x_max: float = 5.0

    def direction(self, metric: str) -> str:
        return "higher_better" if metric in self.higher_better else "lower_better"


@dataclass(frozen=True)
class MetricRecord:
    c: int
    r: int
    s: int
    d: float
    x: float
    p: float
    t: float | None
    acc: float
    y: float
    l: int

    def __post_init__(self):
        if self.c not in (0, 1):
            raise ValueError("c must be 0 or 1")
        if min(self.r, self.s, self.l) < 0 or min(self.d, self.x, self.acc, self.y) < 0:
            raise ValueError("negative metric signal")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p outside [0, 1]")
        if self.t is not None and not 0.0 < self.t <= 60.0 + 1e-9:
            raise ValueError("t outside (0, 60]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricReport:
    CR: float
    RR: float
    SS: float
    OR: float
    RF: float
    Comp: float
    TS: float
    ACC: float
    YV: float
    LI: float
    episodes: int
    OS: float

    def values(self) -> dict:
        return {m: getattr(self, m) for m in METRICS}

    def to_dict(self) -> dict:
        return asdict(self)


def episode_signals(trace: EpisodeTrace, route) -> MetricRecord:
    """Raw per-episode signals from a rollout trace."""
    if trace.n_ticks == 0:
        raise TraceError("empty trace")
    ego = trace.ego
    poly = route.polyline
    if trace.signals is not None:
        prog, dev, off = trace.signals[:, 0], trace.signals[:, 1], trace.signals[:, 2] > 0.5
    else:
        prog, dev = poly.project_many(ego[:, :2])
        off = np.zeros(len(ego), bool)
    completed = [e for e in trace.events if e.kind == "route_complete"]
    p = 1.0 if completed else float(min(max(prog.max() / poly.length, 0.0), 1.0))
    t = completed[0].tick * trace.dt if completed else None
    step = np.hypot(np.diff(ego[:, 0]), np.diff(ego[:, 1]))
    # distance covered on steps that end off the road
    d = float(step[off[1:]].sum()) if len(step) else 0.0
    if len(ego) > 1:
        acc = float(np.mean(np.abs(np.diff(ego[:, 3]) / trace.dt)))
        dpsi = np.diff(ego[:, 2])
        dpsi = (dpsi + math.pi) % (2 * math.pi) - math.pi
        yaw = float(np.mean(np.abs(dpsi / trace.dt)))
    else:
        acc = yaw = 0.0
    return MetricRecord(
        c=int(trace.collided), r=trace.count("red_light_run"), s=trace.count("stop_sign_run"),
        d=d, x=float(np.mean(dev)), p=p, t=t, acc=acc, y=yaw, l=trace.count("lane_invasion"))


def aggregate(records, cfg: MetricConfig | None = None) -> MetricReport:
    cfg = cfg or MetricConfig()
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    n = len(records)

    def mean(attr):
        return sum(getattr(r, attr) for r in records) / n

    rf = 1.0 - sum(min(r.x / cfg.x_max, 1.0) for r in records) / n
    done = [r.t for r in records if r.t is not None and r.p >= 1.0]
    ts = sum(done) / len(done) if done else cfg.m_max["TS"]
    vals = {"CR": mean("c"), "RR": mean("r"), "SS": mean("s"), "OR": mean("d"), "RF": rf,
            "Comp": mean("p"), "TS": ts, "ACC": mean("acc"), "YV": mean("y"), "LI": mean("l")}
    return MetricReport(**vals, episodes=n, OS=overall_score(vals, cfg))


def g(metric: str, value: float, cfg: MetricConfig | None = None) -> float:
    """Normalised score in [0, 1] of one metric value."""
    cfg = cfg or MetricConfig()
    m = min(max(value, 0.0), cfg.m_max[metric]) / cfg.m_max[metric]
    return m if metric in cfg.higher_better else 1.0 - m


def overall_score(report, cfg: MetricConfig | None = None) -> float:
    cfg = cfg or MetricConfig()
    vals = report.values() if isinstance(report, MetricReport) else report
    return sum(cfg.weights[m] * g(m, vals[m], cfg) for m in METRICS)


def level_scores(report, cfg: MetricConfig | None = None) -> dict:
    """Per-level weighted scores normalised by that level's weight sum."""
    cfg = cfg or MetricConfig()
    vals = report.values() if isinstance(report, MetricReport) else report
    out = {}
    for level, names in LEVELS.items():
        wsum = sum(cfg.weights[m] for m in names)
        out[level] = sum(cfg.weights[m] * g(m, vals[m], cfg) for m in names) / wsum
    return out

"""Matplotlib figures written next to the CSV outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation.metrics import LEVELS, METRICS, MetricConfig, g  # noqa: E402

EVENT_STYLE = {
    "collision": ("x", "tab:red"),
    "red_light_run": ("s", "tab:orange"),
    "stop_sign_run": ("D", "tab:orange"),
    "lane_invasion": (".", "tab:purple"),
    "out_of_road_enter": ("v", "tab:brown"),
    "route_complete": ("*", "tab:green"),
}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trajectories(trace, path, route=None, wmap=None, title: str | None = None) -> None:
    """Top-down view: lanes, route, ego and actor paths, event markers."""
    fig, ax = plt.subplots(figsize=(7, 7))
    if wmap is not None:
        for lane in wmap.lanes:
            p = lane.polyline.points
            ax.plot(p[:, 0], p[:, 1], color="0.85", lw=6, solid_capstyle="butt", zorder=0)
    if route is not None:
        p = route.polyline.points
        ax.plot(p[:, 0], p[:, 1], "--", color="0.5", lw=1, label="route")
    ego = trace.ego
    ax.plot(ego[:, 0], ego[:, 1], color="C0", lw=2, label="ego")
    ax.scatter(ego[:1, 0], ego[:1, 1], marker="o", color="C0", s=20)
    for j, aid in enumerate(trace.actor_ids):
        a = trace.actors[:, j]
        ax.plot(a[:, 0], a[:, 1], lw=1.2, color=f"C{j + 1}", label=f"actor {aid}")
        ax.scatter(a[:1, 0], a[:1, 1], marker="o", color=f"C{j + 1}", s=20)
    seen = set()
    for e in trace.events:
        marker, color = EVENT_STYLE.get(e.kind, ("o", "k"))
        x, y = ego[min(e.tick, len(ego) - 1), :2]
        ax.scatter([x], [y], marker=marker, color=color, s=60, zorder=5,
                   label=e.kind if e.kind not in seen else None)
        seen.add(e.kind)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_leaderboard(reports, path, cfg: MetricConfig | None = None) -> None:
    """Per-metric normalised scores g(m) for every agent, plus the overall score."""
    cfg = cfg or MetricConfig()
    names = [r["agent"] for r in reports]
    scores = np.array([[g(m, r["metrics"][m], cfg) for m in METRICS] for r in reports]).reshape(len(reports), -1)
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(11, 0.5 * len(reports) + 2.5),
                                  gridspec_kw={"width_ratios": [4, 1]})
    im = ax.imshow(scores, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(METRICS)), METRICS)
    ax.set_yticks(range(len(names)), names)
    for i in range(scores.shape[0]):
        for j in range(scores.shape[1]):
            ax.text(j, i, f"{scores[i, j]:.2f}", ha="center", va="center", fontsize=7,
                    color="w" if scores[i, j] < 0.5 else "k")
    fig.colorbar(im, ax=ax, label="g(m)")
    ax2.barh(range(len(names)), [r["OS"] for r in reports], color="tab:blue")
    ax2.set_yticks(range(len(names)), [])
    ax2.set_xlim(0, 1.002)
    ax2.invert_yaxis()
    ax2.set_xlabel("OS")
    _save(fig, path)


def plot_levels(reports, path) -> None:
    names = [r["agent"] for r in reports]
    x = np.arange(len(names))
    width = 0.8 / len(LEVELS)
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(names) + 2), 4))
    for k, level in enumerate(LEVELS):
        ax.bar(x + k * width, [r["levels"][level] for r in reports], width, label=level)
    ax.set_xticks(x + width * (len(LEVELS) - 1) / 2, names, rotation=20, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("level score")
    ax.legend()
    _save(fig, path)


def plot_generation_stats(table: dict, path, column: str = "CR") -> None:
    """Heat map of one generation statistic over (generator, template)."""
    gens = sorted({k[0] for k in table})
    tmpls = sorted({k[1] for k in table if k[1] != "avg"})
    data = np.full((len(gens), len(tmpls)), np.nan)
    for i, gname in enumerate(gens):
        for j, t in enumerate(tmpls):
            cell = table.get((gname, t))
            if cell is not None and cell[column] is not None:
                data[i, j] = cell[column]
    fig, ax = plt.subplots(figsize=(1.0 * len(tmpls) + 3, 0.6 * len(gens) + 2))
    im = ax.imshow(data, vmin=0.0, vmax=1.0, cmap="magma", aspect="auto")
    ax.set_xticks(range(len(tmpls)), [str(t) for t in tmpls])
    ax.set_yticks(range(len(gens)), gens)
    ax.set_xlabel("template")
    ax.set_title(column)
    fig.colorbar(im, ax=ax)
    _save(fig, path)


def plot_training_curve(curve, path, label: str = "") -> None:
    steps = [c["steps"] for c in curve]
    ret = [c["mean_return"] for c in curve]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(steps, ret, lw=1.5, label=label or None)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean episode return")
    if label:
        ax.legend()
    _save(fig, path)

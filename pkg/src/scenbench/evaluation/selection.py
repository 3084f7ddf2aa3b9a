"""Cross-agent scenario selection and per-(generator, template) generation statistics."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .metrics import MetricConfig, aggregate
from .runner import rollout_records

MIN_COLLIDING_AGENTS = 2
STAT_COLUMNS = ("CR", "S-CR", "OS", "S-OS", "Comp", "S-Comp", "SR")


def select_scenarios(collision_matrix, min_agents: int = MIN_COLLIDING_AGENTS) -> list[int]:
    """Row indices of the specs that made at least ``min_agents`` agents collide, in order."""
    m = np.asarray(collision_matrix)
    if m.ndim != 2:
        raise ValueError("collision matrix must be 2-D (specs x agents)")
    if m.shape[0] and m.shape[1] < min_agents:
        raise ValueError(f"selection needs at least {min_agents} agents, got {m.shape[1]}")
    if m.size and not np.isin(m, (0, 1)).all():
        raise ValueError("collision matrix entries must be 0 or 1")
    return [i for i, row in enumerate(m) if int(row.sum()) >= min_agents]


def collision_matrix(specs, agents, seed: int = 0) -> np.ndarray:
    """Roll every spec out against every agent; entry (i, j) is 1 iff agent j collided on spec i."""
    out = np.zeros((len(specs), len(agents)), dtype=int)
    for j, agent in enumerate(agents):
        for i, rec in enumerate(rollout_records(specs, agent, seed)):
            out[i, j] = rec.c
    return out


def generation_stats(specs, surrogate_records, selected, cfg: MetricConfig | None = None) -> dict:
    """Table of {CR, S-CR, OS, S-OS, Comp, S-Comp, SR} keyed by (generator, template).

    ``surrogate_records[i]`` is the surrogate's MetricRecord on ``specs[i]``; ``selected``
    holds the indices kept by ``select_scenarios``. S- metrics of a cell with an empty
    selection are absent (None). An ``(generator, "avg")`` cell averages each column over
    the templates where it is defined.
    """
    cfg = cfg or MetricConfig()
    if len(specs) != len(surrogate_records):
        raise ValueError("one surrogate record per spec is required")
    chosen = set(selected)
    groups = defaultdict(list)
    for i, spec in enumerate(specs):
        groups[(spec.generator_id, spec.template_id)].append(i)
    table = {}
    for key, idx in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        rep = aggregate([surrogate_records[i] for i in idx], cfg)
        sel = [i for i in idx if i in chosen]
        srep = aggregate([surrogate_records[i] for i in sel], cfg) if sel else None
        table[key] = {
            "CR": rep.CR, "S-CR": srep.CR if srep else None,
            "OS": rep.OS, "S-OS": srep.OS if srep else None,
            "Comp": rep.Comp, "S-Comp": srep.Comp if srep else None,
            "SR": len(sel) / len(idx),
        }
    for gen in sorted({k[0] for k in table}):
        cells = [v for k, v in table.items() if k[0] == gen]
        avg = {}
        for col in STAT_COLUMNS:
            vals = [c[col] for c in cells if c[col] is not None]
            avg[col] = float(np.mean(vals)) if vals else None
        table[(gen, "avg")] = avg
    return table

"""Diagnostic reports, leaderboard tables and the generation-statistics table as text."""
from __future__ import annotations

import csv
import io
import json

from .metrics import LEVELS, METRICS, MetricConfig, aggregate, level_scores
from .selection import STAT_COLUMNS

LEADERBOARD_COLUMNS = ("agent",) + METRICS + ("OS",)


def diagnostic_report(agent: str, records, cfg: MetricConfig | None = None) -> dict:
    """Three-level report of one agent over a scenario library."""
    cfg = cfg or MetricConfig()
    rep = aggregate(records, cfg)
    return {
        "agent": agent,
        "episodes": rep.episodes,
        "metrics": rep.values(),
        "levels": level_scores(rep, cfg),
        "OS": rep.OS,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def leaderboard_csv(reports) -> str:
    """Rows = agents, columns = the ten metrics and OS, values rounded to 6 places."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    for rep in reports:
        w.writerow([rep["agent"]] + [f"{rep['metrics'][m]:.6f}" for m in METRICS] + [f"{rep['OS']:.6f}"])
    return buf.getvalue()


def read_leaderboard(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for k in LEADERBOARD_COLUMNS[1:]:
            r[k] = float(r[k])
    return rows


def stats_csv(table: dict) -> str:
    """generation_stats table as CSV; absent cells are left empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("generator", "template") + STAT_COLUMNS)
    for (gen, tmpl), cell in table.items():
        w.writerow([gen, tmpl] + ["" if cell[c] is None else f"{cell[c]:.6f}" for c in STAT_COLUMNS])
    return buf.getvalue()


def format_report(report: dict) -> str:
    """Human-readable block for one agent."""
    lines = [f"agent {report['agent']} ({report['episodes']} episodes)"]
    for level, names in LEVELS.items():
        vals = "  ".join(f"{m}={report['metrics'][m]:.3f}" for m in names)
        lines.append(f"  {level:<13s} {report['levels'][level]:.3f}   {vals}")
    lines.append(f"  overall score {report['OS']:.3f}")
    return "\n".join(lines)

from .metrics import (LEVELS, METRICS, MetricConfig, MetricRecord, MetricReport, aggregate,
                      episode_signals, g, level_scores, overall_score)
from .report import diagnostic_report, format_report, leaderboard_csv, read_leaderboard, stats_csv
from .runner import rollout_records, rollout_traces
from .selection import collision_matrix, generation_stats, select_scenarios

__all__ = ["LEVELS", "METRICS", "MetricConfig", "MetricRecord", "MetricReport", "aggregate",
           "episode_signals", "g", "level_scores", "overall_score", "diagnostic_report", "format_report",
           "leaderboard_csv", "read_leaderboard", "stats_csv", "rollout_records", "rollout_traces",
           "collision_matrix", "generation_stats", "select_scenarios"]

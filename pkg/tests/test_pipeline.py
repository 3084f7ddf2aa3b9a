import json

import numpy as np
import pytest

from scenbench.cli import main, resolve_run_args, timeline
from scenbench.evaluation import read_leaderboard
from scenbench.pipeline import (ConfigError, StageError, parse_config, read_csv_artifact, run_pipeline, stage_seed,
                                task_seed)
from scenbench.rollout import run_episode
from scenbench.scenarios import benign_spec, instantiate_scenario, read_library
from scenbench.agents import RuleBasedPolicy
from scenbench.sim import EpisodeTrace
from scenbench.sim.world import Event

TINY_PG = {"name": "pg-tiny", "algorithm": "stochastic_pg", "seed": 0,
           "hyper": {"total_steps": 512, "steps_per_iter": 256, "epochs": 1, "hidden": [16, 16]}}


def _quiet(*_):
    pass


def _lines_without_hash_header(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("# config_hash")]


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = parse_config({"out": str(out), "seed": 11, "templates": [1], "routes": [0], "generators": ["random"],
                        "budget": 20, "keep_k": 10, "agents": [TINY_PG, "rule_based"], "surrogate": "rule_based",
                        "save_traces": True})
    run_pipeline(cfg, log=_quiet)
    return out, cfg


# -- config ---------------------------------------------------------------------------
@pytest.mark.parametrize("raw,msg", [
    ({"templates": [9]}, "templates"),
    ({"routes": [10]}, "routes"),
    ({"generators": ["GA"]}, "generators"),
    ({"budget": 5, "keep_k": 10}, "budget"),
    ({"colour": "red"}, "unknown"),
    ({"stage": "evaluate", "agents": ["/no/such/agent.json"]}, "does not exist"),
    ({"stage": "generate", "agents": ["rule_based"]}, "surrogate"),
    ({"stage": "select", "agents": ["rule_based"], "surrogate": "rule_based"}, "at least 2"),
])
def test_config_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(raw)


def test_seed_derivation():
    s = stage_seed(5, "generate")
    assert s == stage_seed(5, "generate") != stage_seed(5, "select")
    assert task_seed(s, (1, 0, "LC")) != task_seed(s, (1, 0, "AS"))
    assert 0 <= task_seed(s, (1, 0, "LC")) < 2 ** 64


def test_config_hash_ignores_out_and_workers():
    a = parse_config({"stage": "train", "out": "a", "workers": 1})
    b = parse_config({"stage": "report", "out": "b", "workers": 4})
    assert a.hash == b.hash
    assert a.hash != parse_config({"stage": "train", "seed": 1}).hash


# -- stages ---------------------------------------------------------------------------
def test_generate_cardinality_and_headers(full_run):
    out, cfg = full_run
    head, specs = read_library(out / "library" / "generated.jsonl")
    assert len(specs) == 10
    assert head["config_hash"] == cfg.hash and head["seed"] == 11
    assert all(s.template_id == 1 and s.generator_id == "random" for s in specs)
    rows = read_csv_artifact((out / "library" / "generation_log.csv").read_text())
    assert rows[0]["evaluations"] == "20" and rows[0]["kept"] == "10"
    assert (out / "library" / "generation_log.csv").read_text().startswith(f"# config_hash={cfg.hash} seed=11")


def test_selected_subset_of_generated(full_run):
    out, _ = full_run
    _, gen = read_library(out / "library" / "generated.jsonl")
    head, sel = read_library(out / "library" / "selected.jsonl")
    assert [gen[i] for i in head["source_indices"]] == sel
    matrix = read_csv_artifact((out / "selection" / "collision_matrix.csv").read_text())
    assert len(matrix) == len(gen)
    assert (out / "selection" / "generation_CR.png").stat().st_size > 0


def test_reports_and_manifest(full_run):
    out, cfg = full_run
    text = (out / "leaderboard_benign.csv").read_text()
    rows = read_leaderboard("\n".join(_lines_without_hash_header(out / "leaderboard_benign.csv")))
    assert [r["agent"] for r in rows] == ["pg-tiny", "rule_based"]
    assert text.startswith("# config_hash=")
    assert (out / "leaderboard_benign.png").exists() and (out / "agents" / "pg-tiny_curve.png").exists()
    rep = json.loads((out / "reports" / "rule_based_benign.json").read_text())
    assert rep["config_hash"] == cfg.hash and rep["episodes"] == 1
    man = json.loads((out / "manifest.json").read_text())
    assert [man["stages"][s]["status"] for s in ("train", "generate", "select", "evaluate", "report")] == ["ok"] * 5
    assert all("wall_s" in v and "seed" in v for v in man["stages"].values())
    assert not list(out.rglob("*.tmp*"))


def test_report_single_agent_leaderboard(tmp_path):
    cfg = parse_config({"out": str(tmp_path), "templates": [1], "agents": ["rule_based"]}, stage="evaluate")
    run_pipeline(cfg, log=_quiet)
    run_pipeline(cfg, stage="report", log=_quiet)
    rows = read_leaderboard("\n".join(_lines_without_hash_header(tmp_path / "leaderboard_benign.csv")))
    assert len(rows) == 1
    numeric = [k for k in rows[0] if k != "agent"]
    assert len(numeric) == 11 and all(isinstance(rows[0][k], float) for k in numeric)


def test_stage_rerun_reproduces_content(full_run, tmp_path):
    out, cfg = full_run
    other = parse_config(dict(cfg.to_dict(), out=str(tmp_path), agents=[TINY_PG, "rule_based"]))
    run_pipeline(other, log=_quiet)
    for rel in ("library/generated.jsonl", "library/selected.jsonl", "eval/pg-tiny_benign.jsonl",
                "leaderboard_benign.csv", "agents/pg-tiny.json", "reports/pg-tiny_selected.json"
                if (out / "reports" / "pg-tiny_selected.json").exists() else "reports/pg-tiny_benign.json"):
        assert (out / rel).read_bytes() == (tmp_path / rel).read_bytes(), rel


def test_report_without_evaluation_is_stage_error(tmp_path):
    cfg = parse_config({"out": str(tmp_path), "agents": ["rule_based"]}, stage="report")
    with pytest.raises(StageError) as exc:
        run_pipeline(cfg, log=_quiet)
    assert exc.value.stage == "report"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["stages"]["report"]["status"] == "failed"


# -- cli ------------------------------------------------------------------------------
def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--stage", "report", "--out", str(tmp_path), "--agents", "rule_based", "-q"]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "stage" and err["stage"] == "report"
    assert main(["run", "--stage", "evaluate", "--templates", "12", "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "config"
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 2
    cfg = tmp_path / "c.yaml"
    cfg.write_text("templates: [1]\nagents: [rule_based]\nstage: evaluate\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    assert (tmp_path / "o" / "eval" / "rule_based_benign.jsonl").exists()


def test_env_overrides(monkeypatch):
    import argparse
    args = argparse.Namespace(config=None, stage=None, out="flag-out", workers=None, seed=None, templates=None,
                              routes=None, generators=None, agents=None)
    opts = resolve_run_args(args, {"SCENBENCH_SEED": "9", "SCENBENCH_OUT": "env-out"})
    assert opts == {"seed": "9", "out": "flag-out"}
    assert parse_config({"seed": 1, "stage": "train"}, **opts).seed == 9


def test_timeline_lines():
    world = instantiate_scenario(benign_spec(1, 0))
    trace = run_episode(world, RuleBasedPolicy(), limit_s=2.0)
    trace.events = []
    lines = timeline(trace)
    assert len(lines) == 2 and lines[0].startswith("t=0.00s start") and "end" in lines[1]
    trace.events = [Event(212, "collision", {"actors": ["ego", 1]})]
    assert "t=10.60s collision(ego, actor 1)" in timeline(trace)


def test_replay_cli(full_run, tmp_path, capsys):
    out, _ = full_run
    trace_path = sorted((out / "traces" / "benign" / "rule_based").glob("*.jsonl"))[0]
    plot = tmp_path / "p.png"
    assert main(["replay", str(trace_path), "--plot", str(plot)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].startswith("t=0.00s start") and plot.stat().st_size > 0

    lines = trace_path.read_text().splitlines()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines[:4] + ["{oops"] + lines[5:]) + "\n")
    assert main(["replay", str(bad), "--no-plot"]) == 2
    assert "line 5" in capsys.readouterr().err
    old = tmp_path / "old.jsonl"
    old.write_text("\n".join([lines[0].replace("scenbench.trace/1", "scenbench.trace/0")] + lines[1:]) + "\n")
    assert main(["replay", str(old), "--no-plot"]) == 2
    err = capsys.readouterr().err
    assert "scenbench.trace/0" in err and "scenbench.trace/1" in err
    assert EpisodeTrace.read(trace_path).n_ticks > 1
    assert np.isfinite(EpisodeTrace.read(trace_path).ego).all()

"""Command line: ``scenbench run`` drives the pipeline, ``scenbench replay`` summarises a trace.

Every ``run`` flag can also be set through an environment variable named
``SCENBENCH_<FLAG>`` (e.g. ``SCENBENCH_SEED=3``). Precedence: flag, then environment,
then the config file, then built-in defaults.

Exit codes: 0 ok, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .pipeline import ConfigError, StageError, load_config_file, parse_config, run_pipeline
from .sim.trace import EpisodeTrace, TraceError

ENV_PREFIX = "SCENBENCH_"
EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
RUN_FLAGS = ("config", "stage", "out", "workers", "seed", "templates", "routes", "generators", "agents")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _error_report("config", message)
        raise SystemExit(EXIT_CONFIG)


def _error_report(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scenbench", description="Scenario-based safety benchmark for driving policies.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run pipeline stages from a config file")
    r.add_argument("--config", help="YAML or JSON pipeline config")
    r.add_argument("--stage", help="train | generate | select | evaluate | report | all")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", help="worker processes for generate/select/evaluate")
    r.add_argument("--seed", help="master seed (unsigned 64-bit)")
    r.add_argument("--templates", help="comma list of template ids, e.g. 1,3,5")
    r.add_argument("--routes", help="comma list of route ids")
    r.add_argument("--generators", help="comma list from LC,AS,CS,AT,random")
    r.add_argument("--agents", help="comma list of checkpoint paths or rule_based")
    r.add_argument("-q", "--quiet", action="store_true")
    rp = sub.add_parser("replay", help="print the event timeline of a trace and plot it")
    rp.add_argument("trace")
    rp.add_argument("--plot", help="figure path (default: <trace>.png)")
    rp.add_argument("--no-plot", action="store_true")
    return p


def resolve_run_args(args, environ=None) -> dict:
    """Flag values with the environment filling unset flags."""
    environ = os.environ if environ is None else environ
    out = {}
    for name in RUN_FLAGS:
        v = getattr(args, name, None)
        if v is None:
            v = environ.get(ENV_PREFIX + name.upper())
        if v is not None and v != "":
            out[name] = v
    return out


def cmd_run(args) -> int:
    opts = resolve_run_args(args)
    try:
        raw = load_config_file(opts.pop("config")) if "config" in opts else {}
        cfg = parse_config(raw, **opts)
    except ConfigError as exc:
        _error_report("config", str(exc))
        return EXIT_CONFIG
    log = (lambda *a: None) if args.quiet else (lambda msg: print(msg, flush=True))
    try:
        run_pipeline(cfg, log=log)
    except StageError as exc:
        _error_report("stage", exc.message, stage=exc.stage,
                      manifest=str(Path(cfg.out) / "manifest.json"))
        return EXIT_STAGE
    except ConfigError as exc:
        _error_report("config", str(exc))
        return EXIT_CONFIG
    return EXIT_OK


def timeline(trace: EpisodeTrace) -> list[str]:
    """One line per event, bracketed by start and end lines."""
    lines = [f"t=0.00s start ({len(trace.actor_ids)} actors)"]
    for e in trace.events:
        t = e.tick * trace.dt
        if e.kind == "collision":
            who = ", ".join(a if isinstance(a, str) else f"actor {a}" for a in e.payload.get("actors", []))
            lines.append(f"t={t:.2f}s collision({who})")
        else:
            detail = ", ".join(f"{k}={v:.2f}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in sorted(e.payload.items()))
            lines.append(f"t={t:.2f}s {e.kind}" + (f"({detail})" if detail else ""))
    lines.append(f"t={(trace.n_ticks - 1) * trace.dt:.2f}s end ({trace.end_reason})")
    return lines


def cmd_replay(args) -> int:
    try:
        trace = EpisodeTrace.read(args.trace)
    except OSError as exc:
        _error_report("trace", f"cannot read {args.trace}: {exc.strerror}")
        return EXIT_CONFIG
    except TraceError as exc:
        _error_report("trace", str(exc))
        return EXIT_CONFIG
    for line in timeline(trace):
        print(line)
    if not args.no_plot:
        from .plotting import plot_trajectories
        route = wmap = None
        head = trace.header
        if "template_id" in head and "route_id" in head:
            from .scenarios.spec import benign_spec, instantiate_scenario
            world = instantiate_scenario(benign_spec(int(head["template_id"]), int(head["route_id"])))
            route, wmap = world.route, world.map
        path = args.plot or str(Path(args.trace).with_suffix(".png"))
        title = f"{head.get('agent', 'ego')}  T{head.get('template_id', '?')} R{head.get('route_id', '?')}"
        plot_trajectories(trace, path, route=route, wmap=wmap, title=title)
        print(f"plot written to {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_replay(args)


if __name__ == "__main__":
    sys.exit(main())

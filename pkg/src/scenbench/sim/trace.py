"""Episode traces and their line-delimited JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .world import EVENT_KINDS, Event

TRACE_SCHEMA = "scenbench.trace/1"


class TraceError(ValueError):
    """Raised for truncated, corrupt or schema-mismatched traces."""


@dataclass
class EpisodeTrace:
    """States, controls and events of one rollout, one row per tick.

    Row 0 holds the initial state and has no controls; row k holds the state
    reached at tick k and the controls applied during tick k-1 -> k.
    """

    dt: float
    ego: np.ndarray                  # (T, 4): x, y, heading, speed
    ego_controls: np.ndarray         # (T, 2): acceleration, steering (row 0 is nan)
    actor_ids: list[int]
    actor_meta: list[dict]           # kind, role per actor
    actors: np.ndarray               # (T, n, 4)
    actor_controls: np.ndarray       # (T, n, 2)
    events: list[Event]
    end_reason: str
    header: dict = field(default_factory=dict)
    min_adversary_distance: float = float("inf")
    # (T, 3): route progress (m), lateral deviation (m), off-road flag
    signals: np.ndarray | None = None

    @property
    def n_ticks(self) -> int:
        return len(self.ego)

    @property
    def collided(self) -> bool:
        return any(e.kind == "collision" for e in self.events)

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    # -- line-delimited form -------------------------------------------------
    def to_lines(self) -> list[str]:
        head = dict(self.header)
        head.update({"schema": TRACE_SCHEMA, "dt": self.dt,
                     "actors": [dict(id=i, **m) for i, m in zip(self.actor_ids, self.actor_meta)]})
        lines = [_dumps(head)]
        by_tick: dict[int, list] = {}
        for e in self.events:
            by_tick.setdefault(e.tick, []).append({"kind": e.kind, "payload": e.payload})
        for k in range(self.n_ticks):
            rec = {
                "tick": k,
                "ego": [float(v) for v in self.ego[k]],
                "actors": {str(i): [float(v) for v in self.actors[k, j]]
                           for j, i in enumerate(self.actor_ids)},
                "controls": None if k == 0 else {
                    "ego": [float(v) for v in self.ego_controls[k]],
                    **{str(i): [float(v) for v in self.actor_controls[k, j]]
                       for j, i in enumerate(self.actor_ids)
                       if not np.isnan(self.actor_controls[k, j, 0])},
                },
                "events": by_tick.get(k, []),
            }
            if self.signals is not None:
                rec["sense"] = [float(v) for v in self.signals[k]]
            lines.append(_dumps(rec))
        lines.append(_dumps({"end": {"reason": self.end_reason, "ticks": self.n_ticks,
                                     "min_adversary_distance": _finite_or_none(self.min_adversary_distance)}}))
        return lines

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def from_lines(cls, lines) -> "EpisodeTrace":
        lines = [ln for ln in lines if ln.strip()]
        if not lines:
            raise TraceError("empty trace")
        head = _loads(lines[0], 1)
        version = head.get("schema")
        if version != TRACE_SCHEMA:
            raise TraceError(f"trace schema mismatch: file has {version!r}, reader expects {TRACE_SCHEMA!r}")
        meta = head.pop("actors", [])
        dt = float(head.pop("dt"))
        head.pop("schema")
        ids = [int(m["id"]) for m in meta]
        actor_meta = [{k: v for k, v in m.items() if k != "id"} for m in meta]
        ego, ectl, act, actl, events, sense = [], [], [], [], [], []
        end = None
        for lineno, line in enumerate(lines[1:], start=2):
            rec = _loads(line, lineno)
            if "end" in rec:
                end = rec["end"]
                if lineno != len(lines):
                    raise TraceError(f"line {lineno}: records after end marker")
                break
            try:
                k = int(rec["tick"])
                if k != len(ego):
                    raise TraceError(f"line {lineno}: expected tick {len(ego)}, found {k}")
                ego.append([float(v) for v in rec["ego"]])
                act.append([[float(v) for v in rec["actors"][str(i)]] for i in ids])
                ctl = rec["controls"] or {}
                ectl.append(ctl.get("ego", [np.nan, np.nan]))
                actl.append([ctl.get(str(i), [np.nan, np.nan]) for i in ids])
                if "sense" in rec:
                    sense.append([float(v) for v in rec["sense"]])
                for e in rec["events"]:
                    if e["kind"] not in EVENT_KINDS:
                        raise TraceError(f"line {lineno}: unknown event kind {e['kind']!r}")
                    events.append(Event(k, e["kind"], e.get("payload", {})))
            except TraceError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceError(f"line {lineno}: malformed record ({exc})") from None
        if end is None:
            raise TraceError("truncated trace: no end marker")
        if not ego:
            raise TraceError("trace has no tick records")
        n = len(ids)
        mind = end.get("min_adversary_distance")
        return cls(dt, np.array(ego), np.array(ectl, dtype=float), ids, actor_meta,
                   np.array(act).reshape(len(ego), n, 4),
                   np.array(actl, dtype=float).reshape(len(ego), n, 2),
                   events, end["reason"], head, float("inf") if mind is None else float(mind),
                   np.array(sense) if len(sense) == len(ego) else None)

    @classmethod
    def read(cls, path) -> "EpisodeTrace":
        with open(path) as fh:
            return cls.from_lines(fh.read().splitlines())


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _loads(line: str, lineno: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceError(f"line {lineno}: corrupt record ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise TraceError(f"line {lineno}: record is not an object")
    return obj


def _finite_or_none(x: float):
    return None if not np.isfinite(x) else float(x)

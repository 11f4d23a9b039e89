"""JSON-lines replay logs: serialize episodes, read them back exactly.

One JSON object per line.  A log carries a meta header, one record per
vehicle per substep, per-decision records (actions, rewards, corrections,
conflicts), intent records, and a closing summary.  Reading a log rebuilds
the EpisodeRecord bit-for-bit, so metrics recomputed from a replay equal
the live values.
"""

from __future__ import annotations

import json
from pathlib import Path

from .metrics import EpisodeRecord

FORMAT_VERSION = 1


class ReplayError(ValueError):
    """Raised for truncated or corrupt replay logs; carries the line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def episode_lines(record: EpisodeRecord):
    """Yield the JSON lines for one episode."""
    yield _dumps(
        {
            "type": "meta",
            "version": FORMAT_VERSION,
            "dt": record.dt,
            "substeps": record.substeps_per_decision,
            "seed": record.seed,
            "mode": record.mode,
            "heterogeneous": record.heterogeneous,
            "dropped_spawns": record.dropped_spawns,
            "vehicles": {str(vid): meta for vid, meta in record.vehicles.items()},
        }
    )
    for f, frame in enumerate(record.substep_states):
        for vid, kind, x, y, v, theta, lane in frame:
            yield _dumps(
                {
                    "type": "substep",
                    "t": f,
                    "id": vid,
                    "kind": kind,
                    "x": x,
                    "y": y,
                    "v": v,
                    "theta": theta,
                    "lane": lane,
                }
            )
    for step, decision in enumerate(record.decisions):
        payload = dict(decision)
        payload["type"] = "decision"
        payload["step"] = step
        payload["proposed"] = {str(k): v for k, v in payload["proposed"].items()}
        payload["final"] = {str(k): v for k, v in payload["final"].items()}
        payload["masked"] = {str(k): v for k, v in payload["masked"].items()}
        payload["rewards"] = {str(k): v for k, v in payload["rewards"].items()}
        payload["reward_terms"] = {str(k): v for k, v in payload["reward_terms"].items()}
        yield _dumps(payload)
    for step_intents in record.intents:
        for rec in step_intents.values():
            yield _dumps(rec)
    yield _dumps(
        {
            "type": "summary",
            "steps": len(record.decisions),
            "frames": len(record.substep_states),
            "terminal": record.terminal,
            "collision_steps": sum(1 for d in record.decisions if d["collision"]),
            "corrections": sum(len(d.get("corrections", [])) for d in record.decisions),
        }
    )


def write_episode(path: str | Path, record: EpisodeRecord) -> None:
    with open(path, "w") as fh:
        for line in episode_lines(record):
            fh.write(line)
            fh.write("\n")


def read_episode(path: str | Path) -> EpisodeRecord:
    """Parse one episode log back into an EpisodeRecord.

    Truncated or corrupt logs raise ReplayError pointing at the first bad
    line (a missing summary counts as truncation at end-of-file).
    """
    record: EpisodeRecord | None = None
    frames: dict[int, list] = {}
    decisions: dict[int, dict] = {}
    intents: dict[int, dict[int, dict]] = {}
    summary = None
    lineno = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as err:
                raise ReplayError(f"invalid JSON ({err.msg})", lineno) from err
            kind = obj.get("type")
            if kind == "meta":
                if obj.get("version") != FORMAT_VERSION:
                    raise ReplayError(f"unsupported log version {obj.get('version')}", lineno)
                record = EpisodeRecord(
                    dt=obj["dt"],
                    substeps_per_decision=obj["substeps"],
                    seed=obj["seed"],
                    mode=obj["mode"],
                    heterogeneous=obj["heterogeneous"],
                    dropped_spawns=obj["dropped_spawns"],
                    vehicles={int(k): v for k, v in obj["vehicles"].items()},
                )
            elif kind == "substep":
                frames.setdefault(obj["t"], []).append(
                    (obj["id"], obj["kind"], obj["x"], obj["y"], obj["v"], obj["theta"], obj["lane"])
                )
            elif kind == "decision":
                d = dict(obj)
                step = d.pop("step")
                d.pop("type")
                d["proposed"] = {int(k): v for k, v in d["proposed"].items()}
                d["final"] = {int(k): v for k, v in d["final"].items()}
                d["masked"] = {int(k): v for k, v in d["masked"].items()}
                d["rewards"] = {int(k): v for k, v in d["rewards"].items()}
                d["reward_terms"] = {int(k): v for k, v in d["reward_terms"].items()}
                decisions[step] = d
            elif kind == "intent":
                intents.setdefault(obj["step"], {})[obj["id"]] = obj
            elif kind == "summary":
                summary = (obj, lineno)
            else:
                raise ReplayError(f"unknown record type {kind!r}", lineno)
    if record is None:
        raise ReplayError("missing meta record", 1)
    if summary is None:
        raise ReplayError("missing summary record (truncated log)", lineno + 1)
    record.substep_states = [frames[f] for f in sorted(frames)]
    record.decisions = [decisions[s] for s in sorted(decisions)]
    record.intents = [intents[s] for s in sorted(intents)] if intents else []
    record.terminal = summary[0]["terminal"]
    obj, line = summary
    if obj["steps"] != len(record.decisions):
        raise ReplayError(
            f"summary says {obj['steps']} steps, log has {len(record.decisions)}", line
        )
    if obj["frames"] != len(record.substep_states):
        raise ReplayError(
            f"summary says {obj['frames']} frames, log has {len(record.substep_states)}", line
        )
    return record


def read_episodes(paths) -> list[EpisodeRecord]:
    return [read_episode(p) for p in paths]

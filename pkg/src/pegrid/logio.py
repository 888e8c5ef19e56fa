"""Episode logs and their line-delimited serialization.

A log is one header, one record per timestep, and one footer. The format
is strict JSONL: a versioned header, exact field sets (unknown or missing
fields are corruption, not extensions), and deterministic bytes --
serializing the same log twice yields identical output.

Step records hold full agent states, the action and per-side rewards of
the transition taken from that step (absent on the final record), each
observer's detections, and a digest of each observer's visible-cell set.
Online episodes additionally record the classifier trace (probabilities,
deployed level, switch flag) on every step; ``strip_online`` removes that
trace, yielding exactly the log an offline rollout of the same seed and
deployed pair would have produced.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import CorruptRecordError, VersionMismatchError
from .world import Action, GridMap, JointAction, Status

LOG_VERSION = 1

_HEADER_KEYS = {"type", "version", "mode", "seed", "map_hash", "scenario", "policies", "config_hash"}
_STEP_KEYS = {"type", "t", "agents", "obs"}
_STEP_OPT_KEYS = {"action", "rewards"}
_ONLINE_KEYS = {"probs", "deployed", "switched"}
_FOOTER_KEYS = {"type", "status", "final_t"}


def map_hash(grid: GridMap) -> str:
    return hashlib.sha256(grid.text.encode()).hexdigest()[:16]


def digest_cells(cells) -> str:
    """Compact integrity digest of a visible-cell set: ``count:hash12``."""
    blob = json.dumps(sorted(cells)).encode()
    return f"{len(cells)}:{hashlib.sha256(blob).hexdigest()[:12]}"


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class StepRecord:
    t: int
    agents: dict  # role -> [[x, y], heading]
    obs: dict  # observer -> {"visible": digest, "detections": [[role, [x,y]], ...]}
    action: dict | None = None  # role -> action value
    rewards: tuple | None = None  # (pursuer, evader)
    probs: tuple | None = None  # online only
    deployed: int | None = None
    switched: bool | None = None

    def joint_action(self) -> JointAction | None:
        if self.action is None:
            return None
        return JointAction(
            Action(self.action["hlp"]), Action(self.action["llp"]), Action(self.action["evader"])
        )


@dataclass
class EpisodeLog:
    header: dict
    steps: list = field(default_factory=list)
    status: Status = Status.RUNNING
    final_t: int = 0

    @property
    def online(self) -> bool:
        return self.header.get("mode") == "online"

    def evader_level(self) -> int:
        return self.header["policies"]["evader_level"]


def strip_online(log: EpisodeLog) -> EpisodeLog:
    """Drop the classifier trace and relabel the header as offline."""
    header = {k: v for k, v in log.header.items() if k != "controller"}
    header["mode"] = "offline"
    steps = [
        replace(rec, probs=None, deployed=None, switched=None) for rec in log.steps
    ]
    return EpisodeLog(header=header, steps=steps, status=log.status, final_t=log.final_t)


def _step_to_dict(rec: StepRecord, online: bool) -> dict:
    d = {"type": "step", "t": rec.t, "agents": rec.agents, "obs": rec.obs}
    if rec.action is not None:
        d["action"] = rec.action
        d["rewards"] = list(rec.rewards)
    if online:
        d["probs"] = list(rec.probs)
        d["deployed"] = rec.deployed
        d["switched"] = rec.switched
    return d


def serialize_log(log: EpisodeLog) -> str:
    lines = []
    header = {"type": "header", "version": LOG_VERSION, **log.header}
    lines.append(json.dumps(header, sort_keys=True, separators=(",", ":")))
    for rec in log.steps:
        lines.append(
            json.dumps(_step_to_dict(rec, log.online), sort_keys=True, separators=(",", ":"))
        )
    footer = {"type": "footer", "status": log.status.value, "final_t": log.final_t}
    lines.append(json.dumps(footer, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def _require_keys(d: dict, required: set, optional: set, line_no: int) -> None:
    keys = set(d)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise CorruptRecordError(line_no, f"line {line_no}: missing fields {sorted(missing)}")
    if unknown:
        raise CorruptRecordError(line_no, f"line {line_no}: unknown fields {sorted(unknown)}")


def deserialize_log(text: str) -> EpisodeLog:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise CorruptRecordError(1, "empty log document")
    parsed = []
    for i, line in enumerate(lines, start=1):
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CorruptRecordError(i, f"line {i}: {exc.msg}") from exc

    header = parsed[0]
    if header.get("type") != "header":
        raise CorruptRecordError(1, "line 1: expected header record")
    version = header.get("version")
    if version != LOG_VERSION:
        raise VersionMismatchError(f"log version {version!r}, supported {LOG_VERSION}")
    header_keys = set(_HEADER_KEYS) | {"version"}
    optional = {"controller"} if header.get("mode") == "online" else set()
    _require_keys(header, header_keys, optional, 1)
    online = header["mode"] == "online"

    if parsed[-1].get("type") != "footer":
        raise CorruptRecordError(len(lines), f"line {len(lines)}: log truncated, no footer")
    footer = parsed[-1]
    _require_keys(footer, _FOOTER_KEYS, set(), len(lines))

    steps = []
    for i, d in enumerate(parsed[1:-1], start=2):
        if d.get("type") != "step":
            raise CorruptRecordError(i, f"line {i}: expected step record")
        required = set(_STEP_KEYS) | (_ONLINE_KEYS if online else set())
        _require_keys(d, required, _STEP_OPT_KEYS, i)
        if ("action" in d) != ("rewards" in d):
            raise CorruptRecordError(i, f"line {i}: action/rewards must appear together")
        steps.append(
            StepRecord(
                t=d["t"],
                agents=d["agents"],
                obs=d["obs"],
                action=d.get("action"),
                rewards=tuple(d["rewards"]) if "rewards" in d else None,
                probs=tuple(d["probs"]) if online else None,
                deployed=d.get("deployed"),
                switched=d.get("switched"),
            )
        )

    body = {k: v for k, v in header.items() if k not in ("type", "version")}
    return EpisodeLog(
        header=body,
        steps=steps,
        status=Status(footer["status"]),
        final_t=footer["final_t"],
    )

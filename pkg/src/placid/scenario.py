"""Scripted deterministic runs: a meeting described as data.

A scenario file is JSON: participants, a seed, and a script of steps
``{"at": tick, "actor": "alice", "op": "post_message", "args": {...}}``.
Steps are applied to a fresh simulated kernel at their ticks; the run then
drains to quiescence, writes the trace, and compares the digest against the
scenario's expected value when present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .interaction import AgentId
from .microtools import bootstrap_kernel, build_request, default_descriptor
from .microtools.platform import DIFFUSE_OPS, REQUEST_OPS
from .persistence import SessionLog, attach_archive

KNOWN_OPS = set(REQUEST_OPS) | set(DIFFUSE_OPS) | {"connect", "disconnect"}


class ScenarioError(Exception):
    """Scenario file failed to parse or validate."""


@dataclass(frozen=True)
class Step:
    at: int
    actor: str
    op: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    participants: list[str]
    script: list[Step]
    seed: int = 0
    conv_timeout: int = 100
    expected_digest: str | None = None
    descriptor: dict[str, Any] | None = None


@dataclass
class ScenarioResult:
    name: str
    digest: str
    tick: int
    quiescent: bool
    events: int
    expected_digest: str | None
    trace_path: str | None = None
    log_path: str | None = None

    @property
    def digest_ok(self) -> bool:
        return self.expected_digest is None or self.digest == self.expected_digest

    def summary(self) -> dict[str, Any]:
        return {
            "scenario": self.name,
            "digest": self.digest,
            "expected_digest": self.expected_digest,
            "digest_ok": self.digest_ok,
            "tick": self.tick,
            "quiescent": self.quiescent,
            "events": self.events,
            "trace": self.trace_path,
            "log": self.log_path,
        }


def parse_scenario(data: dict[str, Any], name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    participants = data.get("participants")
    if not isinstance(participants, list) or not all(isinstance(p, str) for p in participants):
        raise ScenarioError("participants must be a list of user names")
    raw_script = data.get("script", [])
    if not isinstance(raw_script, list):
        raise ScenarioError("script must be a list of steps")
    script: list[Step] = []
    last_at = 0
    for index, raw in enumerate(raw_script):
        if not isinstance(raw, dict):
            raise ScenarioError(f"step {index}: must be an object")
        op = raw.get("op")
        if op not in KNOWN_OPS:
            raise ScenarioError(f"step {index}: unknown op {op!r}")
        at = raw.get("at")
        if not isinstance(at, int) or at < 0:
            raise ScenarioError(f"step {index}: bad tick {at!r}")
        if at < last_at:
            raise ScenarioError(f"step {index}: ticks must be non-decreasing")
        last_at = at
        actor = raw.get("actor")
        if not isinstance(actor, str) or not actor:
            raise ScenarioError(f"step {index}: missing actor")
        args = raw.get("args", {})
        if not isinstance(args, dict):
            raise ScenarioError(f"step {index}: args must be an object")
        script.append(Step(at=at, actor=actor, op=op, args=args))
    return Scenario(
        name=data.get("name", name),
        participants=participants,
        script=script,
        seed=data.get("seed", 0),
        conv_timeout=data.get("conv_timeout", 100),
        expected_digest=data.get("expected_digest"),
        descriptor=data.get("descriptor"),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: bad JSON: {exc}") from exc
    return parse_scenario(data, name=path.stem)


def execute_scenario(
    scenario: Scenario,
    trace_path: str | Path | None = None,
    log_path: str | Path | None = None,
    seed: int | None = None,
    max_ticks: int = 100_000,
) -> ScenarioResult:
    """Run the script against a fresh kernel and drain to quiescence."""
    effective_seed = scenario.seed if seed is None else seed
    descriptor = scenario.descriptor or default_descriptor(
        users=[{"name": p, "password": f"{p}-pass"} for p in scenario.participants]
    )
    kernel = bootstrap_kernel(descriptor, effective_seed, scenario.conv_timeout)
    log: SessionLog | None = None
    if log_path is not None:
        log = SessionLog(log_path)
        log.write_bootstrap(kernel.tick, descriptor, effective_seed, scenario.conv_timeout)
        attach_archive(kernel, log)
        kernel.extensions["archive_log"] = log
    for step in scenario.script:
        kernel.run_until(step.at)
        actor = AgentId.parse(step.actor) if ":" in step.actor else AgentId.user(step.actor)
        act = build_request(step.op, actor, step.args)
        kernel.submit(act)
    kernel.run(max_ticks)
    if log is not None:
        log.seal(kernel)
    if trace_path is not None:
        Path(trace_path).write_text(kernel.trace_text(), "utf-8")
    return ScenarioResult(
        name=scenario.name,
        digest=kernel.trace_digest(),
        tick=kernel.tick,
        quiescent=kernel.quiescent,
        events=len(kernel.trace),
        expected_digest=scenario.expected_digest,
        trace_path=str(trace_path) if trace_path else None,
        log_path=str(log_path) if log_path else None,
    )

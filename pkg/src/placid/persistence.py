"""Append-only session archive: every accepted act, checksummed, replayable.

The log is UTF-8 JSON lines, one record per accepted submission:
``{"ts": <tick>, "act": {<wire frame>}, "crc": <crc32>}``. The crc covers
the exact bytes of the record without its crc field, so any byte-level
corruption is caught on load. The first record of a kernel-produced log is
a bootstrap header carrying the deployment descriptor; a final halt marker
records the tick the run stopped at.

Replay feeds the externally-submitted records of a validated log back into
a fresh kernel at their original ticks; everything agents did in between is
deterministic, so the rebuilt run reproduces the original trace digest.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable

from .agents import matches_type
from .interaction import AgentId, CommunicationAct, Performative, make_act
from .wire import MalformedFrame, act_to_frame, dumps, frame_to_act

if TYPE_CHECKING:
    from .kernel import Kernel

BOOTSTRAP_TYPE = "kernel.bootstrap"
HALT_TYPE = "kernel.halt"
_KERNEL = AgentId.agent("kernel")


class PersistenceError(Exception):
    pass


class OutOfOrder(PersistenceError):
    pass


class CorruptLog(PersistenceError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class IoFailure(PersistenceError):
    pass


@dataclass(frozen=True)
class LogRecord:
    """One archived act at the logical time it was accepted.

    ``seq`` is the kernel's submission counter, present exactly for acts
    that entered through the external boundary; agent emissions carry none
    because replay regenerates them.
    """

    ts: int
    act: CommunicationAct
    seq: int | None = None

    def to_line(self) -> str:
        inner = dumps({"ts": self.ts, "act": act_to_frame(self.act, self.seq)})
        crc = zlib.crc32(inner.encode("utf-8"))
        return inner[:-1] + f',"crc":{crc}}}'


def _parse_line(line: str, offset: int) -> LogRecord:
    idx = line.rfind(',"crc":')
    if idx < 0 or not line.endswith("}"):
        raise CorruptLog("record missing crc", offset)
    inner = line[:idx] + "}"
    try:
        crc = int(line[idx + 7 : -1])
    except ValueError:
        raise CorruptLog("unreadable crc", offset) from None
    if zlib.crc32(inner.encode("utf-8")) != crc:
        raise CorruptLog("checksum mismatch", offset)
    try:
        payload = json.loads(inner)
        frame = frame_to_act(payload["act"])
        ts = payload["ts"]
    except (json.JSONDecodeError, KeyError, MalformedFrame) as exc:
        raise CorruptLog(f"unreadable record: {exc}", offset) from exc
    if not isinstance(ts, int):
        raise CorruptLog("ts must be an integer", offset)
    return LogRecord(ts=ts, act=frame.act, seq=frame.seq)


class SessionLog:
    """Append-only archive file for one run."""

    def __init__(self, path: str | Path, fsync: bool = False) -> None:
        self.path = Path(path)
        self.fsync = fsync
        self._last_ts: int | None = None
        self._count = 0
        if self.path.exists():
            for record in self.records():
                self._last_ts = record.ts
                self._count += 1

    def __len__(self) -> int:
        return self._count

    def append(self, record: LogRecord) -> "SessionLog":
        """Durable append; timestamps must be non-decreasing."""
        if self._last_ts is not None and record.ts < self._last_ts:
            raise OutOfOrder(f"ts {record.ts} after ts {self._last_ts}")
        data = (record.to_line() + "\n").encode("utf-8")
        try:
            with open(self.path, "ab") as fh:
                fh.write(data)
                if self.fsync:
                    fh.flush()
                    os.fsync(fh.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._last_ts = record.ts
        self._count += 1
        return self

    def records(self) -> list[LogRecord]:
        """Read and checksum-validate the whole log."""
        out: list[LogRecord] = []
        if not self.path.exists():
            return out
        with open(self.path, "rb") as fh:
            raw = fh.read()
        offset = 0
        while offset < len(raw):
            nl = raw.find(b"\n", offset)
            if nl < 0:
                raise CorruptLog("truncated record", offset)
            chunk = raw[offset:nl]
            try:
                text = chunk.decode("utf-8")
            except UnicodeDecodeError:
                raise CorruptLog("invalid UTF-8", offset) from None
            out.append(_parse_line(text, offset))
            offset = nl + 1
        return out

    # Markers written by the hosting kernel wrapper.

    def write_bootstrap(self, ts: int, descriptor: dict[str, Any], seed: int, conv_timeout: int) -> None:
        body = {"descriptor": descriptor, "seed": seed, "conv_timeout": conv_timeout}
        act = make_act(Performative.DIFFUSE, _KERNEL, [_KERNEL], BOOTSTRAP_TYPE, body)
        self.append(LogRecord(ts=ts, act=act))

    def seal(self, kernel: "Kernel") -> None:
        body = {"tick": kernel.tick, "digest": kernel.trace_digest()}
        act = make_act(Performative.DIFFUSE, _KERNEL, [_KERNEL], HALT_TYPE, body)
        self.append(LogRecord(ts=kernel.tick, act=act))


def append(log: SessionLog, record: LogRecord) -> SessionLog:
    return log.append(record)


def attach_archive(kernel: "Kernel", log: SessionLog) -> SessionLog:
    """Make the kernel archive every accepted submission into ``log``."""

    def sink(tick: int, act: CommunicationAct, seq: int | None) -> None:
        log.append(LogRecord(ts=tick, act=act, seq=seq))

    kernel.archive = sink
    return log


KernelBuilder = Callable[[dict[str, Any], int, int], "Kernel"]


def replay(log: SessionLog, bootstrap: KernelBuilder | None = None) -> "Kernel":
    """Rebuild the run a log records and return the resulting kernel.

    Externally-submitted records (those carrying a seq) are resubmitted at
    their recorded ticks; acts emitted by agents regenerate deterministically
    and are skipped. The rebuilt kernel's trace digest equals the original
    run's.
    """
    from .kernel import Kernel  # local import: kernel has no archive dependency

    records = log.records()
    if not records:
        return Kernel()
    head = records[0]
    if head.act.msg_type == BOOTSTRAP_TYPE:
        body = head.act.body
        if bootstrap is None:
            from .microtools import bootstrap_kernel

            bootstrap = bootstrap_kernel
        kernel = bootstrap(body["descriptor"], body["seed"], body["conv_timeout"])
        records = records[1:]
    else:
        kernel = Kernel()
    halt_tick: int | None = None
    if records and records[-1].act.msg_type == HALT_TYPE:
        halt_tick = records[-1].act.body["tick"]
        records = records[:-1]
    for record in records:
        if record.seq is None:
            continue
        kernel.run_until(record.ts)
        kernel.submit(record.act)
    if halt_tick is not None:
        kernel.run_until(halt_tick)
    else:
        kernel.run()
    return kernel


def query(
    log: SessionLog,
    session_id: str | None = None,
    type_pattern: str | None = None,
    seq_range: tuple[int, int] | None = None,
) -> list[LogRecord]:
    """Order-preserving filter over the log.

    ``session_id`` matches the act body's ``session`` key; ``type_pattern``
    is exact or a ``prefix.*`` wildcard; ``seq_range`` is an inclusive bound
    on the body's ``seq`` and drops records that carry none.
    """
    out: list[LogRecord] = []
    for record in log.records():
        body = record.act.body if isinstance(record.act.body, dict) else {}
        if session_id is not None and body.get("session") != session_id:
            continue
        if type_pattern is not None and not matches_type(type_pattern, record.act.msg_type):
            continue
        if seq_range is not None:
            seq = body.get("seq")
            if not isinstance(seq, int) or not seq_range[0] <= seq <= seq_range[1]:
                continue
        out.append(record)
    return out


class LogStore:
    """Directory of session logs plus a global index file."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.json"

    def open(self, run_id: str, fsync: bool = False) -> SessionLog:
        log = SessionLog(self.root / f"{run_id}.jsonl", fsync=fsync)
        self._index_update(run_id, status="open")
        return log

    def seal(self, run_id: str, log: SessionLog, kernel: "Kernel") -> None:
        log.seal(kernel)
        self._index_update(run_id, status="sealed", records=len(log), digest=kernel.trace_digest())

    def list_runs(self) -> dict[str, Any]:
        if not self.index_path.exists():
            return {}
        return json.loads(self.index_path.read_text("utf-8")).get("runs", {})

    def _index_update(self, run_id: str, **fields: Any) -> None:
        runs = self.list_runs()
        entry = runs.get(run_id, {"file": f"{run_id}.jsonl"})
        entry.update(fields)
        runs[run_id] = entry
        payload = {"version": 1, "runs": {k: runs[k] for k in sorted(runs)}}
        self.index_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")

"""Line-delimited JSON frames carrying communication acts.

One frame per line, UTF-8, LF-terminated. Key order is fixed so equal acts
always serialize to equal bytes: ``v, perf, from, to, type, conv?, seq?,
body``. ``seq`` is the server-assigned per-client stream counter; client
frames never carry it. Version 1 rejects unknown keys.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from .interaction import ActError, AgentId, CommunicationAct, make_act

PROTOCOL_VERSION = 1

_REQUIRED_KEYS = {"v", "perf", "from", "to", "type", "body"}
_ALLOWED_KEYS = _REQUIRED_KEYS | {"conv", "seq"}


class MalformedFrame(ValueError):
    """Frame rejected: bad JSON, wrong version, or an act invariant breach."""

    def __init__(self, reason: str, offset: int = 0) -> None:
        super().__init__(f"{reason} (byte offset {offset})")
        self.reason = reason
        self.offset = offset


@dataclass(frozen=True)
class Frame:
    act: CommunicationAct
    seq: int | None = None


def act_to_frame(act: CommunicationAct, seq: int | None = None) -> dict[str, Any]:
    """Wire-form dict with the canonical key order."""
    frame: dict[str, Any] = {
        "v": PROTOCOL_VERSION,
        "perf": act.performative.value,
        "from": str(act.sender),
        "to": [str(r) for r in act.receivers],
        "type": act.msg_type,
    }
    if act.conv is not None:
        frame["conv"] = act.conv
    if seq is not None:
        frame["seq"] = seq
    frame["body"] = act.body
    return frame


def frame_to_act(frame: dict[str, Any]) -> Frame:
    """Validate a wire-form dict and rebuild the act it carries."""
    if not isinstance(frame, dict):
        raise MalformedFrame("frame must be a JSON object")
    keys = set(frame)
    unknown = keys - _ALLOWED_KEYS
    if unknown:
        raise MalformedFrame(f"unknown keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - keys
    if missing:
        raise MalformedFrame(f"missing keys: {sorted(missing)}")
    if frame["v"] != PROTOCOL_VERSION:
        raise MalformedFrame(f"unsupported version: {frame['v']!r}")
    seq = frame.get("seq")
    if seq is not None and not isinstance(seq, int):
        raise MalformedFrame("seq must be an integer")
    conv = frame.get("conv")
    if conv is not None and not isinstance(conv, str):
        raise MalformedFrame("conv must be a string")
    if not isinstance(frame["to"], list):
        raise MalformedFrame("receivers must be a list")
    try:
        sender = AgentId.parse(frame["from"])
        receivers = [AgentId.parse(r) for r in frame["to"]]
        act = make_act(frame["perf"], sender, receivers, frame["type"], frame["body"], conv=conv)
    except ActError as exc:
        raise MalformedFrame(f"invalid act: {exc}") from exc
    return Frame(act=act, seq=seq)


def dumps(frame: dict[str, Any]) -> str:
    return json.dumps(frame, separators=(",", ":"), ensure_ascii=False)


def encode(act: CommunicationAct, seq: int | None = None) -> bytes:
    """Serialize an act to one LF-terminated UTF-8 line."""
    line = dumps(act_to_frame(act, seq))
    if "\n" in line:
        raise MalformedFrame("frame must not embed newlines")
    return (line + "\n").encode("utf-8")


def decode_frame(line: bytes | str) -> Frame:
    """Parse one frame line into the act and optional stream seq."""
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame("invalid UTF-8", offset=exc.start) from exc
    else:
        text = line
    text = text.rstrip("\n")
    if "\n" in text:
        raise MalformedFrame("embedded newline", offset=text.index("\n"))
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"bad JSON: {exc.msg}", offset=exc.pos) from exc
    return frame_to_act(payload)


def decode(line: bytes | str) -> CommunicationAct:
    return decode_frame(line).act


def act_digest(act: CommunicationAct) -> str:
    """Short stable digest of an act's canonical wire form."""
    return hashlib.sha256(encode(act)).hexdigest()[:12]

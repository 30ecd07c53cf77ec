"""Domain records for the meeting micro-tools: sessions, chat, polls, agenda."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..interaction import AgentId

MAX_TEXT_LEN = 4096


class ToolError(Exception):
    """Micro-tool request rejection; ``code`` travels in error replies."""

    @property
    def code(self) -> str:
        return type(self).__name__


class AuthFailed(ToolError):
    pass


class SessionExists(ToolError):
    pass


class UnknownSession(ToolError):
    pass


class UnknownParticipant(ToolError):
    pass


class SessionClosed(ToolError):
    pass


class SessionNotActive(ToolError):
    pass


class NotPresent(ToolError):
    pass


class TextTooLong(ToolError):
    pass


class NotAuthorized(ToolError):
    pass


class BadOptions(ToolError):
    pass


class PollExists(ToolError):
    pass


class UnknownPoll(ToolError):
    pass


class PollClosed(ToolError):
    pass


class AlreadyVoted(ToolError):
    pass


class BadIndex(ToolError):
    pass


class PastStart(ToolError):
    pass


ERROR_BY_CODE: dict[str, type[ToolError]] = {
    cls.__name__: cls
    for cls in (
        AuthFailed,
        SessionExists,
        UnknownSession,
        UnknownParticipant,
        SessionClosed,
        SessionNotActive,
        NotPresent,
        TextTooLong,
        NotAuthorized,
        BadOptions,
        PollExists,
        UnknownPoll,
        PollClosed,
        AlreadyVoted,
        BadIndex,
        PastStart,
    )
}


class SessionState(str, Enum):
    OPENING = "opening"
    ACTIVE = "active"
    CLOSING = "closing"
    CLOSED = "closed"


_SESSION_ORDER = [
    SessionState.OPENING,
    SessionState.ACTIVE,
    SessionState.CLOSING,
    SessionState.CLOSED,
]


@dataclass
class Session:
    """One meeting: roster with presence, lifecycle state, transcript head."""

    id: str
    community_id: str
    opener: AgentId
    participants: list[AgentId]
    state: SessionState = SessionState.OPENING
    presence: dict[AgentId, bool] = field(default_factory=dict)
    transcript_head_seq: int = 0

    def advance(self, target: SessionState) -> None:
        if _SESSION_ORDER.index(target) < _SESSION_ORDER.index(self.state):
            raise ToolError(f"session {self.id}: cannot go {self.state.value} -> {target.value}")
        self.state = target

    def present_users(self) -> list[AgentId]:
        return sorted((u for u, p in self.presence.items() if p), key=str)

    def roster(self) -> dict[str, str]:
        return {
            str(u): ("present" if self.presence.get(u) else "absent")
            for u in sorted(self.participants, key=str)
        }


@dataclass(frozen=True)
class ChatMessage:
    """One transcript entry; seq is gap-free and session-global."""

    seq: int
    author: AgentId
    text: str
    tick: int

    def to_body(self) -> dict[str, Any]:
        return {"seq": self.seq, "author": str(self.author), "text": self.text, "tick": self.tick}

    @classmethod
    def from_body(cls, body: dict[str, Any]) -> "ChatMessage":
        return cls(
            seq=body["seq"],
            author=AgentId.parse(body["author"]),
            text=body["text"],
            tick=body.get("tick", 0),
        )


@dataclass(frozen=True)
class PollOutcome:
    counts: tuple[int, ...]
    winners: tuple[str, ...]
    status: str  # decided | tie


def tally(options: list[str], ballots: dict[AgentId, int]) -> PollOutcome:
    """Plurality count; winners is the full argmax set, in option order."""
    counts = [0] * len(options)
    for choice in ballots.values():
        counts[choice] += 1
    top = max(counts) if counts else 0
    winners = tuple(opt for opt, n in zip(options, counts) if n == top)
    status = "decided" if len(winners) == 1 else "tie"
    return PollOutcome(counts=tuple(counts), winners=winners, status=status)


class PollState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass
class Poll:
    id: str
    session: str
    opener: AgentId
    question: str
    options: list[str]
    state: PollState = PollState.OPEN
    ballots: dict[AgentId, int] = field(default_factory=dict)
    outcome: PollOutcome | None = None

    def counts(self) -> list[int]:
        return list(tally(self.options, self.ballots).counts)


@dataclass
class AgendaEntry:
    id: str
    session: str
    title: str
    start_tick: int
    participants: list[AgentId]
    auto_start: bool
    creator: AgentId
    fired: bool = False


@dataclass
class ToolState:
    """Shared micro-tool records, owned by the kernel's execution domain.

    Each structure is written only by its owning agent's handlers: sessions
    by the session host, transcripts by the chat agent, polls by the vote
    agent, entries by the diary agent.
    """

    sessions: dict[str, Session] = field(default_factory=dict)
    transcripts: dict[str, list[ChatMessage]] = field(default_factory=dict)
    polls: dict[str, dict[str, Poll]] = field(default_factory=dict)
    agenda: dict[str, AgendaEntry] = field(default_factory=dict)

    def session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def poll(self, session_id: str, poll_id: str) -> Poll:
        poll = self.polls.get(session_id, {}).get(poll_id)
        if poll is None:
            raise UnknownPoll(f"{session_id}/{poll_id}")
        return poll

    def snapshot(self) -> dict[str, Any]:
        return {
            "sessions": {
                sid: {
                    "state": s.state.value,
                    "opener": str(s.opener),
                    "roster": s.roster(),
                    "head_seq": s.transcript_head_seq,
                }
                for sid, s in sorted(self.sessions.items())
            },
            "transcripts": {
                sid: [m.to_body() for m in msgs]
                for sid, msgs in sorted(self.transcripts.items())
            },
            "polls": {
                sid: {
                    pid: {
                        "state": p.state.value,
                        "ballots": {str(v): i for v, i in sorted(p.ballots.items(), key=lambda kv: str(kv[0]))},
                        "outcome": (
                            {
                                "counts": list(p.outcome.counts),
                                "winners": list(p.outcome.winners),
                                "status": p.outcome.status,
                            }
                            if p.outcome
                            else None
                        ),
                    }
                    for pid, p in sorted(polls.items())
                }
                for sid, polls in sorted(self.polls.items())
            },
            "agenda": {
                eid: {"start_tick": e.start_tick, "fired": e.fired}
                for eid, e in sorted(self.agenda.items())
            },
        }

"""Speech-act messages and the conversation-pairing protocol.

Every exchange between agents is a :class:`CommunicationAct`: a performative
verb, a sender, one or more receivers, a dotted message type, and a body.
``ask`` and ``inform`` open a conversation that must be discharged by exactly
one ``answer`` / ``confirm`` (or by a timeout); ``diffuse`` is fan-out with no
reply obligation.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any


class Performative(str, Enum):
    """The five speech-act verbs agents can perform."""

    INFORM = "inform"
    DIFFUSE = "diffuse"
    ASK = "ask"
    ANSWER = "answer"
    CONFIRM = "confirm"

    @classmethod
    def parse(cls, text: str) -> "Performative":
        try:
            return cls(text)
        except ValueError:
            raise BadPerformative(f"unknown performative: {text!r}") from None


class ActError(ValueError):
    """Base class for malformed communication acts."""


class BadPerformative(ActError):
    pass


class BadAgentId(ActError):
    pass


class BadMsgType(ActError):
    pass


class InvalidReceivers(ActError):
    pass


class MissingConv(ActError):
    pass


class ForbiddenConv(ActError):
    """Conv id supplied on a performative that must not carry one."""


class NotAnOpener(ActError):
    """The performative expects no reply, so no conversation can open."""


class AlreadyClosed(ActError):
    """Reply addressed to a conversation that is no longer awaiting one."""


_NAME_RE = re.compile(r"[a-z0-9_-]+\Z")
_MSG_TYPE_RE = re.compile(r"[a-z0-9_]+(\.[a-z0-9_]+)*\Z")

# Group addressing: acts sent to "agent:community/<id>" are rewritten by the
# community's mediator into a fan-out. The slash form is reserved for this.
COMMUNITY_PREFIX = "community/"


@dataclass(frozen=True, order=True)
class AgentId:
    """Identity of a participant: a human-facing user agent or a tool agent.

    Canonical text form is ``<kind>:<name>``, e.g. ``user:alice`` or
    ``agent:vote``.
    """

    kind: str
    name: str

    def __post_init__(self) -> None:
        if self.kind not in ("user", "agent"):
            raise BadAgentId(f"kind must be 'user' or 'agent', got {self.kind!r}")
        bare = self.name
        if self.kind == "agent" and bare.startswith(COMMUNITY_PREFIX):
            bare = bare[len(COMMUNITY_PREFIX):]
        if not _NAME_RE.match(bare or ""):
            raise BadAgentId(f"bad agent name: {self.name!r}")

    @classmethod
    def parse(cls, text: str) -> "AgentId":
        kind, sep, name = text.partition(":")
        if not sep:
            raise BadAgentId(f"missing ':' in agent id: {text!r}")
        return cls(kind, name)

    @classmethod
    def user(cls, name: str) -> "AgentId":
        return cls("user", name)

    @classmethod
    def agent(cls, name: str) -> "AgentId":
        return cls("agent", name)

    @classmethod
    def community(cls, community_id: str) -> "AgentId":
        """Pseudo-receiver addressing every member of a community."""
        return cls("agent", COMMUNITY_PREFIX + community_id)

    @property
    def is_community(self) -> bool:
        return self.kind == "agent" and self.name.startswith(COMMUNITY_PREFIX)

    @property
    def community_id(self) -> str:
        if not self.is_community:
            raise ValueError(f"{self} is not a community pseudo-receiver")
        return self.name[len(COMMUNITY_PREFIX):]

    def __str__(self) -> str:
        return f"{self.kind}:{self.name}"


def _canon_body(value: Any) -> Any:
    """Normalize a body to plain JSON-compatible values (tuples become lists)."""
    if isinstance(value, dict):
        return {str(k): _canon_body(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canon_body(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise ActError(f"body value not JSON-compatible: {type(value).__name__}")


@dataclass(frozen=True)
class CommunicationAct:
    """One speech act: ⟨performative, sender, receivers, type, body⟩.

    ``conv`` ties replies to the conversation their opener started; the
    kernel stamps it onto opener acts at submission time.
    """

    performative: Performative
    sender: AgentId
    receivers: tuple[AgentId, ...]
    msg_type: str
    body: Any
    conv: str | None = None

    def with_conv(self, conv: str) -> "CommunicationAct":
        return replace(self, conv=conv)

    def with_receivers(self, receivers: list[AgentId]) -> "CommunicationAct":
        return replace(self, receivers=tuple(receivers))

    def with_sender(self, sender: AgentId) -> "CommunicationAct":
        return replace(self, sender=sender)


def make_act(
    performative: Performative | str,
    sender: AgentId,
    receivers: list[AgentId] | tuple[AgentId, ...],
    msg_type: str,
    body: Any,
    conv: str | None = None,
) -> CommunicationAct:
    """Build a validated act, or raise a typed :class:`ActError`.

    Receiver arity is 1 for every performative except ``diffuse`` (>= 1, no
    duplicates). ``answer``/``confirm`` require a conv id; ``diffuse`` must
    not carry one.
    """
    perf = Performative.parse(performative) if isinstance(performative, str) else performative
    recv = tuple(receivers)
    if perf is Performative.DIFFUSE:
        if len(recv) < 1:
            raise InvalidReceivers("diffuse needs at least one receiver")
        if len(set(recv)) != len(recv):
            raise InvalidReceivers("diffuse receivers must not repeat")
    elif len(recv) != 1:
        raise InvalidReceivers(f"{perf.value} takes exactly one receiver, got {len(recv)}")
    if perf in (Performative.ANSWER, Performative.CONFIRM) and conv is None:
        raise MissingConv(f"{perf.value} must carry a conv id")
    if perf is Performative.DIFFUSE and conv is not None:
        raise ForbiddenConv("diffuse must not carry a conv id")
    if not _MSG_TYPE_RE.match(msg_type or ""):
        raise BadMsgType(f"bad msg_type: {msg_type!r}")
    return CommunicationAct(perf, sender, recv, msg_type, _canon_body(body), conv)


_REPLY_OF = {
    Performative.ASK: Performative.ANSWER,
    Performative.INFORM: Performative.CONFIRM,
}


def expects_reply(performative: Performative) -> Performative | None:
    """ask pairs with answer, inform with confirm; everything else is terminal."""
    return _REPLY_OF.get(performative)


class ConversationState(str, Enum):
    AWAITING_REPLY = "awaiting_reply"
    CLOSED = "closed"
    TIMED_OUT = "timed_out"


class MatchOutcome(str, Enum):
    CLOSED = "closed"
    ORPHAN = "orphan"


_conv_ids = itertools.count(1)


@dataclass
class Conversation:
    """Reply obligation opened by an ask or inform, resolved exactly once."""

    id: str
    opener: CommunicationAct
    state: ConversationState = ConversationState.AWAITING_REPLY
    deadline: int = 0

    @property
    def open(self) -> bool:
        return self.state is ConversationState.AWAITING_REPLY

    def close(self) -> None:
        self._transition(ConversationState.CLOSED)

    def time_out(self) -> None:
        self._transition(ConversationState.TIMED_OUT)

    def _transition(self, target: ConversationState) -> None:
        if self.state is not ConversationState.AWAITING_REPLY:
            raise AlreadyClosed(f"conversation {self.id} already {self.state.value}")
        self.state = target


def open_conversation(
    act: CommunicationAct,
    now: int,
    timeout: int,
    conv_id: str | None = None,
) -> Conversation:
    """Open the reply obligation for an opener act.

    The id comes from, in order: the act's own conv (replayed submissions),
    the explicit ``conv_id`` (kernel counter), or a process-local counter.
    """
    if expects_reply(act.performative) is None:
        raise NotAnOpener(f"{act.performative.value} expects no reply")
    cid = act.conv or conv_id or f"c-{next(_conv_ids):06d}"
    return Conversation(id=cid, opener=act.with_conv(cid), deadline=now + timeout)


def match_reply(conv: Conversation, act: CommunicationAct) -> MatchOutcome:
    """Try to discharge ``conv`` with ``act``.

    Closes the conversation iff the act carries its id, is the expected reply
    performative, and comes from one of the opener's receivers. Anything else
    is an orphan and leaves the conversation untouched. Raises
    :class:`AlreadyClosed` if the conversation was already resolved.
    """
    if conv.state is not ConversationState.AWAITING_REPLY:
        raise AlreadyClosed(f"conversation {conv.id} already {conv.state.value}")
    expected = expects_reply(conv.opener.performative)
    if (
        act.conv == conv.id
        and act.performative is expected
        and act.sender in conv.opener.receivers
    ):
        conv.close()
        return MatchOutcome.CLOSED
    return MatchOutcome.ORPHAN

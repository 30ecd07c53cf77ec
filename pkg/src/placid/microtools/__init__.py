"""Meeting micro-tools: chat, agenda, and vote as one agent community."""

from .deployment import (
    AGENDA,
    ARCHIVE,
    COM,
    DB,
    GROUP,
    PAPOTICIEL,
    VOTE,
    bootstrap_kernel,
    connection_act,
    default_descriptor,
)
from .platform import MeetingPlatform, RequestTimedOut, build_request
from .types import (
    ERROR_BY_CODE,
    AgendaEntry,
    AlreadyVoted,
    AuthFailed,
    BadIndex,
    BadOptions,
    ChatMessage,
    NotAuthorized,
    NotPresent,
    PastStart,
    Poll,
    PollClosed,
    PollExists,
    PollOutcome,
    PollState,
    Session,
    SessionClosed,
    SessionExists,
    SessionNotActive,
    SessionState,
    TextTooLong,
    ToolError,
    ToolState,
    UnknownParticipant,
    UnknownPoll,
    UnknownSession,
    tally,
)

__all__ = [
    "AGENDA",
    "ARCHIVE",
    "COM",
    "DB",
    "GROUP",
    "PAPOTICIEL",
    "VOTE",
    "bootstrap_kernel",
    "connection_act",
    "default_descriptor",
    "MeetingPlatform",
    "RequestTimedOut",
    "build_request",
    "ERROR_BY_CODE",
    "AgendaEntry",
    "AlreadyVoted",
    "AuthFailed",
    "BadIndex",
    "BadOptions",
    "ChatMessage",
    "NotAuthorized",
    "NotPresent",
    "PastStart",
    "Poll",
    "PollClosed",
    "PollExists",
    "PollOutcome",
    "PollState",
    "Session",
    "SessionClosed",
    "SessionExists",
    "SessionNotActive",
    "SessionState",
    "TextTooLong",
    "ToolError",
    "ToolState",
    "UnknownParticipant",
    "UnknownPoll",
    "UnknownSession",
    "tally",
]

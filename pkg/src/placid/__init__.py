"""placid: a cooperative micro-tool platform on a rule-based agent kernel."""

from .interaction import (
    AgentId,
    CommunicationAct,
    Conversation,
    Performative,
    expects_reply,
    make_act,
    match_reply,
    open_conversation,
)
from .kernel import Kernel, TraceEvent

__version__ = "0.1.0"

__all__ = [
    "AgentId",
    "CommunicationAct",
    "Conversation",
    "Performative",
    "expects_reply",
    "make_act",
    "match_reply",
    "open_conversation",
    "Kernel",
    "TraceEvent",
    "__version__",
]

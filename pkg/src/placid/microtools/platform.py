"""Synchronous facade over a meeting kernel.

Every operation builds the corresponding request act, submits it, lets the
kernel settle, and maps the tool agent's answer to a return value or a
typed error. The same act vocabulary drives the scenario runner and the
network gateway.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from ..interaction import AgentId, CommunicationAct, Performative, make_act
from ..persistence import SessionLog, attach_archive
from .deployment import (
    AGENDA,
    COM,
    DB,
    GROUP,
    PAPOTICIEL,
    VOTE,
    bootstrap_kernel,
    connection_act,
    default_descriptor,
)
from .types import (
    ERROR_BY_CODE,
    AgendaEntry,
    ChatMessage,
    Poll,
    Session,
    ToolError,
    ToolState,
    UnknownSession,
)

# op name -> (receiver, msg_type, body keys)
REQUEST_OPS: dict[str, tuple[AgentId, str, tuple[str, ...]]] = {
    "open_session": (PAPOTICIEL, "session.open", ("session", "participants", "title")),
    "check_presences": (PAPOTICIEL, "session.presences", ("session",)),
    "close_session": (PAPOTICIEL, "session.close", ("session",)),
    "post_message": (COM, "chat.post", ("session", "text")),
    "open_poll": (VOTE, "vote.open", ("session", "poll", "question", "options")),
    "cast_ballot": (VOTE, "vote.cast", ("session", "poll", "option")),
    "close_poll": (VOTE, "vote.close", ("session", "poll")),
    "schedule_entry": (
        AGENDA,
        "agenda.schedule",
        ("entry", "session", "title", "start_tick", "participants", "auto_start"),
    ),
    "archive_query": (DB, "archive.query", ("session", "type", "seq_lo", "seq_hi")),
    "group_members": (GROUP, "group.members", ("community",)),
}

DIFFUSE_OPS: dict[str, str] = {"leave": "session.leave"}


def build_request(op: str, actor: AgentId, args: dict[str, Any]) -> CommunicationAct:
    """The act a given micro-tool operation submits on behalf of an actor."""
    if op in ("connect", "disconnect"):
        return connection_act(actor, op == "connect")
    if op in DIFFUSE_OPS:
        return make_act(Performative.DIFFUSE, actor, [PAPOTICIEL], DIFFUSE_OPS[op], args)
    if op not in REQUEST_OPS:
        raise ValueError(f"unknown operation: {op}")
    receiver, msg_type, keys = REQUEST_OPS[op]
    body = {k: args[k] for k in keys if k in args}
    return make_act(Performative.ASK, actor, [receiver], msg_type, body)


class RequestTimedOut(ToolError):
    """No answer arrived before the request's conversation expired."""


class MeetingPlatform:
    """A simulated meeting deployment with a blocking operation surface."""

    def __init__(
        self,
        descriptor: dict[str, Any] | None = None,
        *,
        users: list[dict[str, str]] | None = None,
        seed: int = 0,
        conv_timeout: int = 100,
        log_path: str | Path | None = None,
        fsync: bool = False,
        connected_at_boot: bool = True,
    ) -> None:
        self.descriptor = descriptor or default_descriptor(
            users=users, connected_at_boot=connected_at_boot
        )
        self.kernel = bootstrap_kernel(self.descriptor, seed, conv_timeout)
        self.deliveries: list[tuple[int, AgentId, CommunicationAct]] = []
        self.kernel.taps.append(lambda tick, rcv, act: self.deliveries.append((tick, rcv, act)))
        self.log: SessionLog | None = None
        if log_path is not None:
            self.log = SessionLog(log_path, fsync=fsync)
            self.log.write_bootstrap(self.kernel.tick, self.descriptor, seed, conv_timeout)
            attach_archive(self.kernel, self.log)
            self.kernel.extensions["archive_log"] = self.log
        self._session_counter = 0
        self._poll_counter = 0

    # -- plumbing -------------------------------------------------------

    @property
    def tools(self) -> ToolState:
        return self.kernel.extensions["microtools"]

    def _actor(self, user: str | AgentId) -> AgentId:
        actor = user if isinstance(user, AgentId) else (
            AgentId.parse(user) if ":" in user else AgentId.user(user)
        )
        return actor

    def request(self, actor: str | AgentId, op: str, **args: Any) -> dict[str, Any]:
        """Submit one operation and block until its answer (or rejection)."""
        sender = self._actor(actor)
        act = build_request(op, sender, args)
        stamped = self.kernel.submit(act)
        self.kernel.run_settle()
        if act.performative is not Performative.ASK:
            return {"ok": True}
        if stamped is None:
            raise RequestTimedOut(f"{op} was not accepted")
        for _, receiver, delivered in self.deliveries:
            if (
                receiver == sender
                and delivered.conv == stamped.conv
                and delivered.performative is Performative.ANSWER
            ):
                body = delivered.body
                if body.get("ok"):
                    return body
                code = body.get("error", "")
                raise ERROR_BY_CODE.get(code, ToolError)(body.get("detail", code))
        raise RequestTimedOut(f"no answer to {op} (conv {stamped.conv})")

    def run_to_quiescence(self, max_ticks: int = 10_000) -> None:
        self.kernel.run(max_ticks)

    def seal(self) -> None:
        if self.log is not None:
            self.log.seal(self.kernel)

    # -- session lifecycle ------------------------------------------------

    def open_session(
        self,
        initiator: str | AgentId,
        participants: list[str],
        session_id: str | None = None,
        title: str = "",
    ) -> Session:
        if session_id is None:
            self._session_counter += 1
            session_id = f"s-{self._session_counter:03d}"
        body = self.request(
            initiator, "open_session", session=session_id, participants=participants, title=title
        )
        return self.tools.session(body["session"])

    def check_presences(self, session_id: str, asker: str | AgentId | None = None) -> dict[str, str]:
        actor = asker if asker is not None else self.tools.session(session_id).opener
        return self.request(actor, "check_presences", session=session_id)["roster"]

    def close_session(self, session_id: str, initiator: str | AgentId) -> Session:
        self.request(initiator, "close_session", session=session_id)
        return self.tools.session(session_id)

    def leave(self, session_id: str, user: str | AgentId) -> None:
        self.request(user, "leave", session=session_id)

    def connect_user(self, user: str | AgentId) -> None:
        self.request(user, "connect")

    def disconnect_user(self, user: str | AgentId) -> None:
        self.request(user, "disconnect")

    # -- chat ---------------------------------------------------------------

    def post_message(self, session_id: str, author: str | AgentId, text: str) -> ChatMessage:
        body = self.request(author, "post_message", session=session_id, text=text)
        return ChatMessage(
            seq=body["seq"], author=self._actor(author), text=body["text"], tick=body["tick"]
        )

    # -- polls ----------------------------------------------------------------

    def open_poll(
        self,
        session_id: str,
        opener: str | AgentId,
        question: str,
        options: list[str],
        poll_id: str | None = None,
    ) -> Poll:
        if poll_id is None:
            self._poll_counter += 1
            poll_id = f"p-{self._poll_counter:03d}"
        body = self.request(
            opener, "open_poll", session=session_id, poll=poll_id, question=question, options=options
        )
        return self.tools.poll(session_id, body["poll"])

    def cast_ballot(self, session_id: str, poll_id: str, voter: str | AgentId, option_index: int) -> Poll:
        self.request(voter, "cast_ballot", session=session_id, poll=poll_id, option=option_index)
        return self.tools.poll(session_id, poll_id)

    def close_poll(self, session_id: str, poll_id: str, closer: str | AgentId) -> Poll:
        self.request(closer, "close_poll", session=session_id, poll=poll_id)
        return self.tools.poll(session_id, poll_id)

    # -- agenda ---------------------------------------------------------------

    def schedule_entry(
        self,
        creator: str | AgentId,
        session_id: str,
        title: str,
        start_tick: int,
        participants: list[str],
        auto_start: bool = True,
        entry_id: str | None = None,
    ) -> AgendaEntry:
        body = self.request(
            creator,
            "schedule_entry",
            entry=entry_id or f"e-{session_id}",
            session=session_id,
            title=title,
            start_tick=start_tick,
            participants=participants,
            auto_start=auto_start,
        )
        return self.tools.agenda[body["entry"]]

    # -- archive ----------------------------------------------------------------

    def archive_query(
        self, session_id: str, seq_lo: int = 1, seq_hi: int | None = None
    ) -> list[ChatMessage]:
        """Archived chat messages of a session, in seq order, from the log."""
        if self.log is None:
            raise UnknownSession("no archive attached to this platform")
        from ..persistence import query

        opened = query(self.log, session_id=session_id, type_pattern="session.opened")
        if not opened:
            raise UnknownSession(session_id)
        hi = seq_hi if seq_hi is not None else 1 << 62
        records = query(self.log, session_id=session_id, type_pattern="chat.msg", seq_range=(seq_lo, hi))
        return [ChatMessage.from_body(r.act.body) for r in records]

    # -- observed streams (what a client of a user would have rendered) -------

    def transcript_of(self, user: str | AgentId, session_id: str) -> list[ChatMessage]:
        """Messages a user's client rendered: fan-out, backlog, and own acks."""
        uid = self._actor(user)
        seen: dict[int, ChatMessage] = {}
        for _, receiver, act in self.deliveries:
            if receiver != uid:
                continue
            body = act.body if isinstance(act.body, dict) else {}
            if body.get("session") != session_id:
                continue
            if act.msg_type == "chat.msg" and act.performative is Performative.DIFFUSE:
                message = ChatMessage.from_body(body)
                seen[message.seq] = message
            elif act.msg_type == "chat.backlog":
                for entry in body.get("messages", []):
                    message = ChatMessage.from_body(entry)
                    seen[message.seq] = message
            elif (
                act.msg_type == "chat.post"
                and act.performative is Performative.ANSWER
                and body.get("ok")
            ):
                message = ChatMessage.from_body(body)
                seen[message.seq] = message
        return [seen[k] for k in sorted(seen)]

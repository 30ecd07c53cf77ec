"""The meeting-tool agent community: handlers, rule sets, and bootstrap.

Seven tool agents cooperate to run a meeting: the session host mediates
opening, presence, and closing; the chat agent serializes and fans out
messages; the vote agent runs polls; the diary agent schedules future
sessions; the archive and db agents front the write and read paths of the
session log; the group agent answers membership queries. Each human is
represented by a user agent whose rules confirm invitations while the user
is connected.

Requests are asks answered with ``{"ok": true, ...}`` or
``{"ok": false, "error": <code>}``; broadcasts are diffuses that always
include the archive agent, so every tool event lands in the session log
exactly once.
"""

from __future__ import annotations

from typing import Any

from ..agents import AgentState, HandlerContext, rule_from_dict
from ..interaction import AgentId, CommunicationAct, Performative, make_act
from ..kernel import Kernel
from ..organization import MEDIATOR, SPECIALIST, SUPERVISOR, form_community
from ..wire import act_to_frame
from .types import (
    MAX_TEXT_LEN,
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
    UnknownSession,
    tally,
)

PAPOTICIEL = AgentId.agent("papoticiel")
COM = AgentId.agent("com")
VOTE = AgentId.agent("vote")
AGENDA = AgentId.agent("agenda")
ARCHIVE = AgentId.agent("archive")
DB = AgentId.agent("db")
GROUP = AgentId.agent("group")

TOOLS_KEY = "microtools"

SESSION_NAMESPACES = ("session.*", "chat.*", "vote.*", "agenda.*", "archive.*")


def _tools(ctx: HandlerContext) -> ToolState:
    return ctx.services.tools[TOOLS_KEY]


def _diffuse(ctx: HandlerContext, sender: AgentId, receivers: list[AgentId], msg_type: str, body: dict[str, Any]) -> None:
    if receivers:
        ctx.emit(make_act(Performative.DIFFUSE, sender, receivers, msg_type, body))


def _require_ask(ctx: HandlerContext) -> bool:
    return ctx.act is not None and ctx.act.performative is Performative.ASK


def _tool_request(handler):
    """Answer the ask with ok/error instead of failing the task.

    Error replies echo the request's identifying keys so clients can render
    the rejection inline at the right widget.
    """

    def wrapped(ctx: HandlerContext) -> None:
        if not _require_ask(ctx):
            return
        try:
            handler(ctx)
        except ToolError as err:
            body = {"ok": False, "error": err.code, "detail": str(err)}
            request = ctx.act.body if isinstance(ctx.act.body, dict) else {}
            for key in ("session", "poll", "entry"):
                if key in request:
                    body[key] = request[key]
            ctx.reply(body)

    wrapped.__name__ = handler.__name__
    return wrapped


def _user_id(raw: str) -> AgentId:
    agent = AgentId.parse(raw) if ":" in raw else AgentId.user(raw)
    if agent.kind != "user":
        raise UnknownParticipant(f"not a user id: {raw}")
    return agent


# -- session host (papoticiel) -------------------------------------------


def _mark_present(ctx: HandlerContext, session: Session, user: AgentId) -> None:
    if session.presence.get(user):
        return
    session.presence[user] = True
    _diffuse(
        ctx,
        PAPOTICIEL,
        session.present_users(),
        "session.presence",
        {"session": session.id, "user": str(user), "present": True, "roster": session.roster()},
    )
    if _tools(ctx).transcripts.get(session.id):
        _diffuse(ctx, PAPOTICIEL, [COM], "chat.sync", {"session": session.id, "user": str(user)})


def _mark_absent(ctx: HandlerContext, session: Session, user: AgentId) -> None:
    if not session.presence.get(user):
        return
    session.presence[user] = False
    _diffuse(
        ctx,
        PAPOTICIEL,
        session.present_users(),
        "session.presence",
        {"session": session.id, "user": str(user), "present": False, "roster": session.roster()},
    )


@_tool_request
def open_session(ctx: HandlerContext) -> None:
    body = ctx.act.body
    sender = ctx.act.sender
    if sender.kind == "user":
        opener = sender
    elif sender == AGENDA:
        opener = _user_id(body.get("opener", ""))
    else:
        raise AuthFailed(f"{sender} may not open sessions")
    if opener not in ctx.services.registry:
        raise AuthFailed(f"unknown user {opener}")
    session_id = body.get("session")
    if not isinstance(session_id, str) or not session_id:
        raise UnknownSession("missing session id")
    tools = _tools(ctx)
    if session_id in tools.sessions:
        raise SessionExists(session_id)
    participants = [_user_id(p) for p in body.get("participants", [])]
    if opener not in participants:
        participants.insert(0, opener)
    for p in participants:
        if p not in ctx.services.registry:
            raise UnknownParticipant(str(p))

    members = set(participants) | {PAPOTICIEL, COM, VOTE, AGENDA, ARCHIVE, DB, GROUP}
    interactions = {
        (perf.value, pattern)
        for perf in Performative
        for pattern in SESSION_NAMESPACES
    }
    form_community(ctx.services.registry, session_id, members, PAPOTICIEL, interactions)

    session = Session(
        id=session_id,
        community_id=session_id,
        opener=opener,
        participants=list(participants),
        presence={p: False for p in participants},
    )
    tools.sessions[session_id] = session
    tools.transcripts[session_id] = []
    tools.polls[session_id] = {}
    session.presence[opener] = sender.kind == "user"
    _diffuse(
        ctx,
        PAPOTICIEL,
        [ARCHIVE],
        "session.opened",
        {
            "session": session_id,
            "opener": str(opener),
            "participants": [str(p) for p in participants],
            "title": body.get("title", ""),
        },
    )
    for p in participants:
        if not session.presence.get(p):
            ctx.emit(make_act(Performative.INFORM, PAPOTICIEL, [p], "session.invite", {"session": session_id}))
    session.advance(SessionState.ACTIVE)
    ctx.reply({"ok": True, "session": session_id, "state": session.state.value, "roster": session.roster()})


def invite_reply(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None or act.performative is not Performative.CONFIRM:
        return
    tools = _tools(ctx)
    session = tools.sessions.get(act.body.get("session", ""))
    if session is None or session.state in (SessionState.CLOSING, SessionState.CLOSED):
        return
    if act.sender in session.presence:
        _mark_present(ctx, session, act.sender)


@_tool_request
def presences(ctx: HandlerContext) -> None:
    session = _tools(ctx).session(ctx.act.body.get("session", ""))
    if session.state is SessionState.CLOSED:
        raise SessionClosed(session.id)
    ctx.reply({"ok": True, "session": session.id, "roster": session.roster()})


@_tool_request
def close_session(ctx: HandlerContext) -> None:
    session = _tools(ctx).session(ctx.act.body.get("session", ""))
    sender = ctx.act.sender
    if session.state in (SessionState.CLOSING, SessionState.CLOSED):
        ctx.reply({"ok": True, "session": session.id, "state": session.state.value})
        return
    supervisors = ctx.services.registry.agents_with_role(SUPERVISOR)
    if sender != session.opener and sender not in supervisors:
        raise NotAuthorized(f"{sender} did not open {session.id}")
    session.advance(SessionState.CLOSING)
    head = session.transcript_head_seq
    _diffuse(
        ctx,
        PAPOTICIEL,
        [ARCHIVE] + session.present_users(),
        "chat.closed",
        {"session": session.id, "head_seq": head},
    )
    _diffuse(
        ctx,
        PAPOTICIEL,
        [ARCHIVE],
        "archive.transcript",
        {"session": session.id, "message_count": len(_tools(ctx).transcripts[session.id]), "head_seq": head},
    )
    _diffuse(ctx, PAPOTICIEL, [PAPOTICIEL], "session.finalize", {"session": session.id})
    ctx.reply({"ok": True, "session": session.id, "state": session.state.value})


def finalize_session(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None:
        return
    tools = _tools(ctx)
    session = tools.sessions.get(act.body.get("session", ""))
    if session is None or session.state is not SessionState.CLOSING:
        return
    session.advance(SessionState.CLOSED)
    ctx.services.registry.communities.pop(session.community_id, None)


def leave_session(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None:
        return
    session = _tools(ctx).sessions.get(act.body.get("session", ""))
    if session is not None and act.sender in session.presence:
        _mark_absent(ctx, session, act.sender)


def user_connected(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None or act.sender.kind != "user":
        return
    user = act.sender
    tools = _tools(ctx)
    for sid in sorted(tools.sessions):
        session = tools.sessions[sid]
        if session.state is not SessionState.ACTIVE:
            continue
        if user in session.presence and not session.presence[user]:
            ctx.emit(make_act(Performative.INFORM, PAPOTICIEL, [user], "session.invite", {"session": sid}))


def user_disconnected(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None or act.sender.kind != "user":
        return
    tools = _tools(ctx)
    for sid in sorted(tools.sessions):
        session = tools.sessions[sid]
        if session.presence.get(act.sender):
            _mark_absent(ctx, session, act.sender)


# -- chat (com) ------------------------------------------------------------


@_tool_request
def post_message(ctx: HandlerContext) -> None:
    body = ctx.act.body
    tools = _tools(ctx)
    session = tools.session(body.get("session", ""))
    if session.state is not SessionState.ACTIVE:
        raise SessionNotActive(f"{session.id} is {session.state.value}")
    author = ctx.act.sender
    if not session.presence.get(author):
        raise NotPresent(str(author))
    text = body.get("text")
    if not isinstance(text, str):
        raise TextTooLong("text must be a string")
    if len(text) > MAX_TEXT_LEN:
        raise TextTooLong(f"{len(text)} > {MAX_TEXT_LEN}")
    seq = session.transcript_head_seq + 1
    session.transcript_head_seq = seq
    message = ChatMessage(seq=seq, author=author, text=text, tick=ctx.now)
    tools.transcripts[session.id].append(message)
    ctx.reply({"ok": True, "session": session.id, **message.to_body()})
    others = [u for u in session.present_users() if u != author]
    _diffuse(ctx, COM, [ARCHIVE] + others, "chat.msg", {"session": session.id, **message.to_body()})


def sync_backlog(ctx: HandlerContext) -> None:
    act = ctx.act
    if act is None:
        return
    tools = _tools(ctx)
    session_id = act.body.get("session", "")
    messages = tools.transcripts.get(session_id, [])
    if not messages:
        return
    user = AgentId.parse(act.body["user"])
    _diffuse(
        ctx,
        COM,
        [user],
        "chat.backlog",
        {"session": session_id, "messages": [m.to_body() for m in messages]},
    )


# -- vote ------------------------------------------------------------------


@_tool_request
def open_poll(ctx: HandlerContext) -> None:
    body = ctx.act.body
    tools = _tools(ctx)
    session = tools.session(body.get("session", ""))
    if session.state is not SessionState.ACTIVE:
        raise SessionNotActive(f"{session.id} is {session.state.value}")
    options = body.get("options")
    if not isinstance(options, list) or len(options) < 2 or len(set(options)) != len(options):
        raise BadOptions("need at least two distinct options")
    if not all(isinstance(o, str) and o for o in options):
        raise BadOptions("options must be nonempty strings")
    poll_id = body.get("poll")
    if not isinstance(poll_id, str) or not poll_id:
        raise BadOptions("missing poll id")
    if poll_id in tools.polls[session.id]:
        raise PollExists(poll_id)
    poll = Poll(
        id=poll_id,
        session=session.id,
        opener=ctx.act.sender,
        question=str(body.get("question", "")),
        options=list(options),
    )
    tools.polls[session.id][poll_id] = poll
    ctx.reply({"ok": True, "session": session.id, "poll": poll_id})
    _diffuse(
        ctx,
        VOTE,
        [ARCHIVE] + session.present_users(),
        "vote.opened",
        {"session": session.id, "poll": poll_id, "question": poll.question, "options": poll.options},
    )


@_tool_request
def cast_ballot(ctx: HandlerContext) -> None:
    body = ctx.act.body
    tools = _tools(ctx)
    session = tools.session(body.get("session", ""))
    poll = tools.poll(session.id, body.get("poll", ""))
    if poll.state is not PollState.OPEN:
        raise PollClosed(poll.id)
    voter = ctx.act.sender
    if not session.presence.get(voter):
        raise NotPresent(str(voter))
    option = body.get("option")
    if not isinstance(option, int) or not 0 <= option < len(poll.options):
        raise BadIndex(f"option {option!r} out of range")
    if voter in poll.ballots:
        raise AlreadyVoted(f"{voter} already voted in {poll.id}")
    poll.ballots[voter] = option
    ctx.reply({"ok": True, "session": session.id, "poll": poll.id, "voter": str(voter), "option": option})
    _diffuse(
        ctx,
        VOTE,
        session.present_users(),
        "vote.ballot",
        {"session": session.id, "poll": poll.id, "counts": poll.counts()},
    )


@_tool_request
def close_poll(ctx: HandlerContext) -> None:
    body = ctx.act.body
    tools = _tools(ctx)
    session = tools.session(body.get("session", ""))
    poll = tools.poll(session.id, body.get("poll", ""))
    if poll.state is not PollState.OPEN:
        raise PollClosed(poll.id)
    sender = ctx.act.sender
    supervisors = ctx.services.registry.agents_with_role(SUPERVISOR)
    if sender != poll.opener and sender not in supervisors:
        raise NotAuthorized(f"{sender} did not open poll {poll.id}")
    poll.outcome = tally(poll.options, poll.ballots)
    poll.state = PollState.CLOSED
    outcome_body = {
        "session": session.id,
        "poll": poll.id,
        "counts": list(poll.outcome.counts),
        "winners": list(poll.outcome.winners),
        "status": poll.outcome.status,
    }
    ctx.reply({"ok": True, **outcome_body})
    _diffuse(ctx, VOTE, [ARCHIVE] + session.present_users(), "vote.outcome", outcome_body)


# -- diary (agenda) ----------------------------------------------------------


@_tool_request
def schedule_entry(ctx: HandlerContext) -> None:
    body = ctx.act.body
    tools = _tools(ctx)
    start_tick = body.get("start_tick")
    if not isinstance(start_tick, int) or start_tick <= ctx.now:
        raise PastStart(f"start_tick {start_tick!r} not after tick {ctx.now}")
    entry_id = body.get("entry", "")
    if not entry_id or entry_id in tools.agenda:
        raise PastStart(f"bad or duplicate entry id {entry_id!r}")
    entry = AgendaEntry(
        id=entry_id,
        session=body.get("session", entry_id),
        title=str(body.get("title", "")),
        start_tick=start_tick,
        participants=[_user_id(p) for p in body.get("participants", [])],
        auto_start=bool(body.get("auto_start", True)),
        creator=ctx.act.sender,
    )
    tools.agenda[entry.id] = entry
    ctx.reply(
        {
            "ok": True,
            "entry": entry.id,
            "session": entry.session,
            "title": entry.title,
            "start_tick": start_tick,
        }
    )
    if entry.auto_start:
        wake = make_act(Performative.DIFFUSE, AGENDA, [AGENDA], "agenda.wake", {"at": start_tick})
        ctx.emit_at(wake, start_tick)


def wake(ctx: HandlerContext) -> None:
    tools = _tools(ctx)
    due = [
        e for e in tools.agenda.values()
        if e.auto_start and not e.fired and e.start_tick <= ctx.now
    ]
    for entry in sorted(due, key=lambda e: e.id):
        entry.fired = True
        ctx.emit(
            make_act(
                Performative.ASK,
                AGENDA,
                [PAPOTICIEL],
                "session.open",
                {
                    "session": entry.session,
                    "participants": [str(p) for p in entry.participants],
                    "opener": str(entry.creator),
                    "title": entry.title,
                },
            )
        )


# -- group and db ------------------------------------------------------------


@_tool_request
def group_members(ctx: HandlerContext) -> None:
    community_id = ctx.act.body.get("community", "")
    community = ctx.services.registry.communities.get(community_id)
    if community is None:
        raise UnknownSession(f"no community {community_id!r}")
    ctx.reply(
        {
            "ok": True,
            "community": community_id,
            "mediator": str(community.mediator),
            "members": sorted(str(m) for m in community.members),
        }
    )


@_tool_request
def archive_query(ctx: HandlerContext) -> None:
    from ..persistence import query  # local import: persistence replays through this package

    log = ctx.services.tools.get("archive_log")
    if log is None:
        raise UnknownSession("no archive attached")
    body = ctx.act.body
    seq_range = None
    if "seq_lo" in body or "seq_hi" in body:
        seq_range = (body.get("seq_lo", 1), body.get("seq_hi", 1 << 62))
    records = query(
        log,
        session_id=body.get("session"),
        type_pattern=body.get("type"),
        seq_range=seq_range,
    )
    ctx.reply({"ok": True, "records": [{"ts": r.ts, "act": act_to_frame(r.act)} for r in records]})


def note_reception(ctx: HandlerContext) -> None:
    facts = ctx.agent.kb.facts
    facts["received_count"] = facts.get("received_count", 0) + 1


HANDLER_SETS: dict[str, dict[str, Any]] = {
    "papoticiel": {
        "open_session": open_session,
        "invite_reply": invite_reply,
        "presences": presences,
        "close_session": close_session,
        "finalize_session": finalize_session,
        "leave_session": leave_session,
        "user_connected": user_connected,
        "user_disconnected": user_disconnected,
    },
    "com": {"post_message": post_message, "sync_backlog": sync_backlog},
    "vote": {"open_poll": open_poll, "cast_ballot": cast_ballot, "close_poll": close_poll},
    "agenda": {"schedule_entry": schedule_entry, "wake": wake},
    "group": {"group_members": group_members},
    "db": {"archive_query": archive_query},
    "archive": {"note_reception": note_reception},
}


def _call(event: str, handler: str, rule_id: str | None = None) -> dict[str, Any]:
    return {
        "id": rule_id or f"{event.replace('.', '-')}",
        "events": [event],
        "actions": [{"kind": "call", "handler": handler}],
    }


def default_descriptor(
    users: list[dict[str, str]] | None = None,
    connected_at_boot: bool = True,
) -> dict[str, Any]:
    """The standard meeting deployment: 7 tool agents plus the given users."""
    if users is None:
        users = [
            {"name": name, "password": f"{name}-pass"}
            for name in ("alice", "bob", "carol", "dave", "eve")
        ]
    return {
        "version": 1,
        "name": "papoticiel",
        "settings": {"connected_at_boot": connected_at_boot},
        "users": users,
        "user_agent": {
            "roles": [SPECIALIST, "user"],
            "competences": [
                "authentication-and-user-identification",
                "access-management-towards-other-agents",
                "access-management-to-other-resources-services",
                "transmission-of-messages",
            ],
            "rules": [
                {
                    "id": "confirm-invite",
                    "events": ["session.invite"],
                    "conditions": [["connected", "==", True]],
                    "actions": [{"kind": "reply", "copy_body": True}],
                    "priority": 10,
                },
                {
                    "id": "mark-online",
                    "events": ["user.connected"],
                    "actions": [{"kind": "set_fact", "key": "connected", "value": True}],
                    "level": "reflex",
                    "priority": 20,
                },
                {
                    "id": "mark-offline",
                    "events": ["user.disconnected"],
                    "actions": [{"kind": "set_fact", "key": "connected", "value": False}],
                    "level": "reflex",
                    "priority": 20,
                },
            ],
        },
        "agents": [
            {
                "id": str(PAPOTICIEL),
                "roles": [MEDIATOR, SUPERVISOR, "session.host"],
                "competences": [
                    "access-management-to-application",
                    "queues-management-to-avoid-conflicts",
                    "sending-of-messages-to-agents",
                ],
                "handlers": "papoticiel",
                "rules": [
                    _call("session.open", "open_session"),
                    _call("session.invite", "invite_reply"),
                    _call("session.presences", "presences"),
                    _call("session.close", "close_session"),
                    _call("session.finalize", "finalize_session"),
                    _call("session.leave", "leave_session"),
                    _call("user.connected", "user_connected"),
                    _call("user.disconnected", "user_disconnected"),
                ],
            },
            {
                "id": str(COM),
                "roles": [SPECIALIST, "chat.com"],
                "competences": [
                    "identification-of-messages-writers",
                    "messages-queues-management",
                    "sending-of-messages-to-agents",
                    "sending-of-messages-to-participants",
                ],
                "handlers": "com",
                "rules": [
                    _call("chat.post", "post_message"),
                    _call("chat.sync", "sync_backlog"),
                ],
            },
            {
                "id": str(VOTE),
                "roles": [SPECIALIST, "vote.vote"],
                "competences": [
                    "activation-of-beginning-and-end-of-votes",
                    "sending-the-voting-results",
                    "connection-with-agents",
                ],
                "handlers": "vote",
                "rules": [
                    _call("vote.open", "open_poll"),
                    _call("vote.cast", "cast_ballot"),
                    _call("vote.close", "close_poll"),
                ],
            },
            {
                "id": str(AGENDA),
                "roles": [SPECIALIST, "agenda.diary"],
                "competences": ["diary-management", "meeting-scheduling"],
                "handlers": "agenda",
                "rules": [
                    _call("agenda.schedule", "schedule_entry"),
                    _call("agenda.wake", "wake"),
                ],
            },
            {
                "id": str(ARCHIVE),
                "roles": [SPECIALIST, "archive.store"],
                "competences": [
                    "user-identification",
                    "reception-of-messages",
                    "filing-of-messages",
                    "filing-outcome-of-votes",
                ],
                "handlers": "archive",
                "rules": [
                    {
                        "id": "note-reception",
                        "events": ["chat.*", "vote.*", "session.*", "archive.*"],
                        "actions": [{"kind": "call", "handler": "note_reception"}],
                        "level": "reflex",
                    }
                ],
            },
            {
                "id": str(DB),
                "roles": [SPECIALIST, "archive.db"],
                "competences": [
                    "data-update",
                    "sending-of-messages",
                    "sending-of-results",
                    "saving-of-messages-and-results",
                ],
                "handlers": "db",
                "rules": [_call("archive.query", "archive_query")],
            },
            {
                "id": str(GROUP),
                "roles": [SPECIALIST, "group.registry"],
                "competences": [
                    "management-of-various-working-groups",
                    "user-identification",
                    "connection-with-other-services",
                ],
                "handlers": "group",
                "rules": [_call("group.members", "group_members")],
            },
        ],
    }


def bootstrap_kernel(
    descriptor: dict[str, Any],
    seed: int = 0,
    conv_timeout: int = 100,
) -> Kernel:
    """Build a kernel populated per the deployment descriptor."""
    kernel = Kernel(seed=seed, conv_timeout=conv_timeout)
    kernel.extensions[TOOLS_KEY] = ToolState()
    for spec in descriptor.get("agents", []):
        agent = AgentState(id=AgentId.parse(spec["id"]))
        for rule in spec.get("rules", []):
            agent.kb.add_rule(rule_from_dict(rule))
        agent.handlers = dict(HANDLER_SETS.get(spec.get("handlers", ""), {}))
        kernel.add_agent(agent, set(spec["roles"]), set(spec.get("competences", [])))
    user_spec = descriptor.get("user_agent", {})
    connected = descriptor.get("settings", {}).get("connected_at_boot", True)
    for user in descriptor.get("users", []):
        agent = AgentState(id=AgentId.user(user["name"]))
        for rule in user_spec.get("rules", []):
            agent.kb.add_rule(rule_from_dict(rule))
        agent.kb.facts["connected"] = connected
        kernel.add_agent(
            agent,
            set(user_spec.get("roles", [SPECIALIST])),
            set(user_spec.get("competences", [])),
        )
    tool_ids = {AgentId.parse(spec["id"]) for spec in descriptor.get("agents", [])}
    for agent in kernel.agents.values():
        agent.kb.acquaintances = tool_ids - {agent.id}
    return kernel


def connection_act(user: AgentId, connected: bool) -> CommunicationAct:
    """Presence notification routed to the user's own agent and the host."""
    msg_type = "user.connected" if connected else "user.disconnected"
    return make_act(Performative.DIFFUSE, user, [user, PAPOTICIEL], msg_type, {})

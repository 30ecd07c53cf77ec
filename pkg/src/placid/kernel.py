"""Deterministic event loop: act routing, agent scheduling, conversations.

One kernel owns every agent, the registry, the open conversations, and an
append-only trace. Each tick delivers due acts in (due, seq) order, steps
agents in canonical id order, then expires overdue conversations. All
iteration orders are fixed, so a given seed and submission sequence always
produces a byte-identical trace.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable

from .agents import AgentState, TaskState, step
from .interaction import (
    AgentId,
    AlreadyClosed,
    CommunicationAct,
    Conversation,
    MatchOutcome,
    Performative,
    expects_reply,
    make_act,
    match_reply,
    open_conversation,
)
from .organization import (
    SUPERVISOR,
    OrganizationError,
    Registry,
    mediate,
    register_agent,
)
from .wire import act_digest, act_to_frame

KERNEL_ID = AgentId.agent("kernel")

DEFAULT_CONV_TIMEOUT = 100


class KernelError(Exception):
    pass


class UnknownSender(KernelError):
    pass


class UnknownReceiver(KernelError):
    pass


class UnknownCommunity(KernelError):
    pass


class DuplicateConversation(KernelError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    """One line of the replayable trace; field order is fixed."""

    tick: int
    kind: str
    subject: tuple[str, ...]
    info: dict[str, Any] = field(default_factory=dict)
    digest: str = ""

    def to_json(self) -> str:
        payload = {
            "tick": self.tick,
            "kind": self.kind,
            "subject": list(self.subject),
            "info": {k: self.info[k] for k in sorted(self.info)},
            "digest": self.digest,
        }
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)


@dataclass(order=True)
class _Pending:
    due: int
    seq: int
    act: CommunicationAct = field(compare=False)


class KernelServices:
    """Window onto kernel-owned facilities for micro-tool handlers."""

    def __init__(self, kernel: "Kernel") -> None:
        self._kernel = kernel

    @property
    def known_agents(self) -> set[AgentId]:
        return self._kernel.registry.known_agents

    @property
    def registry(self) -> Registry:
        return self._kernel.registry

    @property
    def tools(self) -> dict[str, Any]:
        return self._kernel.extensions

    @property
    def now(self) -> int:
        return self._kernel.tick

    def supervisors(self) -> list[AgentId]:
        return self._kernel.registry.agents_with_role(SUPERVISOR)


# Delivery tap: (tick, receiver, act) for every inbox delivery.
DeliveryTap = Callable[[int, AgentId, CommunicationAct], None]
# Archive sink: (tick, act, seq) for every accepted submission; seq is the
# kernel submission counter for acts that crossed the external boundary and
# None for acts agents emitted themselves (those regenerate on replay).
ArchiveSink = Callable[[int, CommunicationAct, "int | None"], None]


class Kernel:
    """Single-owner scheduler for one agent society."""

    def __init__(
        self,
        *,
        seed: int = 0,
        conv_timeout: int = DEFAULT_CONV_TIMEOUT,
    ) -> None:
        self.tick = 0
        self.seed = seed
        self.conv_timeout = conv_timeout
        self.agents: dict[AgentId, AgentState] = {}
        self.registry = Registry()
        self.conversations: dict[str, Conversation] = {}
        self.pending: list[_Pending] = []
        self.trace: list[TraceEvent] = []
        self.conv_counter = 0
        self.seq_counter = 0
        self.extensions: dict[str, Any] = {}
        self.taps: list[DeliveryTap] = []
        self.archive: ArchiveSink | None = None
        self.services = KernelServices(self)
        register_agent(self.registry, KERNEL_ID, {"system"})

    # -- population ---------------------------------------------------

    def add_agent(
        self,
        agent: AgentState,
        roles: set[str],
        competences: set[str] | None = None,
    ) -> AgentState:
        register_agent(self.registry, agent.id, roles, competences)
        self.agents[agent.id] = agent
        return agent

    @property
    def open_conversations(self) -> dict[str, Conversation]:
        return {cid: c for cid, c in self.conversations.items() if c.open}

    @property
    def quiescent(self) -> bool:
        """No pending acts, no inbox content, no unresolved conversations."""
        return (
            not self.pending
            and not any(a.inbox for a in self.agents.values())
            and not self.open_conversations
        )

    # -- submission ---------------------------------------------------

    def submit(
        self,
        act: CommunicationAct,
        due: int | None = None,
        external: bool = True,
    ) -> CommunicationAct | None:
        """Accept an act for delivery; returns the (conv-stamped) act.

        Opener acts get a conversation; replies are matched against the
        conversation they cite. Orphan replies are traced and discarded,
        never delivered — they return None. ``external`` marks acts that
        cross the kernel boundary (clients, scenarios) as opposed to agent
        emissions; the archive uses it to know what replay must resubmit.
        """
        if act.sender not in self.registry and not act.sender.is_community:
            raise UnknownSender(f"unregistered sender: {act.sender}")
        stamped: CommunicationAct | None = None
        for routed in self._route(act):
            stamped = self._admit(routed, due, external)
        return stamped

    def _route(self, act: CommunicationAct) -> list[CommunicationAct]:
        if not any(r.is_community for r in act.receivers):
            return [act]
        if len(act.receivers) != 1:
            raise UnknownReceiver("community pseudo-receiver cannot be mixed with others")
        community_id = act.receivers[0].community_id
        community = self.registry.communities.get(community_id)
        if community is None:
            raise UnknownCommunity(f"no community {community_id!r}")
        return mediate(community, act)

    def _admit(self, act: CommunicationAct, due: int | None, external: bool) -> CommunicationAct | None:
        for receiver in act.receivers:
            if receiver not in self.registry:
                raise UnknownReceiver(f"unregistered receiver: {receiver}")
        self.seq_counter += 1
        seq = self.seq_counter
        expected = expects_reply(act.performative)
        if expected is not None:
            act = self._open_conv(act)
        elif act.performative in (Performative.ANSWER, Performative.CONFIRM):
            if not self._match_reply(act):
                # External orphans stay in the log: they are part of the
                # input boundary, and replay must re-drop them identically.
                if external and self.archive is not None:
                    self.archive(self.tick, act, seq)
                return None
        when = self.tick if due is None else max(due, self.tick)
        heapq.heappush(self.pending, _Pending(when, seq, act))
        if self.archive is not None:
            self.archive(self.tick, act, seq if external else None)
        return act

    def _open_conv(self, act: CommunicationAct) -> CommunicationAct:
        if act.conv is None:
            self.conv_counter += 1
            cid = f"c-{self.conv_counter:06d}"
        else:
            cid = act.conv
            if cid in self.conversations:
                raise DuplicateConversation(f"conversation {cid} already exists")
            self._reconcile_conv_counter(cid)
        conv = open_conversation(act, self.tick, self.conv_timeout, conv_id=cid)
        self.conversations[conv.id] = conv
        self._trace("conv_opened", (conv.id, str(act.sender)), {"type": act.msg_type})
        return conv.opener

    def _reconcile_conv_counter(self, cid: str) -> None:
        if cid.startswith("c-"):
            try:
                self.conv_counter = max(self.conv_counter, int(cid[2:]))
            except ValueError:
                pass

    def _match_reply(self, act: CommunicationAct) -> bool:
        conv = self.conversations.get(act.conv or "")
        if conv is None:
            self._drop(act, "orphan_reply_unknown_conv")
            return False
        try:
            outcome = match_reply(conv, act)
        except AlreadyClosed:
            self._drop(act, "orphan_reply_closed")
            return False
        if outcome is MatchOutcome.ORPHAN:
            self._drop(act, "orphan_reply_mismatch")
            return False
        self._trace("conv_closed", (conv.id, str(act.sender)), {"type": act.msg_type})
        return True

    # -- the loop -----------------------------------------------------

    def run(self, max_ticks: int = 10_000) -> "Kernel":
        """Tick until quiescence or the budget runs out."""
        ticks = 0
        while not self.quiescent and ticks < max_ticks:
            self._tick_once()
            ticks += 1
        return self

    def run_until(self, target_tick: int) -> "Kernel":
        """Advance logical time to a target tick, quiescent or not."""
        while self.tick < target_tick:
            self._tick_once()
        return self

    def run_settle(self, max_ticks: int = 10_000) -> "Kernel":
        """Tick until nothing can happen without time passing.

        Unlike :meth:`run`, this leaves future-due acts and unexpired
        conversations in place instead of fast-forwarding to them.
        """
        ticks = 0
        while ticks < max_ticks and (
            any(p.due <= self.tick for p in self.pending)
            or any(a.inbox for a in self.agents.values())
        ):
            self._tick_once()
            ticks += 1
        return self

    def _tick_once(self) -> None:
        self._deliver_due()
        self._step_agents()
        self._expire_conversations()
        self.tick += 1

    def _deliver_due(self) -> None:
        while self.pending and self.pending[0].due <= self.tick:
            entry = heapq.heappop(self.pending)
            act = entry.act
            subject = (str(act.sender),) + tuple(str(r) for r in act.receivers)
            self._trace(
                "delivered",
                subject,
                {"seq": entry.seq, "type": act.msg_type, "perf": act.performative.value},
                digest=act_digest(act),
            )
            for receiver in act.receivers:
                agent = self.agents.get(receiver)
                if agent is None:
                    self._trace("dropped", (str(receiver),), {"reason": "no_inbox", "type": act.msg_type})
                    continue
                agent.inbox.append(act)
                for tap in self.taps:
                    tap(self.tick, receiver, act)

    def _step_agents(self) -> None:
        ready = sorted(
            (a for a in self.agents.values() if a.inbox), key=lambda a: str(a.id)
        )
        for agent in ready:
            _, outgoing = step(agent, services=self.services, now=self.tick)
            self._trace_step(agent)
            report = agent.last_report
            scheduled = report.scheduled if report else []
            for out in outgoing:
                self._submit_from_agent(out)
            for out, at in scheduled:
                self._submit_from_agent(out, due=at)

    def _submit_from_agent(self, act: CommunicationAct, due: int | None = None) -> None:
        try:
            self.submit(act, due=due, external=False)
        except (KernelError, OrganizationError) as exc:
            self._drop(act, f"submit_error:{type(exc).__name__}")

    def _trace_step(self, agent: AgentState) -> None:
        report = agent.last_report
        if report is None or report.consumed is None:
            return
        consumed_type = report.consumed.msg_type
        for rule_id in report.fired_rules:
            self._trace("fired_rule", (str(agent.id), rule_id), {"type": consumed_type})
        if report.dropped:
            self._trace(
                "dropped",
                (str(agent.id),),
                {"reason": "no_rule", "type": consumed_type},
                digest=act_digest(report.consumed),
            )
        task = report.task
        if task is not None:
            kind = "task_failed" if task.state is TaskState.FAILED else "task_done"
            info: dict[str, Any] = {"actions": len(task.actions)}
            if task.state is TaskState.FAILED:
                errors = [r["error"] for r in task.results if isinstance(r, dict) and "error" in r]
                info["error"] = errors[0] if errors else "unknown"
            self._trace(kind, (str(agent.id), task.id), info)

    def _expire_conversations(self) -> None:
        expired = sorted(
            (c for c in self.conversations.values() if c.open and self.tick >= c.deadline),
            key=lambda c: c.id,
        )
        for conv in expired:
            conv.time_out()
            opener = conv.opener
            self._trace(
                "conv_timeout",
                (conv.id, str(opener.sender)),
                {"type": opener.msg_type},
            )
            receivers = [opener.sender]
            for sup in self.registry.agents_with_role(SUPERVISOR):
                if sup != opener.sender and sup != KERNEL_ID and sup in self.agents:
                    receivers.append(sup)
            notice = make_act(
                Performative.DIFFUSE,
                KERNEL_ID,
                receivers,
                "conv.timeout",
                {"conv": conv.id, "type": opener.msg_type},
            )
            self._submit_from_agent(notice)

    # -- trace --------------------------------------------------------

    def _trace(self, kind: str, subject: tuple[str, ...], info: dict[str, Any], digest: str = "") -> None:
        self.trace.append(TraceEvent(self.tick, kind, subject, info, digest))

    def _drop(self, act: CommunicationAct, reason: str) -> None:
        self._trace(
            "dropped",
            (str(act.sender),) + tuple(str(r) for r in act.receivers),
            {"reason": reason, "type": act.msg_type},
            digest=act_digest(act),
        )

    def trace_text(self) -> str:
        return "".join(event.to_json() + "\n" for event in self.trace)

    def trace_digest(self) -> str:
        """Stable hash of the canonical trace serialization."""
        return hashlib.sha256(self.trace_text().encode("utf-8")).hexdigest()

    def snapshot(self) -> dict[str, Any]:
        """Canonical serialization of the full kernel state."""
        agents = {}
        for aid in sorted(self.agents, key=str):
            agent = self.agents[aid]
            agents[str(aid)] = {
                "inbox": [act_to_frame(a) for a in agent.inbox],
                "facts": {k: agent.kb.facts[k] for k in sorted(agent.kb.facts)},
                "tasks": {
                    tid: {"state": t.state.value, "actions": len(t.actions)}
                    for tid, t in sorted(agent.tasks.items())
                },
            }
        extensions = {
            name: ext.snapshot()
            for name, ext in sorted(self.extensions.items())
            if hasattr(ext, "snapshot")
        }
        return {
            "tick": self.tick,
            "seed": self.seed,
            "conv_counter": self.conv_counter,
            "seq_counter": self.seq_counter,
            "agents": agents,
            "conversations": {
                cid: {
                    "state": c.state.value,
                    "deadline": c.deadline,
                    "opener": act_to_frame(c.opener),
                }
                for cid, c in sorted(self.conversations.items())
            },
            "pending": [
                {"due": p.due, "seq": p.seq, "act": act_to_frame(p.act)}
                for p in sorted(self.pending)
            ],
            "extensions": extensions,
            "trace_digest": self.trace_digest(),
        }

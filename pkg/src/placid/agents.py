"""Rule-driven agents: observation, decision, action, knowledge base.

An agent owns three managers: an inbox FIFO (messages), a task table
(actions), and a knowledge base (facts, rules, acquaintances). Each step
consumes one inbox act, fires every matching rule, and runs the fired
actions as one task. Behaviour is fixed at the rule-based level; a reflex
fast path skips condition evaluation, and an optional deliberation callback
hooks in when nothing matches.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .interaction import AgentId, CommunicationAct, expects_reply, make_act


class AgentError(Exception):
    pass


class NotAddressed(AgentError):
    """Act delivered to an agent that is not among its receivers."""


class EmptyInbox(AgentError):
    pass


class RuleLevel(str, Enum):
    REFLEX = "reflex"
    RULE_BASED = "rule_based"


class TaskState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


_COMPARATORS: dict[str, Callable[[Any, Any], bool]] = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Condition:
    """Flat comparison against one knowledge-base fact."""

    key: str
    op: str  # ==, !=, <, <=, >, >=, exists
    value: Any = None

    def holds(self, facts: dict[str, Any]) -> bool:
        if self.op == "exists":
            return self.key in facts
        if self.key not in facts:
            return False
        try:
            return _COMPARATORS[self.op](facts[self.key], self.value)
        except TypeError:
            return False


@dataclass(frozen=True)
class Action:
    """One action descriptor fired by a rule.

    Kinds:
      send      build and emit an act (params: performative, to, msg_type, body)
      reply     emit the paired reply to the triggering act (params: body,
                copy_body)
      set_fact  upsert a KB fact (params: key, value)
      del_fact  retract a KB fact (params: key)
      call      run a named Python handler registered on the agent
                (params: handler)
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)


def matches_type(pattern: str, msg_type: str) -> bool:
    """Exact match, or wildcard 'prefix.*' matching sub-types of the prefix."""
    if pattern.endswith(".*"):
        return msg_type.startswith(pattern[:-1])
    return pattern == msg_type


@dataclass
class Rule:
    """Event/condition/action triplet driving an agent's decisions."""

    id: str
    events: tuple[str, ...]
    conditions: tuple[Condition, ...]
    actions: tuple[Action, ...]
    priority: int = 0
    level: RuleLevel = RuleLevel.RULE_BASED

    def __post_init__(self) -> None:
        if not self.events:
            raise ValueError(f"rule {self.id}: events must be nonempty")
        if not self.actions:
            raise ValueError(f"rule {self.id}: actions must be nonempty")
        if self.level is RuleLevel.REFLEX and self.conditions:
            raise ValueError(f"rule {self.id}: reflex rules take no conditions")

    def triggered_by(self, msg_type: str) -> bool:
        return any(matches_type(p, msg_type) for p in self.events)


@dataclass
class Task:
    """Record of one action batch: what ran, its state, and its results."""

    id: str
    actions: tuple[Action, ...]
    state: TaskState = TaskState.PENDING
    results: list[Any] = field(default_factory=list)

    def start(self) -> None:
        if self.state is not TaskState.PENDING:
            raise AgentError(f"task {self.id}: cannot start from {self.state.value}")
        self.state = TaskState.RUNNING

    def finish(self, failed: bool = False) -> None:
        if self.state is not TaskState.RUNNING:
            raise AgentError(f"task {self.id}: cannot finish from {self.state.value}")
        self.state = TaskState.FAILED if failed else TaskState.DONE


@dataclass
class KnowledgeBase:
    """Facts, decision rules, and known peers."""

    facts: dict[str, Any] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)
    acquaintances: set[AgentId] = field(default_factory=set)

    def add_rule(self, rule: Rule) -> None:
        if any(r.id == rule.id for r in self.rules):
            raise ValueError(f"duplicate rule id: {rule.id}")
        self.rules.append(rule)


def assert_fact(kb: KnowledgeBase, key: str, value: Any) -> KnowledgeBase:
    """Idempotent upsert; the last write wins."""
    kb.facts[key] = value
    return kb


def retract_fact(kb: KnowledgeBase, key: str) -> KnowledgeBase:
    """Delete a fact; retracting an absent key is a no-op."""
    kb.facts.pop(key, None)
    return kb


def match_rules(kb: KnowledgeBase, act: CommunicationAct) -> list[Rule]:
    """Every rule triggered by the act's msg_type whose conditions all hold.

    Ordered by priority descending, then reflex before rule-based, then
    insertion order.
    """
    hits: list[tuple[int, int, int, Rule]] = []
    for index, rule in enumerate(kb.rules):
        if not rule.triggered_by(act.msg_type):
            continue
        if rule.level is not RuleLevel.REFLEX and not all(
            c.holds(kb.facts) for c in rule.conditions
        ):
            continue
        level_rank = 0 if rule.level is RuleLevel.REFLEX else 1
        hits.append((-rule.priority, level_rank, index, rule))
    hits.sort(key=lambda h: h[:3])
    return [h[3] for h in hits]


@dataclass
class StepReport:
    """What one agent step did; consumed by the kernel for tracing."""

    consumed: CommunicationAct | None = None
    fired_rules: list[str] = field(default_factory=list)
    task: Task | None = None
    scheduled: list[tuple[CommunicationAct, int]] = field(default_factory=list)
    dropped: bool = False


# Deliberation hook: called with (agent, act) when no rule matches; may
# return extra actions. Placeholder for knowledge-based behaviour.
Deliberator = Callable[["AgentState", CommunicationAct], list[Action]]

HandlerFn = Callable[["HandlerContext"], None]


@dataclass
class AgentState:
    """One agent: identity, inbox, task table, and knowledge base.

    ``behavior_level`` is fixed at the rule-based tier; reflex rules give a
    fast path below it and ``deliberate`` hooks the tier above.
    """

    id: AgentId
    inbox: deque[CommunicationAct] = field(default_factory=deque)
    tasks: dict[str, Task] = field(default_factory=dict)
    kb: KnowledgeBase = field(default_factory=KnowledgeBase)
    behavior_level: RuleLevel = RuleLevel.RULE_BASED
    handlers: dict[str, HandlerFn] = field(default_factory=dict, compare=False)
    deliberate: Deliberator | None = field(default=None, compare=False)
    last_report: StepReport | None = field(default=None, compare=False)
    _task_counter: int = 0

    def next_task_id(self) -> str:
        self._task_counter += 1
        return f"t-{self.id.name}-{self._task_counter:04d}"


class HandlerContext:
    """Execution context handed to 'call' actions.

    Buffers emitted acts and scheduled acts; exposes the triggering act, the
    agent's own state, and whatever platform services the host wires in
    (registry and shared tool state when running under a kernel).
    """

    def __init__(
        self,
        agent: AgentState,
        act: CommunicationAct | None,
        now: int = 0,
        services: Any = None,
    ) -> None:
        self.agent = agent
        self.act = act
        self.now = now
        self.services = services
        self.outgoing: list[CommunicationAct] = []
        self.scheduled: list[tuple[CommunicationAct, int]] = []

    def emit(self, act: CommunicationAct) -> None:
        self._check_receivers(act)
        self.outgoing.append(act)

    def emit_at(self, act: CommunicationAct, tick: int) -> None:
        self._check_receivers(act)
        self.scheduled.append((act, tick))

    def reply(self, body: Any) -> None:
        """Emit the paired reply (answer/confirm) to the triggering act."""
        self.emit(build_reply(self.agent.id, self.act, body))

    def set_fact(self, key: str, value: Any) -> None:
        assert_fact(self.agent.kb, key, value)

    def _check_receivers(self, act: CommunicationAct) -> None:
        known = getattr(self.services, "known_agents", None)
        if known is None:
            return
        for r in act.receivers:
            if not r.is_community and r not in known:
                raise AgentError(f"unknown receiver: {r}")


def build_reply(sender: AgentId, trigger: CommunicationAct | None, body: Any) -> CommunicationAct:
    """Answer an ask / confirm an inform, preserving type and conv id."""
    if trigger is None:
        raise AgentError("reply action without a triggering act")
    expected = expects_reply(trigger.performative)
    if expected is None:
        raise AgentError(f"cannot reply to a {trigger.performative.value}")
    if trigger.conv is None:
        raise AgentError("triggering act carries no conv id")
    return make_act(expected, sender, [trigger.sender], trigger.msg_type, body, conv=trigger.conv)


def observe(agent: AgentState, act: CommunicationAct) -> AgentState:
    """Append an act addressed to this agent to its inbox tail."""
    if agent.id not in act.receivers:
        raise NotAddressed(f"{act.msg_type} not addressed to {agent.id}")
    agent.inbox.append(act)
    return agent


def decide(agent: AgentState) -> list[Action]:
    """Pop one act from the inbox head and gather the fired rules' actions.

    Records the consumed act and fired rule ids in ``agent.last_report`` and
    notes the event type in the KB fact ``last_event``.
    """
    if not agent.inbox:
        raise EmptyInbox(f"{agent.id} has nothing to observe")
    act = agent.inbox.popleft()
    fired = match_rules(agent.kb, act)
    actions: list[Action] = []
    for rule in fired:
        actions.extend(rule.actions)
    if not fired and agent.deliberate is not None:
        actions.extend(agent.deliberate(agent, act))
    assert_fact(agent.kb, "last_event", act.msg_type)
    agent.last_report = StepReport(
        consumed=act,
        fired_rules=[r.id for r in fired],
        dropped=not actions,
    )
    return actions


def _run_action(ctx: HandlerContext, action: Action) -> Any:
    agent = ctx.agent
    if action.kind == "set_fact":
        assert_fact(agent.kb, action.params["key"], action.params.get("value"))
        return {"set": action.params["key"]}
    if action.kind == "del_fact":
        retract_fact(agent.kb, action.params["key"])
        return {"deleted": action.params["key"]}
    if action.kind == "reply":
        body = dict(ctx.act.body) if action.params.get("copy_body") and isinstance(ctx.act.body, dict) else {}
        extra = action.params.get("body")
        if isinstance(extra, dict):
            body.update(extra)
        ctx.reply(body)
        return {"replied": ctx.act.conv}
    if action.kind == "send":
        p = action.params
        receivers = [AgentId.parse(r) for r in p["to"]]
        ctx.emit(make_act(p["performative"], agent.id, receivers, p["msg_type"], p.get("body", {})))
        return {"sent": p["msg_type"]}
    if action.kind == "call":
        name = action.params["handler"]
        handler = agent.handlers.get(name)
        if handler is None:
            raise AgentError(f"{agent.id} has no handler {name!r}")
        handler(ctx)
        return {"called": name}
    raise AgentError(f"unknown action kind: {action.kind}")


def enact(
    agent: AgentState,
    actions: list[Action],
    trigger: CommunicationAct | None = None,
    services: Any = None,
    now: int = 0,
) -> tuple[AgentState, list[CommunicationAct]]:
    """Run an action batch as one task and collect the emitted acts.

    The task moves pending → running → done, or → failed on the first action
    error; the error text is recorded in the task results and no further
    actions run. Emissions from failed batches are kept (earlier actions
    already took effect).
    """
    task = Task(id=agent.next_task_id(), actions=tuple(actions))
    agent.tasks[task.id] = task
    task.start()
    ctx = HandlerContext(agent, trigger, now=now, services=services)
    failed = False
    for action in actions:
        try:
            task.results.append(_run_action(ctx, action))
        except Exception as exc:  # noqa: BLE001 - failures are task results
            task.results.append({"error": f"{type(exc).__name__}: {exc}"})
            failed = True
            break
    task.finish(failed=failed)
    if agent.last_report is not None and agent.last_report.consumed is trigger:
        agent.last_report.task = task
        agent.last_report.scheduled = list(ctx.scheduled)
    else:
        agent.last_report = StepReport(consumed=trigger, task=task, scheduled=list(ctx.scheduled))
    return agent, list(ctx.outgoing)


def step(
    agent: AgentState,
    services: Any = None,
    now: int = 0,
) -> tuple[AgentState, list[CommunicationAct]]:
    """One perceive/decide/act cycle; a no-op on an empty inbox."""
    if not agent.inbox:
        agent.last_report = StepReport()
        return agent, []
    actions = decide(agent)
    report = agent.last_report
    trigger = report.consumed if report else None
    agent, out = enact(agent, actions, trigger=trigger, services=services, now=now)
    return agent, out


def rule_from_dict(data: dict[str, Any]) -> Rule:
    """Load one rule from its JSON form."""
    return Rule(
        id=data["id"],
        events=tuple(data["events"]),
        conditions=tuple(
            Condition(key=c[0], op=c[1], value=(c[2] if len(c) > 2 else None))
            for c in data.get("conditions", [])
        ),
        actions=tuple(Action(kind=a["kind"], params={k: v for k, v in a.items() if k != "kind"}) for a in data["actions"]),
        priority=data.get("priority", 0),
        level=RuleLevel(data.get("level", "rule_based")),
    )


def rule_to_dict(rule: Rule) -> dict[str, Any]:
    return {
        "id": rule.id,
        "events": list(rule.events),
        "conditions": [[c.key, c.op] if c.op == "exists" else [c.key, c.op, c.value] for c in rule.conditions],
        "actions": [{"kind": a.kind, **a.params} for a in rule.actions],
        "priority": rule.priority,
        "level": rule.level.value,
    }

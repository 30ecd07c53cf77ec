"""Shared independent oracles and generators for property suites.

Everything here recomputes expectations naively, without touching the code
paths under test: brute-force rule matching, plurality recounts, and random
act/frame generation from a seeded RNG.
"""

from __future__ import annotations

import operator
import random

from placid.agents import Action, Condition, KnowledgeBase, Rule, RuleLevel
from placid.interaction import AgentId, CommunicationAct, Performative, make_act

NAMES = ["alice", "bob", "carol", "com", "vote", "papoticiel", "a1", "x-9_z"]
TYPES = ["chat.msg", "chat.post", "vote.open", "session.invite", "a.b.c", "solo"]


# -- rule engine -----------------------------------------------------------

def brute_force_match(kb: KnowledgeBase, act: CommunicationAct) -> list[Rule]:
    """Evaluate every rule naively and sort like the engine must."""

    def fires(rule: Rule) -> bool:
        hit = any(
            p == act.msg_type or (p.endswith(".*") and act.msg_type.startswith(p[:-1]))
            for p in rule.events
        )
        if not hit:
            return False
        if rule.level is RuleLevel.REFLEX:
            return True
        ops = {
            "==": operator.eq, "!=": operator.ne, "<": operator.lt,
            "<=": operator.le, ">": operator.gt, ">=": operator.ge,
        }
        for c in rule.conditions:
            if c.op == "exists":
                if c.key not in kb.facts:
                    return False
                continue
            if c.key not in kb.facts:
                return False
            try:
                if not ops[c.op](kb.facts[c.key], c.value):
                    return False
            except TypeError:
                return False
        return True

    hits = [(i, r) for i, r in enumerate(kb.rules) if fires(r)]
    hits.sort(key=lambda ir: (-ir[1].priority, 0 if ir[1].level is RuleLevel.REFLEX else 1, ir[0]))
    return [r for _, r in hits]


def random_ruleset(rng: random.Random, n_rules: int) -> tuple[KnowledgeBase, str]:
    types = ["chat.msg", "chat.close", "vote.open", "vote.cast", "agenda.wake"]
    patterns = types + ["chat.*", "vote.*", "agenda.*", "session.*"]
    keys = ["mode", "count", "flag"]
    kb = KnowledgeBase()
    for key in keys:
        if rng.random() < 0.7:
            kb.facts[key] = rng.choice([0, 1, 2, "on", "off", True])
    for i in range(n_rules):
        level = RuleLevel.REFLEX if rng.random() < 0.3 else RuleLevel.RULE_BASED
        conditions = ()
        if level is RuleLevel.RULE_BASED and rng.random() < 0.6:
            conditions = tuple(
                Condition(
                    rng.choice(keys),
                    rng.choice(["==", "!=", "<", "<=", ">", ">=", "exists"]),
                    rng.choice([0, 1, 2, "on"]),
                )
                for _ in range(rng.randint(1, 2))
            )
        kb.rules.append(
            Rule(
                id=f"r{i}",
                events=tuple(rng.sample(patterns, rng.randint(1, 2))),
                conditions=conditions,
                actions=(Action("set_fact", {"key": "hit", "value": i}),),
                priority=rng.randint(0, 5),
                level=level,
            )
        )
    return kb, rng.choice(types)


# -- wire frames ------------------------------------------------------------

def random_body(rng: random.Random, depth: int = 0):
    roll = rng.random()
    if depth >= 2 or roll < 0.35:
        return rng.choice(
            [None, True, False, rng.randint(-5000, 5000), "text", "émile ünïcode ✔", ""]
        )
    if roll < 0.65:
        return {f"k{i}": random_body(rng, depth + 1) for i in range(rng.randint(0, 3))}
    return [random_body(rng, depth + 1) for _ in range(rng.randint(0, 3))]


def random_act(rng: random.Random) -> CommunicationAct:
    perf = rng.choice(list(Performative))
    sender = AgentId(rng.choice(["user", "agent"]), rng.choice(NAMES))
    if perf is Performative.DIFFUSE:
        names = rng.sample(NAMES, rng.randint(1, 4))
        receivers = [AgentId(rng.choice(["user", "agent"]), n) for n in names]
        conv = None
    else:
        receivers = [AgentId(rng.choice(["user", "agent"]), rng.choice(NAMES))]
        conv = (
            f"c-{rng.randint(1, 999999):06d}"
            if perf in (Performative.ANSWER, Performative.CONFIRM) or rng.random() < 0.3
            else None
        )
    return make_act(perf, sender, receivers, rng.choice(TYPES), random_body(rng), conv=conv)


# -- polls --------------------------------------------------------------------

def recount_from_log(records, poll_id: str, options: list[str]) -> tuple[list[int], list[str]]:
    """Replay acceptance rules over the archived cast attempts.

    A cast counts iff it targets the poll while open (before the outcome
    record), carries a valid option index, and is the voter's first.
    """
    ballots: dict[str, int] = {}
    closed = False
    for record in records:
        act = record.act
        body = act.body if isinstance(act.body, dict) else {}
        if body.get("poll") != poll_id:
            continue
        if act.msg_type == "vote.outcome":
            closed = True
        if closed or act.msg_type != "vote.cast" or act.performative.value != "ask":
            continue
        voter = str(act.sender)
        option = body.get("option")
        if not isinstance(option, int) or not 0 <= option < len(options):
            continue
        ballots.setdefault(voter, option)
    counts = [0] * len(options)
    for choice in ballots.values():
        counts[choice] += 1
    top = max(counts)
    winners = [o for o, n in zip(options, counts) if n == top]
    return counts, winners

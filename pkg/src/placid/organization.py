"""Agent society structure: registry, roles, communities, and mediation.

Agents register with roles and advertised competences; communities group
them around a session or tool, each fronted by one mediator. Acts addressed
to a community pseudo-receiver are rewritten by :func:`mediate` into a
fan-out from the mediator, policed by the community's interaction allow-list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .interaction import AgentId, CommunicationAct, Performative, make_act
from .agents import matches_type

# Hierarchy tiers; tool-specific role strings (e.g. "chat.com") are open.
SPECIALIST = "specialist"
MEDIATOR = "mediator"
SUPERVISOR = "supervisor"

_COMPETENCE_RE = re.compile(r"[a-z0-9]+(-[a-z0-9]+)*\Z")
_ROLE_RE = re.compile(r"[a-z0-9_.-]+\Z")


class OrganizationError(Exception):
    pass


class DuplicateAgent(OrganizationError):
    pass


class UnknownAgent(OrganizationError):
    pass


class UnknownMember(OrganizationError):
    pass


class MediatorNotMember(OrganizationError):
    pass


class SenderNotMember(OrganizationError):
    pass


class InteractionNotAllowed(OrganizationError):
    pass


class BadRole(OrganizationError):
    pass


class BadCompetence(OrganizationError):
    pass


@dataclass
class Community:
    """A set of agents organized around one session or tool.

    ``interactions`` is an allow-list of (performative, msg_type-pattern)
    pairs; empty means everything is allowed.
    """

    id: str
    members: set[AgentId]
    mediator: AgentId
    interactions: set[tuple[str, str]] = field(default_factory=set)

    def __post_init__(self) -> None:
        self._check()

    def _check(self) -> None:
        if not self.members:
            raise UnknownMember(f"community {self.id}: members must be nonempty")
        if self.mediator not in self.members:
            raise MediatorNotMember(f"community {self.id}: mediator {self.mediator} not a member")

    def add_member(self, agent: AgentId) -> None:
        self.members.add(agent)
        self._check()

    def remove_member(self, agent: AgentId) -> None:
        if agent == self.mediator:
            raise MediatorNotMember(f"community {self.id}: cannot remove the mediator")
        self.members.discard(agent)
        self._check()

    def allows(self, performative: Performative, msg_type: str) -> bool:
        if not self.interactions:
            return True
        return any(
            perf == performative.value and matches_type(pattern, msg_type)
            for perf, pattern in self.interactions
        )


@dataclass
class RegistryEntry:
    agent: AgentId
    roles: set[str]
    competences: set[str]


@dataclass
class Registry:
    """Single-writer directory of agents, their roles, and communities."""

    entries: dict[AgentId, RegistryEntry] = field(default_factory=dict)
    communities: dict[str, Community] = field(default_factory=dict)

    def __contains__(self, agent: AgentId) -> bool:
        return agent in self.entries

    @property
    def known_agents(self) -> set[AgentId]:
        return set(self.entries)

    def agents_with_role(self, role: str) -> list[AgentId]:
        return sorted(
            (a for a, e in self.entries.items() if role in e.roles), key=str
        )


def register_agent(
    registry: Registry,
    agent: AgentId,
    roles: set[str],
    competences: set[str] | None = None,
) -> Registry:
    """Add an agent to the directory; every agent holds at least one role."""
    if agent in registry.entries:
        raise DuplicateAgent(f"{agent} already registered")
    if not roles:
        raise BadRole(f"{agent}: at least one role required")
    for role in roles:
        if not _ROLE_RE.match(role):
            raise BadRole(f"{agent}: bad role {role!r}")
    competences = competences or set()
    for comp in competences:
        if not _COMPETENCE_RE.match(comp):
            raise BadCompetence(f"{agent}: bad competence {comp!r}")
    registry.entries[agent] = RegistryEntry(agent, set(roles), set(competences))
    return registry


def form_community(
    registry: Registry,
    community_id: str,
    members: set[AgentId],
    mediator: AgentId,
    interactions: set[tuple[str, str]] | None = None,
) -> Community:
    """Create a community of registered agents fronted by a mediator."""
    for member in members:
        if member not in registry.entries:
            raise UnknownMember(f"{member} is not registered")
    if mediator not in members:
        raise MediatorNotMember(f"mediator {mediator} must be a member")
    community = Community(
        id=community_id,
        members=set(members),
        mediator=mediator,
        interactions=set(interactions or ()),
    )
    registry.communities[community_id] = community
    return community


def dissolve_community(registry: Registry, community_id: str) -> None:
    registry.communities.pop(community_id, None)


def resolve_by_competence(registry: Registry, competence: str) -> list[AgentId]:
    """All agents advertising a competence, sorted by canonical id."""
    return sorted(
        (a for a, e in registry.entries.items() if competence in e.competences),
        key=str,
    )


def mediate(community: Community, act: CommunicationAct) -> list[CommunicationAct]:
    """Route an act through the community's mediator.

    Acts addressed to the community pseudo-receiver become one diffuse from
    the mediator to every member except the sender; anything else passes
    through unchanged. Acts outside the interaction allow-list are rejected.
    """
    if act.sender not in community.members:
        raise SenderNotMember(f"{act.sender} is not in community {community.id}")
    if not community.allows(act.performative, act.msg_type):
        raise InteractionNotAllowed(
            f"({act.performative.value}, {act.msg_type}) not allowed in {community.id}"
        )
    targets = [r for r in act.receivers if r.is_community and r.community_id == community.id]
    if not targets:
        return [act]
    fan_out = sorted((m for m in community.members if m != act.sender), key=str)
    if not fan_out:
        return []
    body = dict(act.body) if isinstance(act.body, dict) else act.body
    if isinstance(body, dict):
        body.setdefault("origin", str(act.sender))
    return [
        make_act(Performative.DIFFUSE, community.mediator, fan_out, act.msg_type, body)
    ]

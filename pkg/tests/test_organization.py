"""Registry, communities, competence directory, mediation."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from placid.interaction import AgentId, Performative, make_act
from placid.organization import (
    BadCompetence,
    BadRole,
    Community,
    DuplicateAgent,
    InteractionNotAllowed,
    MediatorNotMember,
    Registry,
    SenderNotMember,
    UnknownMember,
    dissolve_community,
    form_community,
    mediate,
    register_agent,
    resolve_by_competence,
)

COM = AgentId.agent("com")
ARCHIVE = AgentId.agent("archive")
PAPO = AgentId.agent("papoticiel")
A = AgentId.user("a")
B = AgentId.user("b")
C = AgentId.user("c")


def registry_with(*agents):
    registry = Registry()
    for agent in agents:
        register_agent(registry, agent, {"specialist"})
    return registry


class TestRegister:
    def test_register_adds_entry(self):
        registry = Registry()
        register_agent(registry, COM, {"specialist", "chat.com"}, {"messages-queues-management"})
        assert COM in registry
        assert len(registry.entries) == 1

    def test_duplicate_rejected(self):
        registry = registry_with(COM)
        with pytest.raises(DuplicateAgent):
            register_agent(registry, COM, {"specialist"})

    def test_empty_roles_rejected(self):
        with pytest.raises(BadRole):
            register_agent(Registry(), COM, set())

    def test_bad_competence_string_rejected(self):
        with pytest.raises(BadCompetence):
            register_agent(Registry(), COM, {"specialist"}, {"Not Valid"})


class TestCommunity:
    def test_form_community(self):
        registry = registry_with(PAPO, A, B)
        community = form_community(registry, "s1", {PAPO, A, B}, PAPO)
        assert community.mediator in community.members
        assert registry.communities["s1"] is community

    def test_unknown_member_rejected(self):
        registry = registry_with(PAPO, A)
        with pytest.raises(UnknownMember):
            form_community(registry, "s1", {PAPO, A, B}, PAPO)

    def test_mediator_outside_members_rejected(self):
        registry = registry_with(PAPO, A, B)
        with pytest.raises(MediatorNotMember):
            form_community(registry, "s1", {A, B}, PAPO)

    def test_empty_members_rejected(self):
        registry = registry_with(PAPO)
        with pytest.raises((UnknownMember, MediatorNotMember)):
            form_community(registry, "s1", set(), PAPO)

    def test_mediator_invariant_holds_after_mutations(self):
        registry = registry_with(PAPO, A, B)
        community = form_community(registry, "s1", {PAPO, A}, PAPO)
        community.add_member(B)
        assert community.mediator in community.members
        community.remove_member(B)
        assert community.mediator in community.members
        with pytest.raises(MediatorNotMember):
            community.remove_member(PAPO)

    def test_dissolve(self):
        registry = registry_with(PAPO, A)
        form_community(registry, "s1", {PAPO, A}, PAPO)
        dissolve_community(registry, "s1")
        assert "s1" not in registry.communities


class TestResolveByCompetence:
    def test_lookup(self):
        registry = Registry()
        register_agent(registry, ARCHIVE, {"specialist"}, {"filing-of-messages"})
        register_agent(registry, COM, {"specialist"}, {"messages-queues-management"})
        assert resolve_by_competence(registry, "filing-of-messages") == [ARCHIVE]

    def test_unknown_competence_empty(self):
        assert resolve_by_competence(registry_with(COM), "nope") == []

    def test_results_sorted_by_canonical_id(self):
        registry = Registry()
        for name in ("zeta", "alpha", "mid"):
            register_agent(registry, AgentId.agent(name), {"specialist"}, {"shared-skill"})
        found = resolve_by_competence(registry, "shared-skill")
        assert found == sorted(found, key=str)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_equals_linear_scan_oracle(self, seed):
        rng = random.Random(seed)
        skills = ["data-update", "filing-of-messages", "sending-of-messages", "user-identification"]
        registry = Registry()
        entries = {}
        for i in range(rng.randint(0, 12)):
            agent = AgentId.agent(f"agent{i}")
            owned = set(rng.sample(skills, rng.randint(0, len(skills))))
            register_agent(registry, agent, {"specialist"}, owned)
            entries[agent] = owned
        target = rng.choice(skills)
        oracle = sorted((a for a, owned in entries.items() if target in owned), key=str)
        assert resolve_by_competence(registry, target) == oracle


class TestMediate:
    def community(self, interactions=None):
        return Community(id="s1", members={PAPO, A, B, C}, mediator=PAPO, interactions=interactions or set())

    def test_community_addressed_act_becomes_fan_out(self):
        act = make_act(Performative.INFORM, A, [AgentId.community("s1")], "chat.msg", {"text": "hi"})
        out = mediate(self.community(), act)
        assert len(out) == 1
        fan = out[0]
        assert fan.performative is Performative.DIFFUSE
        assert fan.sender == PAPO
        assert A not in fan.receivers
        assert sorted(map(str, fan.receivers)) == ["agent:papoticiel", "user:b", "user:c"]

    def test_fan_out_excludes_sender_no_duplicates(self):
        act = make_act(Performative.INFORM, B, [AgentId.community("s1")], "chat.msg", {})
        fan = mediate(self.community(), act)[0]
        receivers = list(fan.receivers)
        assert B not in receivers
        assert len(receivers) == len(set(receivers)) == 3

    def test_pass_through_unchanged(self):
        act = make_act(Performative.ASK, A, [B], "chat.post", {})
        assert mediate(self.community(), act) == [act]

    def test_sender_outside_community_rejected(self):
        outsider = AgentId.user("zed")
        act = make_act(Performative.ASK, outsider, [B], "chat.post", {})
        with pytest.raises(SenderNotMember):
            mediate(self.community(), act)

    def test_disallowed_interaction_rejected(self):
        community = self.community(interactions={("ask", "chat.*")})
        ok = make_act(Performative.ASK, A, [B], "chat.post", {})
        assert mediate(community, ok) == [ok]
        bad = make_act(Performative.ASK, A, [B], "admin.reset", {})
        with pytest.raises(InteractionNotAllowed):
            mediate(community, bad)

    def test_routing_is_deterministic(self):
        act = make_act(Performative.INFORM, A, [AgentId.community("s1")], "chat.msg", {"n": 1})
        first = mediate(self.community(), act)
        second = mediate(self.community(), act)
        assert first == second

"""Kernel loop: routing, scheduling, conversations, trace determinism."""

import pytest

from placid.agents import Action, AgentState, Rule
from placid.interaction import AgentId, ConversationState, Performative, make_act
from placid.kernel import (
    Kernel,
    UnknownReceiver,
    UnknownSender,
)
from placid.organization import form_community

PING = AgentId.agent("ping")
PONG = AgentId.agent("pong")
SINK = AgentId.agent("sink")
PAPO = AgentId.agent("papoticiel")
A = AgentId.user("a")
B = AgentId.user("b")
C = AgentId.user("c")


def plain_agent(agent_id):
    return AgentState(id=agent_id)


def responder(agent_id, events=("ping.msg",)):
    agent = AgentState(id=agent_id)
    agent.kb.add_rule(
        Rule(id="reply", events=tuple(events), conditions=(),
             actions=(Action("reply", {"body": {"ok": True}}),))
    )
    return agent


def build_kernel(*agents, conv_timeout=100):
    kernel = Kernel(conv_timeout=conv_timeout)
    for agent in agents:
        kernel.add_agent(agent, {"specialist"})
    return kernel


def ask(sender, receiver, msg_type="ping.msg", body=None):
    return make_act(Performative.ASK, sender, [receiver], msg_type, body or {})


class TestSubmit:
    def test_unknown_sender_rejected(self):
        kernel = build_kernel(plain_agent(PONG))
        with pytest.raises(UnknownSender):
            kernel.submit(ask(PING, PONG))

    def test_unknown_receiver_rejected(self):
        kernel = build_kernel(plain_agent(PING))
        with pytest.raises(UnknownReceiver):
            kernel.submit(ask(PING, PONG))

    def test_ask_opens_conversation_and_enqueues(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(PONG))
        stamped = kernel.submit(ask(PING, PONG))
        assert stamped.conv == "c-000001"
        assert len(kernel.pending) == 1
        assert len(kernel.open_conversations) == 1

    def test_community_diffuse_expands_through_mediator(self):
        kernel = build_kernel(plain_agent(PAPO), plain_agent(A), plain_agent(B), plain_agent(C))
        form_community(kernel.registry, "s1", {PAPO, A, B, C}, PAPO)
        act = make_act(Performative.INFORM, A, [AgentId.community("s1")], "chat.msg", {"text": "hi"})
        stamped = kernel.submit(act)
        assert stamped.performative is Performative.DIFFUSE
        assert len(kernel.pending) == 1
        assert sorted(map(str, stamped.receivers)) == ["agent:papoticiel", "user:b", "user:c"]


class TestRun:
    def test_empty_kernel_returns_immediately(self):
        kernel = build_kernel()
        kernel.run()
        assert kernel.tick == 0 and kernel.quiescent

    def test_ping_pong_closes_conversation(self):
        kernel = build_kernel(plain_agent(PING), responder(PONG))
        kernel.submit(ask(PING, PONG))
        kernel.run()
        assert kernel.quiescent
        assert not kernel.open_conversations
        conv = kernel.conversations["c-000001"]
        assert conv.state is ConversationState.CLOSED
        delivered = [e for e in kernel.trace if e.kind == "delivered"]
        assert len(delivered) == 2  # the ask and the answer

    def test_unanswered_ask_times_out_with_notice(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(SINK), conv_timeout=5)
        kernel.submit(ask(PING, SINK))
        kernel.run()
        conv = kernel.conversations["c-000001"]
        assert conv.state is ConversationState.TIMED_OUT
        assert any(e.kind == "conv_timeout" for e in kernel.trace)
        notices = [
            e for e in kernel.trace
            if e.kind == "delivered" and e.info["type"] == "conv.timeout"
        ]
        assert len(notices) == 1
        assert str(PING) in notices[0].subject

    def test_act_never_delivered_before_enqueue_tick(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(SINK))
        kernel.submit(
            make_act(Performative.DIFFUSE, PING, [SINK], "later.msg", {}), due=7
        )
        kernel.run()
        delivered = [e for e in kernel.trace if e.kind == "delivered" and e.info["type"] == "later.msg"]
        assert delivered[0].tick >= 7

    def test_exactly_once_delivery(self):
        kernel = build_kernel(plain_agent(PING), responder(PONG), plain_agent(SINK))
        kernel.submit(ask(PING, PONG))
        kernel.submit(make_act(Performative.DIFFUSE, PING, [PONG, SINK], "note.msg", {}))
        kernel.submit(ask(PING, PONG, msg_type="ping.msg"))
        kernel.run()
        delivered_seqs = [e.info["seq"] for e in kernel.trace if e.kind == "delivered"]
        assert len(delivered_seqs) == len(set(delivered_seqs))
        assert kernel.quiescent

    def test_max_ticks_reports_non_quiescence(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(SINK), conv_timeout=50)
        kernel.submit(ask(PING, SINK))
        kernel.run(max_ticks=3)
        assert not kernel.quiescent
        assert kernel.tick == 3

    def test_run_until_advances_idle_time(self):
        kernel = build_kernel()
        kernel.run_until(12)
        assert kernel.tick == 12


class TestOrphans:
    def test_orphan_answer_is_dropped_not_delivered(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(PONG))
        orphan = make_act(Performative.ANSWER, PONG, [PING], "ping.msg", {}, conv="c-009999")
        assert kernel.submit(orphan) is None
        assert not kernel.pending
        assert any(e.kind == "dropped" and "orphan" in e.info["reason"] for e in kernel.trace)

    def test_second_answer_after_close_is_orphan(self):
        kernel = build_kernel(plain_agent(PING), responder(PONG))
        stamped = kernel.submit(ask(PING, PONG))
        kernel.run()
        late = make_act(Performative.ANSWER, PONG, [PING], "ping.msg", {}, conv=stamped.conv)
        assert kernel.submit(late) is None
        assert any(
            e.kind == "dropped" and e.info["reason"] == "orphan_reply_closed" for e in kernel.trace
        )

    def test_orphans_never_mutate_conversations(self):
        kernel = build_kernel(plain_agent(PING), plain_agent(PONG), conv_timeout=50)
        stamped = kernel.submit(ask(PING, PONG))
        before = (
            kernel.conversations[stamped.conv].state,
            kernel.conversations[stamped.conv].deadline,
        )
        wrong_sender = make_act(Performative.ANSWER, PING, [PONG], "ping.msg", {}, conv=stamped.conv)
        kernel.submit(wrong_sender)
        assert (
            kernel.conversations[stamped.conv].state,
            kernel.conversations[stamped.conv].deadline,
        ) == before


class TestDeterminism:
    def build_and_run(self):
        kernel = build_kernel(
            responder(PONG), plain_agent(PING), plain_agent(SINK), conv_timeout=10
        )
        kernel.submit(ask(PING, PONG))
        kernel.submit(make_act(Performative.DIFFUSE, PING, [SINK, PONG], "note.msg", {"n": 1}))
        kernel.submit(ask(SINK, PONG))
        kernel.run()
        return kernel

    def test_repeated_runs_byte_identical(self):
        first = self.build_and_run()
        second = self.build_and_run()
        assert first.trace_text() == second.trace_text()
        assert first.trace_digest() == second.trace_digest()
        assert first.snapshot() == second.snapshot()

    def test_trace_digest_stable_across_calls(self):
        kernel = self.build_and_run()
        assert kernel.trace_digest() == kernel.trace_digest()

    def test_empty_trace_digest_constant(self):
        import hashlib

        assert Kernel().trace_digest() == hashlib.sha256(b"").hexdigest()


class TestConversationTotality:
    def test_opened_equals_closed_plus_timeout(self):
        kernel = build_kernel(
            responder(PONG), plain_agent(PING), plain_agent(SINK), conv_timeout=8
        )
        kernel.submit(ask(PING, PONG))   # answered
        kernel.submit(ask(PING, SINK))   # times out
        kernel.submit(make_act(Performative.INFORM, PING, [SINK], "fyi.msg", {}))  # times out
        kernel.run()
        assert kernel.quiescent
        opened = sum(1 for e in kernel.trace if e.kind == "conv_opened")
        closed = sum(1 for e in kernel.trace if e.kind == "conv_closed")
        timed = sum(1 for e in kernel.trace if e.kind == "conv_timeout")
        assert opened == 3 and closed == 1 and timed == 2
        assert not kernel.open_conversations

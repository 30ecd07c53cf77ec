"""Archive log: append-only ordering, checksums, queries, replay."""

import json
import random

import pytest

from placid.interaction import AgentId, Performative, make_act
from placid.kernel import Kernel
from placid.microtools import MeetingPlatform
from placid.persistence import (
    CorruptLog,
    LogRecord,
    LogStore,
    OutOfOrder,
    SessionLog,
    append,
    query,
    replay,
)

A = AgentId.user("a")
COM = AgentId.agent("com")


def record(ts, msg_type="chat.msg", body=None, seq=None):
    act = make_act(Performative.DIFFUSE, A, [COM], msg_type, body or {})
    return LogRecord(ts=ts, act=act, seq=seq)


class TestAppend:
    def test_same_ts_is_stable_order(self, tmp_path):
        log = SessionLog(tmp_path / "a.jsonl")
        append(log, record(5, body={"n": 1}))
        append(log, record(5, body={"n": 2}))
        assert [r.act.body["n"] for r in log.records()] == [1, 2]

    def test_earlier_ts_rejected(self, tmp_path):
        log = SessionLog(tmp_path / "a.jsonl")
        append(log, record(5))
        with pytest.raises(OutOfOrder):
            append(log, record(4))

    def test_reopen_preserves_count_and_order_guard(self, tmp_path):
        path = tmp_path / "a.jsonl"
        log = SessionLog(path)
        append(log, record(5))
        reopened = SessionLog(path)
        assert len(reopened) == 1
        with pytest.raises(OutOfOrder):
            append(reopened, record(3))

    def test_append_only_never_rewrites_bytes(self, tmp_path):
        path = tmp_path / "a.jsonl"
        log = SessionLog(path)
        append(log, record(1))
        before = path.read_bytes()
        append(log, record(2))
        assert path.read_bytes().startswith(before)


class TestIntegrity:
    def test_round_trip(self, tmp_path):
        log = SessionLog(tmp_path / "a.jsonl")
        original = record(3, body={"text": "héllo ✔"}, seq=7)
        append(log, original)
        assert log.records() == [original]

    def test_flipped_byte_detected(self, tmp_path):
        path = tmp_path / "a.jsonl"
        log = SessionLog(path)
        append(log, record(1, body={"text": "aaaa"}))
        data = path.read_bytes().replace(b"aaaa", b"aaab")
        path.write_bytes(data)
        with pytest.raises(CorruptLog):
            SessionLog(path).records()

    def test_truncated_last_line_reports_offset(self, tmp_path):
        path = tmp_path / "a.jsonl"
        log = SessionLog(path)
        append(log, record(1))
        good_len = path.stat().st_size
        append(log, record(2))
        data = path.read_bytes()[: good_len + 10]
        path.write_bytes(data)
        with pytest.raises(CorruptLog) as err:
            SessionLog(path).records()
        assert err.value.offset == good_len

    def test_missing_crc_detected(self, tmp_path):
        path = tmp_path / "a.jsonl"
        path.write_text('{"ts":1,"act":{}}\n')
        with pytest.raises(CorruptLog):
            SessionLog(path).records()


class TestQuery:
    def build_log(self, tmp_path):
        log = SessionLog(tmp_path / "q.jsonl")
        append(log, record(1, "session.opened", {"session": "s1"}))
        append(log, record(2, "chat.msg", {"session": "s1", "seq": 1}))
        append(log, record(3, "chat.msg", {"session": "s1", "seq": 2}))
        append(log, record(3, "vote.opened", {"session": "s1", "poll": "p1"}))
        append(log, record(4, "vote.cast", {"session": "s1", "poll": "p1", "option": 0}))
        append(log, record(5, "vote.outcome", {"session": "s1", "poll": "p1", "counts": [1, 0]}))
        append(log, record(6, "chat.msg", {"session": "s2", "seq": 1}))
        return log

    def test_filter_by_type_pattern(self, tmp_path):
        log = self.build_log(tmp_path)
        votes = query(log, session_id="s1", type_pattern="vote.*")
        assert [r.act.msg_type for r in votes] == ["vote.opened", "vote.cast", "vote.outcome"]

    def test_empty_filter_returns_whole_session(self, tmp_path):
        log = self.build_log(tmp_path)
        assert len(query(log, session_id="s1")) == 6

    def test_seq_range(self, tmp_path):
        log = self.build_log(tmp_path)
        msgs = query(log, session_id="s1", type_pattern="chat.msg", seq_range=(2, 9))
        assert [r.act.body["seq"] for r in msgs] == [2]

    def test_random_logs_match_naive_scan_oracle(self, tmp_path):
        rng = random.Random(7)
        log = SessionLog(tmp_path / "r.jsonl")
        rows = []
        for ts in range(60):
            session = rng.choice(["s1", "s2", "s3"])
            msg_type = rng.choice(["chat.msg", "vote.cast", "session.presence"])
            body = {"session": session, "seq": rng.randint(1, 9)}
            rows.append((ts, msg_type, dict(body)))
            append(log, record(ts, msg_type, body))
        target, pattern, lo, hi = "s2", "chat.*", 2, 7
        oracle = [
            (ts, mt, b) for ts, mt, b in rows
            if b["session"] == target and mt.startswith("chat.") and lo <= b["seq"] <= hi
        ]
        got = query(log, session_id=target, type_pattern=pattern, seq_range=(lo, hi))
        assert [(r.ts, r.act.msg_type, r.act.body) for r in got] == oracle


class TestReplay:
    def test_empty_log_gives_fresh_kernel(self, tmp_path):
        log = SessionLog(tmp_path / "e.jsonl")
        kernel = replay(log)
        assert isinstance(kernel, Kernel)
        assert kernel.trace == [] and kernel.tick == 0

    def test_meeting_replay_reproduces_digest_and_state(self, tmp_path):
        platform = MeetingPlatform(log_path=tmp_path / "m.jsonl")
        platform.open_session("alice", ["alice", "bob"], session_id="s1")
        platform.post_message("s1", "alice", "first")
        platform.post_message("s1", "bob", "second")
        platform.open_poll("s1", "bob", "lunch?", ["pizza", "soup"], poll_id="p1")
        platform.cast_ballot("s1", "p1", "alice", 0)
        platform.close_poll("s1", "p1", "bob")
        platform.close_session("s1", "alice")
        platform.run_to_quiescence()
        platform.seal()
        rebuilt = replay(SessionLog(tmp_path / "m.jsonl"))
        assert rebuilt.trace_digest() == platform.kernel.trace_digest()
        assert rebuilt.snapshot() == platform.kernel.snapshot()

    def test_log_records_every_accepted_event_exactly_once(self, tmp_path):
        platform = MeetingPlatform(log_path=tmp_path / "m.jsonl")
        platform.open_session("alice", ["alice", "bob"], session_id="s1")
        platform.post_message("s1", "alice", "only message")
        platform.close_session("s1", "alice")
        platform.run_to_quiescence()
        platform.seal()
        log = SessionLog(tmp_path / "m.jsonl")
        msgs = query(log, session_id="s1", type_pattern="chat.msg")
        assert len(msgs) == 1
        opened = query(log, session_id="s1", type_pattern="session.opened")
        closed = query(log, session_id="s1", type_pattern="chat.closed")
        transcript = query(log, session_id="s1", type_pattern="archive.transcript")
        assert len(opened) == 1 and len(closed) == 1 and len(transcript) == 1


class TestLogStore:
    def test_index_tracks_runs(self, tmp_path):
        store = LogStore(tmp_path / "logs")
        log = store.open("run1")
        append(log, record(0))
        kernel = Kernel()
        store.seal("run1", log, kernel)
        runs = store.list_runs()
        assert runs["run1"]["status"] == "sealed"
        assert runs["run1"]["records"] == 2
        assert (tmp_path / "logs" / "run1.jsonl").exists()
        index = json.loads((tmp_path / "logs" / "index.json").read_text())
        assert index["version"] == 1


def test_fsync_policy_accepts_durable_appends(tmp_path):
    log = SessionLog(tmp_path / "durable.jsonl", fsync=True)
    append(log, record(1))
    assert len(SessionLog(tmp_path / "durable.jsonl").records()) == 1

#!/usr/bin/env python3
"""Drive a meeting through the platform facade with archiving on, then
rebuild the whole run from the log alone and compare digests."""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from placid.microtools import MeetingPlatform
from placid.persistence import SessionLog, replay


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        log_path = Path(tmp) / "meeting.jsonl"
        platform = MeetingPlatform(log_path=log_path)
        platform.open_session("alice", ["alice", "bob", "carol"], session_id="standup")
        platform.post_message("standup", "alice", "morning!")
        platform.post_message("standup", "bob", "hey")
        platform.open_poll("standup", "alice", "ship today?", ["yes", "no"], poll_id="ship")
        platform.cast_ballot("standup", "ship", "bob", 0)
        platform.cast_ballot("standup", "ship", "carol", 0)
        poll = platform.close_poll("standup", "ship", "alice")
        platform.close_session("standup", "alice")
        platform.run_to_quiescence()
        platform.seal()

        original = platform.kernel.trace_digest()
        records = SessionLog(log_path).records()
        rebuilt = replay(SessionLog(log_path))

        print(f"poll outcome: counts={list(poll.outcome.counts)} winners={list(poll.outcome.winners)}")
        print(f"log records: {len(records)}")
        print(f"original digest: {original}")
        print(f"replayed digest: {rebuilt.trace_digest()}")
        ok = rebuilt.trace_digest() == original
        print(f"replay reproduces the run: {ok}")
        return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

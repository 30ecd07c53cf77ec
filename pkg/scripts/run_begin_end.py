#!/usr/bin/env python3
"""Run the shipped begin-end meeting scenario a few times and show that the
trace digest is bit-stable run over run."""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from placid.scenario import execute_scenario, load_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "begin_end.json"


def main() -> int:
    scenario = load_scenario(SCENARIO)
    digests = []
    for i in range(3):
        start = time.perf_counter()
        result = execute_scenario(scenario)
        ms = (time.perf_counter() - start) * 1000
        digests.append(result.digest)
        print(f"run {i + 1}: digest {result.digest}  ({result.tick} ticks, {result.events} events, {ms:.0f} ms)")
    stable = len(set(digests)) == 1
    golden = scenario.expected_digest
    print(f"stable across runs: {stable}")
    print(f"matches shipped golden digest: {digests[0] == golden}")
    return 0 if stable and digests[0] == golden else 1


if __name__ == "__main__":
    sys.exit(main())

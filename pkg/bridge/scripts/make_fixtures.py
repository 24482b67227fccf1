#!/usr/bin/env python3
"""Regenerate the bridge's committed artifacts:

  * tests/fixtures/bridge_recorded.trace.json — a greedy dual-stream
    recording from the toy backend, replayable by the decoding engine;
  * ../../protocol/test_vectors.json — the shared protocol conformance
    vectors checked against both the server and the engine's client.

Both are bit-deterministic, so regeneration must reproduce the committed
bytes exactly (the test suites enforce this).
"""

from __future__ import annotations

from pathlib import Path

from lmmbridge.cli import main as cli

BRIDGE = Path(__file__).resolve().parents[1]
REPO = BRIDGE.parent

FIXTURE_IMAGE = "bridge-fixture-image"
FIXTURE_QUERY = "what is on the table"
FIXTURE_STEPS = 6


def main() -> None:
    trace_path = BRIDGE / "tests" / "fixtures" / "bridge_recorded.trace.json"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    assert cli([
        "record",
        "--image", FIXTURE_IMAGE,
        "--query", FIXTURE_QUERY,
        "--steps", str(FIXTURE_STEPS),
        "--out", str(trace_path),
    ]) == 0

    vectors_path = REPO / "protocol" / "test_vectors.json"
    vectors_path.parent.mkdir(parents=True, exist_ok=True)
    assert cli(["vectors", "--out", str(vectors_path)]) == 0


if __name__ == "__main__":
    main()

"""Transcript parity: this sidecar vs the host project's reference mock.

Both servers receive the same fixture request stream; their response
streams must be byte-identical.
"""

import json
import subprocess
import sys

import pytest


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fixture_requests() -> list[str]:
    chunk = list(b"parity fixture chunk: the quick brown fox! \xf0\x9f\xa6\x8a"[:40])
    lines = [
        canonical({"type": "hello", "seq": 1, "protocol": 1}),
        canonical({"type": "tokenize", "seq": 2, "text": ""}),
        canonical({"type": "tokenize", "seq": 3, "text": "AB"}),
        canonical({"type": "tokenize", "seq": 4, "text": "naïve café ⚙"}),
        canonical({"type": "detokenize", "seq": 5, "ids": [65, 66]}),
        canonical({"type": "eval", "seq": 6, "mode": "metrics", "ids": chunk}),
        canonical({"type": "eval", "seq": 7, "mode": "codec", "ids": chunk,
                   "precision": 16}),
        canonical({"type": "eval", "seq": 8, "mode": "codec", "ids": chunk,
                   "precision": 12}),
        canonical({"type": "eval", "seq": 9, "mode": "metrics",
                   "ids": list(range(256)) * 3}),
        "definitely not json",
        canonical({"type": "eval", "seq": 10, "mode": "metrics",
                   "ids": [0] * 5000}),
        canonical({"type": "frobnicate", "seq": 11}),
        canonical({"type": "bye", "seq": 12}),
    ]
    return lines


def collect_transcript(argv: list[str], requests: list[str]) -> list[str]:
    proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            text=True, bufsize=1)
    responses = []
    try:
        for line in requests:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            responses.append(proc.stdout.readline().rstrip("\n"))
    finally:
        proc.stdin.close()
        proc.wait(timeout=30)
    return responses


@pytest.mark.parametrize("model", ["uniform", "adaptive0"])
def test_mock_transcripts_are_byte_identical(model):
    requests = fixture_requests()
    reference = collect_transcript(
        [sys.executable, "-m", "modelzip.mock_sidecar", "--model", model], requests
    )
    ours = collect_transcript(
        [sys.executable, "-m", "modelzip_sidecar", "serve", "--mock", model], requests
    )
    assert len(reference) == len(ours)
    for index, (a, b) in enumerate(zip(reference, ours)):
        assert a == b, f"transcripts diverge at response {index}:\n ref: {a}\nours: {b}"


def test_transcripts_nonempty_and_close_cleanly():
    requests = fixture_requests()
    ours = collect_transcript(
        [sys.executable, "-m", "modelzip_sidecar", "serve", "--mock", "uniform"],
        requests,
    )
    assert json.loads(ours[0])["type"] == "hello_ack"
    assert json.loads(ours[-1])["type"] == "bye"

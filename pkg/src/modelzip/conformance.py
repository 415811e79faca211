"""Protocol conformance checks for probability providers.

Every check runs against a freshly spawned session (or raw transport) so
that failures cannot leak state between checks.  The same suite gates both
the built-in mock and any external sidecar implementation.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .bridge import EvalRequest, Session, _StdioTransport, mock_argv, open_session
from .coder import CoderConfig, decode_chunk, encode_chunk
from .bridge import BridgeCodecModel
from .protocol import PROTOCOL_VERSION, ProtocolError, canonical_dumps

__all__ = ["ConformanceReport", "run_conformance", "run_transcript"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    endpoint: str
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary_lines(self) -> list[str]:
        lines = []
        for r in self.results:
            mark = "PASS" if r.passed else "FAIL"
            suffix = f" ({r.detail})" if r.detail and not r.passed else ""
            lines.append(f"[{mark}] {r.name}{suffix}")
        return lines


def _argv_for(endpoint: str) -> list[str]:
    if endpoint.startswith("mock:"):
        return mock_argv(endpoint[5:])
    if endpoint.startswith("run:"):
        import shlex

        return shlex.split(endpoint[4:])
    raise ProtocolError(f"conformance needs a spawnable endpoint, got {endpoint!r}")


def _raw_exchange(endpoint: str, lines: list[str]) -> list[str]:
    transport = _StdioTransport(_argv_for(endpoint))
    out = []
    try:
        for line in lines:
            transport.send_line(line)
            out.append(transport.recv_line())
    finally:
        try:
            transport.close()
        except Exception:
            pass
    return out


def run_transcript(endpoint: str, request_lines: list[str]) -> list[str]:
    """Replay raw request lines and return the raw response lines."""
    return _raw_exchange(endpoint, request_lines)


def _check(fn):
    def wrapper(endpoint):
        try:
            detail = fn(endpoint)
            return CheckResult(fn.__name__[len("_c_"):], True, detail or "")
        except AssertionError as exc:
            return CheckResult(fn.__name__[len("_c_"):], False, str(exc))
        except Exception as exc:
            return CheckResult(fn.__name__[len("_c_"):], False, f"{type(exc).__name__}: {exc}")

    return wrapper


@_check
def _c_handshake(endpoint):
    with open_session(endpoint) as s:
        info = s.info
        assert info.vocab_size >= 2, "vocab too small"
        assert info.context_limit >= 2, "context limit too small"
        return f"vocab={info.vocab_size} context={info.context_limit} bos={info.bos_policy}"


@_check
def _c_version_mismatch_rejected(endpoint):
    bad_hello = canonical_dumps({"type": "hello", "seq": 1, "protocol": 99})
    (reply,) = _raw_exchange(endpoint, [bad_hello])
    msg = json.loads(reply)
    assert msg.get("type") == "error", f"expected error, got {msg.get('type')}"
    assert msg.get("code") == "protocol_version", f"wrong code {msg.get('code')}"


@_check
def _c_malformed_line_reported(endpoint):
    hello = canonical_dumps({"type": "hello", "seq": 1, "protocol": PROTOCOL_VERSION})
    replies = _raw_exchange(endpoint, [hello, "this is not json"])
    msg = json.loads(replies[1])
    assert msg.get("type") == "error", "garbage line must produce an error message"
    assert msg.get("field"), "error must name the offending field"


@_check
def _c_seq_echo(endpoint):
    with open_session(endpoint) as s:
        for _ in range(3):
            s.tokenize("abc")  # Session raises if seq echo is wrong
    return "3 round trips"


@_check
def _c_tokenize_empty(endpoint):
    with open_session(endpoint) as s:
        assert s.tokenize("") == [], "empty text must tokenize to no ids"


@_check
def _c_tokenize_roundtrip(endpoint):
    rng = random.Random(20240115)
    with open_session(endpoint) as s:
        for i in range(100):
            n = rng.randint(0, 40)
            text = "".join(chr(rng.randint(32, 0x24F)) for _ in range(n))
            ids = s.tokenize(text)
            back = s.detokenize(ids)
            assert back == text, f"round trip failed on sample {i}"
    return "100 random strings"


@_check
def _c_deterministic_responses(endpoint):
    ids = list(range(64)) * 2
    lines = [
        canonical_dumps({"type": "hello", "seq": 1, "protocol": PROTOCOL_VERSION}),
        canonical_dumps({"type": "eval", "seq": 2, "mode": "metrics", "ids": ids}),
        canonical_dumps({"type": "eval", "seq": 3, "mode": "codec", "ids": ids,
                         "precision": 16}),
    ]
    first = _raw_exchange(endpoint, lines)
    second = _raw_exchange(endpoint, lines)
    assert first == second, "two identical request streams produced different bytes"


@_check
def _c_metrics_positions(endpoint):
    with open_session(endpoint) as s:
        ids = tuple(s.tokenize("conformance suite text") or range(8))
        r = s.evaluate_chunk(EvalRequest(ids=ids, mode="metrics"))
        assert len(r.log2_probs) == len(ids), "one log-prob per position required"
        assert all(math.isfinite(x) and x <= 0 for x in r.log2_probs)


@_check
def _c_codec_rows_valid(endpoint):
    with open_session(endpoint) as s:
        ids = tuple(range(48))
        r = s.evaluate_chunk(EvalRequest(ids=ids, mode="codec", precision=16))
        assert len(r.pmf_rows) == len(ids)
        for row in r.pmf_rows:
            assert row.total == 1 << 16


@_check
def _c_codec_roundtrip(endpoint):
    with open_session(endpoint) as s:
        data = bytes(range(64)) + b"conformance payload" * 3
        ids = s.byte_ids(data)
        encoder_model = BridgeCodecModel(s, 16, chunk_ids=ids)
        frame = encode_chunk(np.asarray(ids), encoder_model, CoderConfig())
        decoder_model = BridgeCodecModel(s, 16)
        out = decode_chunk(frame, decoder_model, CoderConfig())
        assert out.tolist() == list(ids), "codec rows failed to round-trip"
    return f"{len(data)} bytes"


@_check
def _c_metrics_codec_consistency(endpoint):
    with open_session(endpoint) as s:
        ids = tuple(s.byte_ids(b"the consistency of quantization" * 2))
        metrics = s.evaluate_chunk(EvalRequest(ids=ids, mode="metrics"))
        codec = s.evaluate_chunk(EvalRequest(ids=ids, mode="codec", precision=16))
        for j, sym in enumerate(ids):
            lp = metrics.log2_probs[j]
            lq = codec.pmf_rows[j].log2_prob(sym)
            p = 2.0 ** lp
            bound = 2.0 * 2.0 ** -16 / p
            assert lp - lq <= bound + 1e-12, (
                f"position {j}: quantized loss {lp - lq:.3g} exceeds bound {bound:.3g}"
            )


@_check
def _c_context_overflow_rejected(endpoint):
    with open_session(endpoint) as s:
        too_long = tuple([0] * (s.info.effective_chunk_limit + 1))
        try:
            s.evaluate_chunk(EvalRequest(ids=too_long, mode="metrics"))
        except ProtocolError as exc:
            assert exc.code == "context_overflow", f"wrong code {exc.code}"
            return "rejected client-side or server-side"
        raise AssertionError("oversized chunk was accepted")


@_check
def _c_bye_clean_shutdown(endpoint):
    transport = _StdioTransport(_argv_for(endpoint))
    transport.send_line(canonical_dumps({"type": "hello", "seq": 1,
                                         "protocol": PROTOCOL_VERSION}))
    transport.recv_line()
    transport.send_line(canonical_dumps({"type": "bye", "seq": 2}))
    reply = json.loads(transport.recv_line())
    assert reply.get("type") == "bye", "bye must be acknowledged"
    code = transport.proc.wait(timeout=10)
    assert code == 0, f"sidecar exited with {code}"


_ALL_CHECKS = [
    _c_handshake,
    _c_version_mismatch_rejected,
    _c_malformed_line_reported,
    _c_seq_echo,
    _c_tokenize_empty,
    _c_tokenize_roundtrip,
    _c_deterministic_responses,
    _c_metrics_positions,
    _c_codec_rows_valid,
    _c_codec_roundtrip,
    _c_metrics_codec_consistency,
    _c_context_overflow_rejected,
    _c_bye_clean_shutdown,
]


def run_conformance(endpoint: str) -> ConformanceReport:
    report = ConformanceReport(endpoint=endpoint)
    for check in _ALL_CHECKS:
        report.results.append(check(endpoint))
    return report

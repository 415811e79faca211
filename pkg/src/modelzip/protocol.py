"""Wire protocol v1 shared by the bridge client and probability servers.

Newline-delimited JSON over stdio or a stream socket.  The full message
schema lives in docs/protocol.md; servers emit canonical JSON (sorted keys,
compact separators) so that transcripts from independent implementations are
byte-comparable.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .quantize import QuantizedPmf

__all__ = [
    "PROTOCOL_VERSION",
    "ProtocolError",
    "canonical_dumps",
    "encode_pmf_rows",
    "decode_pmf_rows",
]

PROTOCOL_VERSION = 1

MESSAGE_TYPES = {"hello", "hello_ack", "tokenize", "detokenize", "eval", "eval_ack",
                 "error", "bye"}

ERR_PROTOCOL_VERSION = "protocol_version"
ERR_MALFORMED = "malformed"
ERR_CONTEXT_OVERFLOW = "context_overflow"
ERR_UNSUPPORTED_MODE = "unsupported_mode"
ERR_DETOKENIZE = "detokenize_failed"
ERR_INTERNAL = "internal"


class ProtocolError(RuntimeError):
    def __init__(self, message: str, code: str = ERR_MALFORMED, field: str | None = None):
        self.code = code
        self.field = field
        super().__init__(message)


def canonical_dumps(obj) -> str:
    """Canonical single-line JSON; reference servers must emit exactly this."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def encode_pmf_rows(rows: list[QuantizedPmf]) -> str:
    """Concatenated little-endian u16 frequencies per row, base64-encoded.

    Requires freq_bits <= 16 so that every frequency fits in a u16 (the top
    frequency is at most 2**16 - alphabet_size + 1).
    """
    parts = []
    for row in rows:
        if row.freq_bits > 16:
            raise ProtocolError("codec rows require freq_bits <= 16", ERR_UNSUPPORTED_MODE)
        parts.append(row.frequencies().astype("<u2").tobytes())
    return base64.b64encode(b"".join(parts)).decode("ascii")


def decode_pmf_rows(blob_b64: str, n_rows: int, alphabet_size: int,
                    freq_bits: int) -> list[QuantizedPmf]:
    raw = base64.b64decode(blob_b64.encode("ascii"), validate=True)
    expect = 2 * n_rows * alphabet_size
    if len(raw) != expect:
        raise ProtocolError(
            f"pmf payload is {len(raw)} bytes, expected {expect}", field="pmf_rows"
        )
    freqs = np.frombuffer(raw, dtype="<u2").astype(np.int64).reshape(n_rows, alphabet_size)
    rows = []
    for i in range(n_rows):
        cum = np.zeros(alphabet_size + 1, dtype=np.int64)
        np.cumsum(freqs[i], out=cum[1:])
        try:
            rows.append(QuantizedPmf(cum=cum, freq_bits=freq_bits))
        except ValueError as exc:
            raise ProtocolError(f"pmf row {i} invalid: {exc}", field="pmf_rows") from exc
    return rows

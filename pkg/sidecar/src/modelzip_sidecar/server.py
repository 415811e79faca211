"""Protocol-v1 server loop over newline-delimited JSON on stdio.

Responses are canonical JSON (sorted keys, compact separators) per the
host project's docs/protocol.md, making transcripts comparable across
independent server implementations.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass

PROTOCOL_VERSION = 1

ERR_PROTOCOL_VERSION = "protocol_version"
ERR_MALFORMED = "malformed"
ERR_CONTEXT_OVERFLOW = "context_overflow"
ERR_UNSUPPORTED_MODE = "unsupported_mode"
ERR_DETOKENIZE = "detokenize_failed"
ERR_INTERNAL = "internal"


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def encode_rows_b64(rows: list[list[int]]) -> str:
    packed = b"".join(struct.pack(f"<{len(row)}H", *row) for row in rows)
    return base64.b64encode(packed).decode("ascii")


@dataclass
class SidecarConfig:
    context_limit: int = 4096
    bos_policy: str = "none"


class Server:
    """One protocol session around a backend model.

    The backend provides: ``vocab_size``, ``name``, ``score_ids(ids)`` (log2
    probabilities per position), ``pmf_rows(ids, freq_bits)`` (quantized
    frequency rows), and optional ``tokenize``/``detokenize``/``byte_map``.
    """

    def __init__(self, backend, config: SidecarConfig | None = None):
        self.backend = backend
        self.config = config or SidecarConfig()
        self.greeted = False

    def session_info(self) -> dict:
        byte_map = getattr(self.backend, "byte_map", None)
        if byte_map is None and self.backend.vocab_size == 256:
            byte_map = list(range(256))
        return {
            "vocab_size": self.backend.vocab_size,
            "context_limit": self.config.context_limit,
            "bos_policy": self.config.bos_policy,
            "byte_token_map": byte_map,
            "model_name": self.backend.name,
        }

    def _error(self, seq, message, code, field=None) -> dict:
        return {"type": "error", "seq": seq, "code": code, "detail": message, "field": field}

    def _ids_ok(self, ids) -> bool:
        limit = self.backend.vocab_size
        return isinstance(ids, list) and all(
            isinstance(x, int) and 0 <= x < limit for x in ids
        )

    def handle_line(self, line: str):
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return self._error(0, "line is not valid JSON", ERR_MALFORMED, "line"), True
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            return self._error(0, "message must be an object with a type", ERR_MALFORMED,
                               "type"), True
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq < 1:
            return self._error(0, "seq must be a positive integer", ERR_MALFORMED, "seq"), True
        kind = msg["type"]
        try:
            if kind == "hello":
                version = msg.get("protocol")
                if version != PROTOCOL_VERSION:
                    return self._error(
                        seq, f"unsupported protocol version {version!r}",
                        ERR_PROTOCOL_VERSION, "protocol",
                    ), False
                self.greeted = True
                return {"type": "hello_ack", "seq": seq, "protocol": PROTOCOL_VERSION,
                        "session": self.session_info()}, True
            if not self.greeted:
                return self._error(seq, "hello required first", ERR_MALFORMED, "type"), True
            if kind == "tokenize":
                text = msg.get("text")
                if not isinstance(text, str):
                    return self._error(seq, "text must be a string", ERR_MALFORMED, "text"), True
                return {"type": "tokenize", "seq": seq,
                        "ids": self.backend.tokenize(text)}, True
            if kind == "detokenize":
                ids = msg.get("ids")
                if not self._ids_ok(ids):
                    return self._error(
                        seq,
                        "ids must be bytes 0..255" if self.backend.vocab_size == 256
                        else "ids must be valid vocabulary entries",
                        ERR_MALFORMED, "ids",
                    ), True
                try:
                    text = self.backend.detokenize(ids)
                except (UnicodeDecodeError, ValueError) as exc:
                    return self._error(seq, f"ids are not valid UTF-8: {exc}",
                                       ERR_DETOKENIZE, "ids"), True
                return {"type": "detokenize", "seq": seq, "text": text}, True
            if kind == "eval":
                return self._eval(seq, msg), True
            if kind == "bye":
                return {"type": "bye", "seq": seq}, False
            return self._error(seq, f"unknown message type {kind!r}", ERR_MALFORMED,
                               "type"), True
        except Exception as exc:  # pragma: no cover - defensive
            return self._error(seq, f"internal failure: {exc}", ERR_INTERNAL), True

    def _eval(self, seq, msg) -> dict:
        ids = msg.get("ids")
        if not self._ids_ok(ids) or len(ids) == 0:
            return self._error(
                seq,
                "ids must be a non-empty byte list" if self.backend.vocab_size == 256
                else "ids must be a non-empty id list",
                ERR_MALFORMED, "ids",
            )
        limit = self.config.context_limit
        if self.config.bos_policy == "prepend_per_chunk":
            limit -= 1
        if len(ids) > limit:
            return self._error(
                seq, f"chunk of {len(ids)} exceeds context limit {self.config.context_limit}",
                ERR_CONTEXT_OVERFLOW, "ids",
            )
        first_token = ("bos" if self.config.bos_policy == "prepend_per_chunk"
                       else "unconditional")
        mode = msg.get("mode")
        if mode == "metrics":
            return {"type": "eval_ack", "seq": seq, "mode": "metrics",
                    "first_token": first_token,
                    "log2_probs": self.backend.score_ids(ids)}
        if mode == "codec":
            precision = msg.get("precision", 16)
            if not isinstance(precision, int) or not 8 <= precision <= 16:
                return self._error(seq, "precision must be an integer in [8, 16]",
                                   ERR_UNSUPPORTED_MODE, "precision")
            rows = self.backend.pmf_rows(ids, precision)
            return {"type": "eval_ack", "seq": seq, "mode": "codec",
                    "first_token": first_token, "precision": precision,
                    "pmf_rows": encode_rows_b64(rows)}
        return self._error(seq, f"unknown eval mode {mode!r}", ERR_UNSUPPORTED_MODE, "mode")


def default_tokenize(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def default_detokenize(ids: list[int]) -> str:
    return bytes(ids).decode("utf-8")


def attach_byte_tokenizer(backend):
    """Identity byte tokenizer for byte-vocabulary backends."""
    backend.tokenize = default_tokenize
    backend.detokenize = default_detokenize
    return backend


def serve(fin, fout, backend, config: SidecarConfig | None = None) -> int:
    server = Server(backend, config)
    for line in fin:
        if not line.strip():
            continue
        response, keep_running = server.handle_line(line)
        fout.write(canonical_dumps(response) + "\n")
        fout.flush()
        if not keep_running:
            return 0 if response.get("type") == "bye" else 1
    return 0

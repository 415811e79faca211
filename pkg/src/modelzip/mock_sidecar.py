"""Reference protocol-v1 probability server used by tests and `selftest`.

Runs deterministic in-process byte models behind the wire protocol, so the
whole client stack (handshake, tokenize, metrics eval, codec eval) can be
exercised without any external model.  Spawn with:

    python -m modelzip.mock_sidecar --model uniform|adaptive0
"""

from __future__ import annotations

import argparse
import json
import sys

from . import protocol
from .models import AdaptiveByteModel, UniformModel
from .protocol import (
    ERR_CONTEXT_OVERFLOW,
    ERR_DETOKENIZE,
    ERR_INTERNAL,
    ERR_MALFORMED,
    ERR_PROTOCOL_VERSION,
    ERR_UNSUPPORTED_MODE,
    PROTOCOL_VERSION,
    canonical_dumps,
)

MOCK_MODELS = {
    "uniform": lambda: UniformModel(256),
    "adaptive0": lambda: AdaptiveByteModel(order=0, delta=1.0),
}

DEFAULT_CONTEXT_LIMIT = 4096


class _Server:
    def __init__(self, model_key: str, context_limit: int = DEFAULT_CONTEXT_LIMIT):
        if model_key not in MOCK_MODELS:
            raise ValueError(f"unknown mock model {model_key!r}")
        self.model = MOCK_MODELS[model_key]()
        self.model_name = f"mock-{model_key}"
        self.context_limit = context_limit
        self.greeted = False

    def session_info(self) -> dict:
        return {
            "vocab_size": 256,
            "context_limit": self.context_limit,
            "bos_policy": "none",
            "byte_token_map": list(range(256)),
            "model_name": self.model_name,
        }

    def _error(self, seq, message, code, field=None) -> dict:
        return {"type": "error", "seq": seq, "code": code, "detail": message, "field": field}

    def handle_line(self, line: str):
        """Returns (response dict, keep_running flag)."""
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
                        "ids": list(text.encode("utf-8"))}, True
            if kind == "detokenize":
                ids = msg.get("ids")
                if not self._ids_ok(ids):
                    return self._error(seq, "ids must be bytes 0..255", ERR_MALFORMED,
                                       "ids"), True
                try:
                    text = bytes(ids).decode("utf-8")
                except UnicodeDecodeError as exc:
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

    @staticmethod
    def _ids_ok(ids) -> bool:
        return isinstance(ids, list) and all(
            isinstance(x, int) and 0 <= x <= 255 for x in ids
        )

    def _eval(self, seq, msg) -> dict:
        ids = msg.get("ids")
        if not self._ids_ok(ids) or len(ids) == 0:
            return self._error(seq, "ids must be a non-empty byte list", ERR_MALFORMED, "ids")
        if len(ids) > self.context_limit:
            return self._error(
                seq, f"chunk of {len(ids)} exceeds context limit {self.context_limit}",
                ERR_CONTEXT_OVERFLOW, "ids",
            )
        mode = msg.get("mode")
        if mode == "metrics":
            state = self.model.begin_chunk()
            probs = []
            for sym in ids:
                probs.append(self.model.next_log2_of(state, sym))
                self.model.advance(state, sym)
            return {"type": "eval_ack", "seq": seq, "mode": "metrics",
                    "first_token": "unconditional", "log2_probs": probs}
        if mode == "codec":
            precision = msg.get("precision", 16)
            if not isinstance(precision, int) or not 8 <= precision <= 16:
                return self._error(seq, "precision must be an integer in [8, 16]",
                                   ERR_UNSUPPORTED_MODE, "precision")
            state = self.model.begin_chunk()
            rows = []
            for sym in ids:
                rows.append(self.model.next_quantized(state, precision))
                self.model.advance(state, sym)
            return {"type": "eval_ack", "seq": seq, "mode": "codec",
                    "first_token": "unconditional", "precision": precision,
                    "pmf_rows": protocol.encode_pmf_rows(rows)}
        return self._error(seq, f"unknown eval mode {mode!r}", ERR_UNSUPPORTED_MODE, "mode")


def serve(fin, fout, model_key: str, context_limit: int = DEFAULT_CONTEXT_LIMIT) -> int:
    """Run the protocol loop over text streams until bye/EOF."""
    server = _Server(model_key, context_limit)
    for line in fin:
        if not line.strip():
            continue
        response, keep_running = server.handle_line(line)
        fout.write(canonical_dumps(response) + "\n")
        fout.flush()
        if not keep_running:
            return 0 if response.get("type") == "bye" else 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="modelzip-mock-sidecar")
    parser.add_argument("--model", default="uniform", choices=sorted(MOCK_MODELS))
    parser.add_argument("--context-limit", type=int, default=DEFAULT_CONTEXT_LIMIT)
    args = parser.parse_args(argv)
    return serve(sys.stdin, sys.stdout, args.model, args.context_limit)


if __name__ == "__main__":
    sys.exit(main())

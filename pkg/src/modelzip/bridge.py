"""Client for external probability providers speaking protocol v1.

A session owns one ordered request/response stream to a sidecar process
(spawned over stdio) or a stream socket.  Parallelism comes from opening
multiple sessions, never from interleaving requests within one.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import subprocess
import sys
from dataclasses import dataclass

from .models import ByteTokenMap
from .protocol import (
    ERR_MALFORMED,
    PROTOCOL_VERSION,
    ProtocolError,
    canonical_dumps,
    decode_pmf_rows,
)
from .quantize import QuantizedPmf

__all__ = [
    "SessionInfo",
    "EvalRequest",
    "EvalResponse",
    "Session",
    "open_session",
    "BridgeCodecModel",
]

BOS_POLICIES = ("none", "prepend_per_chunk")


@dataclass(frozen=True)
class SessionInfo:
    vocab_size: int
    context_limit: int
    bos_policy: str
    model_name: str
    byte_token_map: ByteTokenMap | None = None

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ProtocolError("vocab_size must be at least 2", field="vocab_size")
        if self.context_limit < 2:
            raise ProtocolError("context_limit must be at least 2", field="context_limit")
        if self.bos_policy not in BOS_POLICIES:
            raise ProtocolError(f"unknown bos_policy {self.bos_policy!r}", field="bos_policy")

    @property
    def effective_chunk_limit(self) -> int:
        """Largest request length, after BOS accounting."""
        if self.bos_policy == "prepend_per_chunk":
            return self.context_limit - 1
        return self.context_limit


@dataclass(frozen=True)
class EvalRequest:
    ids: tuple[int, ...]
    mode: str  # "metrics" | "codec"
    precision: int = 16

    def __post_init__(self):
        if self.mode not in ("metrics", "codec"):
            raise ProtocolError(f"unknown eval mode {self.mode!r}", field="mode")
        if len(self.ids) == 0:
            raise ProtocolError("eval request must contain at least one id", field="ids")


@dataclass(frozen=True)
class EvalResponse:
    mode: str
    first_token: str
    log2_probs: list[float] | None = None
    pmf_rows: list[QuantizedPmf] | None = None


class _StdioTransport:
    def __init__(self, argv: list[str]):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1,
        )

    def send_line(self, line: str):
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"sidecar closed the pipe: {exc}", "transport") from exc

    def recv_line(self) -> str:
        line = self.proc.stdout.readline()
        if line == "":
            raise ProtocolError("sidecar closed the stream mid-conversation", "transport")
        return line.rstrip("\n")

    def close(self):
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self.proc.wait(timeout=10)


class _SocketTransport:
    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port), timeout=30)
        self.reader = self.sock.makefile("r", encoding="utf-8", newline="\n")

    def send_line(self, line: str):
        self.sock.sendall((line + "\n").encode("utf-8"))

    def recv_line(self) -> str:
        line = self.reader.readline()
        if line == "":
            raise ProtocolError("peer closed the stream mid-conversation", "transport")
        return line.rstrip("\n")

    def close(self):
        self.reader.close()
        self.sock.close()


class Session:
    """One ordered protocol stream; never shared across threads."""

    def __init__(self, transport, capture: bool = False):
        self._transport = transport
        self._seq = 0
        self._closed = False
        self.capture = capture
        self.sent_lines: list[str] = []
        self.received_lines: list[str] = []
        self.info = self._handshake()

    def _roundtrip(self, payload: dict) -> dict:
        self._seq += 1
        payload = dict(payload, seq=self._seq)
        line = canonical_dumps(payload)
        if self.capture:
            self.sent_lines.append(line)
        self._transport.send_line(line)
        raw = self._transport.recv_line()
        if self.capture:
            self.received_lines.append(raw)
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}", ERR_MALFORMED) from exc
        if not isinstance(msg, dict):
            raise ProtocolError("response is not an object", ERR_MALFORMED)
        if msg.get("type") == "error":
            raise ProtocolError(
                str(msg.get("detail", "unspecified error")),
                code=str(msg.get("code", "error")),
                field=msg.get("field"),
            )
        if msg.get("seq") != self._seq:
            raise ProtocolError(
                f"response seq {msg.get('seq')} does not echo request seq {self._seq}",
                field="seq",
            )
        return msg

    def _handshake(self) -> SessionInfo:
        msg = self._roundtrip({"type": "hello", "protocol": PROTOCOL_VERSION})
        if msg.get("type") != "hello_ack":
            raise ProtocolError(f"expected hello_ack, got {msg.get('type')!r}", field="type")
        if msg.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"sidecar speaks protocol {msg.get('protocol')!r}, "
                f"client requires {PROTOCOL_VERSION}",
                code="protocol_version", field="protocol",
            )
        raw = msg.get("session")
        if not isinstance(raw, dict):
            raise ProtocolError("hello_ack is missing the session object", field="session")
        for key in ("vocab_size", "context_limit", "bos_policy", "model_name"):
            if key not in raw:
                raise ProtocolError(f"session is missing {key}", field=key)
        byte_map = raw.get("byte_token_map")
        mapped = ByteTokenMap(tuple(byte_map)) if byte_map is not None else None
        return SessionInfo(
            vocab_size=int(raw["vocab_size"]),
            context_limit=int(raw["context_limit"]),
            bos_policy=str(raw["bos_policy"]),
            model_name=str(raw["model_name"]),
            byte_token_map=mapped,
        )

    def tokenize(self, text: str) -> list[int]:
        msg = self._roundtrip({"type": "tokenize", "text": text})
        ids = msg.get("ids")
        if not isinstance(ids, list):
            raise ProtocolError("tokenize response has no ids", field="ids")
        return [int(x) for x in ids]

    def detokenize(self, ids) -> str:
        msg = self._roundtrip({"type": "detokenize", "ids": [int(x) for x in ids]})
        text = msg.get("text")
        if not isinstance(text, str):
            raise ProtocolError("detokenize response has no text", field="text")
        return text

    def byte_ids(self, data: bytes) -> list[int]:
        """Map raw bytes onto vocabulary ids for byte-domain evaluation."""
        if self.info.byte_token_map is None:
            raise ProtocolError(
                f"session {self.info.model_name!r} reserves no byte tokens; "
                "byte-domain evaluation is not available",
                code="byte_domain_unsupported",
            )
        table = self.info.byte_token_map.byte_to_token
        return [table[b] for b in data]

    def ids_to_bytes(self, ids) -> bytes:
        inverse = self.info.byte_token_map.token_to_byte
        return bytes(inverse[int(t)] for t in ids)

    def evaluate_chunk(self, request: EvalRequest) -> EvalResponse:
        if len(request.ids) > self.info.effective_chunk_limit:
            raise ProtocolError(
                f"chunk of {len(request.ids)} exceeds the session limit "
                f"{self.info.effective_chunk_limit}",
                code="context_overflow", field="ids",
            )
        payload = {"type": "eval", "mode": request.mode, "ids": list(request.ids)}
        if request.mode == "codec":
            payload["precision"] = request.precision
        msg = self._roundtrip(payload)
        if msg.get("type") != "eval_ack" or msg.get("mode") != request.mode:
            raise ProtocolError("malformed eval_ack", field="type")
        first_token = str(msg.get("first_token", "unconditional"))
        if request.mode == "metrics":
            probs = msg.get("log2_probs")
            if not isinstance(probs, list) or len(probs) != len(request.ids):
                raise ProtocolError(
                    "metrics response must score every request position", field="log2_probs"
                )
            probs = [float(x) for x in probs]
            if any(not math.isfinite(x) or x > 0 for x in probs):
                raise ProtocolError("non-finite or positive log2 prob", field="log2_probs")
            return EvalResponse(mode="metrics", first_token=first_token, log2_probs=probs)
        rows = decode_pmf_rows(
            str(msg.get("pmf_rows", "")), len(request.ids), self.info.vocab_size,
            int(msg.get("precision", request.precision)),
        )
        return EvalResponse(mode="codec", first_token=first_token, pmf_rows=rows)

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._roundtrip({"type": "bye"})
        except ProtocolError:
            pass
        finally:
            self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def mock_argv(model: str = "uniform", context_limit: int | None = None) -> list[str]:
    argv = [sys.executable, "-m", "modelzip.mock_sidecar", "--model", model]
    if context_limit is not None:
        argv += ["--context-limit", str(context_limit)]
    return argv


def open_session(endpoint, capture: bool = False) -> Session:
    """Connect to a probability provider.

    Endpoint forms: ``mock:<name>`` spawns the built-in mock sidecar,
    ``run:<command>`` spawns an arbitrary argv over stdio, ``tcp:host:port``
    connects to a socket server, and a list is used as argv directly.
    """
    if isinstance(endpoint, (list, tuple)):
        return Session(_StdioTransport(list(endpoint)), capture=capture)
    if endpoint.startswith("mock:"):
        return Session(_StdioTransport(mock_argv(endpoint[5:])), capture=capture)
    if endpoint.startswith("run:"):
        return Session(_StdioTransport(shlex.split(endpoint[4:])), capture=capture)
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        if not host or not port.isdigit():
            raise ProtocolError(f"bad tcp endpoint {endpoint!r}", field="endpoint")
        return Session(_SocketTransport(host, int(port)), capture=capture)
    raise ProtocolError(f"unrecognized endpoint {endpoint!r}", field="endpoint")


class BridgeCodecModel:
    """Adapter exposing session-served PMF rows through the model interface.

    Only the sidecar quantizes; the client consumes its integer tables
    verbatim, so encode and decode see identical frequencies.  For encoding,
    pass the chunk ids up front to fetch every row in one request; decoding
    fetches one row per symbol (the trailing pad id never influences the row
    being requested, since scoring is strictly causal).
    """

    PAD_ID = 0

    def __init__(self, session: Session, precision: int = 16, chunk_ids=None):
        self.session = session
        self.precision = precision
        self.alphabet_size = session.info.vocab_size
        self.model_id = f"bridge:{session.info.model_name}"
        self._prefetched: list[QuantizedPmf] | None = None
        if chunk_ids is not None:
            response = session.evaluate_chunk(
                EvalRequest(ids=tuple(int(x) for x in chunk_ids), mode="codec",
                            precision=precision)
            )
            self._prefetched = response.pmf_rows

    def begin_chunk(self):
        return []

    def next_quantized(self, state, freq_bits: int) -> QuantizedPmf:
        if freq_bits != self.precision:
            raise ProtocolError(
                f"session rows were quantized at {self.precision} bits, coder wants {freq_bits}"
            )
        position = len(state)
        if self._prefetched is not None:
            if position >= len(self._prefetched):
                raise ProtocolError("decoder ran past the prefetched chunk")
            return self._prefetched[position]
        ids = tuple(state) + (self.PAD_ID,)
        response = self.session.evaluate_chunk(
            EvalRequest(ids=ids, mode="codec", precision=self.precision)
        )
        return response.pmf_rows[position]

    def advance(self, state, symbol: int):
        state.append(symbol)

    def kernel_plan(self):
        return None

"""Chunked and sliding-window likelihood evaluation plus compression metrics.

The total code length L is the sum of -log2 P over every scored position;
BPT, BPC and BPB divide the same L by token, character and byte counts, and
the compression rate is payload/raw when the entropy coder actually ran,
else L / (8 * n_bytes).  Characters are Unicode scalar values; bytes are
UTF-8 length for text and raw length for byte streams.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .archive import decode_stream, encode_stream
from .bridge import BridgeCodecModel, EvalRequest, Session
from .coder import CoderConfig, decode_chunk, encode_chunk
from .quantize import DEFAULT_FREQ_BITS

__all__ = [
    "EvalConfig",
    "MetricsReport",
    "ReportRow",
    "HarnessError",
    "TokenizeRoundTripError",
    "Window",
    "total_bits",
    "make_windows",
    "compute_metrics",
    "evaluate_document",
    "aggregate_rows",
    "write_rows_jsonl",
    "read_rows_jsonl",
    "write_rows_csv",
    "read_rows_csv",
]


class HarnessError(ValueError):
    pass


class TokenizeRoundTripError(HarnessError):
    """Tokenizer failed detokenize(tokenize(text)) == text; document is skipped."""


MODES = ("chunked", "sliding")
DOMAINS = ("text_tokens", "bytes")


@dataclass(frozen=True)
class EvalConfig:
    context_size: int = 2048
    mode: str = "chunked"
    step: int | None = None
    domain: str = "text_tokens"
    freq_bits: int = DEFAULT_FREQ_BITS
    physical_compression: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise HarnessError(f"unknown mode {self.mode!r}")
        if self.domain not in DOMAINS:
            raise HarnessError(f"unknown domain {self.domain!r}")
        if self.context_size < 1:
            raise HarnessError("context size must be at least 1")
        if self.mode == "sliding":
            step = self.step
            if step is None or not 1 <= step <= self.context_size:
                raise HarnessError("sliding mode requires 1 <= step <= context size")

    @property
    def effective_step(self) -> int:
        return self.context_size if self.mode == "chunked" else self.step


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    scored_start: int
    scored_end: int


@dataclass(frozen=True)
class MetricsReport:
    total_bits: float
    n_tokens: int
    n_chars: int
    n_bytes: int
    bpt: float
    bpc: float
    bpb: float
    rate: float
    payload_bytes: int | None = None


def total_bits(log2_probs) -> float:
    """Code length in bits: the negated, exactly-rounded sum of log2 probs."""
    values = np.asarray(list(log2_probs), dtype=np.float64)
    if values.size == 0:
        return 0.0
    if not np.all(np.isfinite(values)):
        raise HarnessError("non-finite log2 probability")
    if np.any(values > 0):
        raise HarnessError("log2 probabilities must be <= 0")
    return -math.fsum(values.tolist())


def make_windows(n: int, config: EvalConfig) -> list[Window]:
    """Scoring plan: every position 0..n-1 is scored exactly once.

    Chunked mode uses disjoint windows of the context size.  Sliding mode
    scores the first window fully, then advances by the step with only the
    final step positions scored, so later tokens keep C - S tokens of
    context (the tail window keeps full context but scores fewer).
    """
    if n < 1:
        raise HarnessError("nothing to score")
    c = config.context_size
    if config.mode == "chunked" or n <= c:
        return [
            Window(start, min(start + c, n), start, min(start + c, n))
            for start in range(0, n, c)
        ]
    s = config.step
    windows = [Window(0, c, 0, c)]
    i = 1
    while c + (i - 1) * s < n:
        scored_start = c + (i - 1) * s
        scored_end = min(c + i * s, n)
        windows.append(Window(i * s, min(i * s + c, n), scored_start, scored_end))
        i += 1
    return windows


def compute_metrics(total: float, n_tokens: int, n_chars: int, n_bytes: int,
                    payload_bytes: int | None = None) -> MetricsReport:
    """The one place the metric identity L = bpt*t = bpc*c = bpb*b is applied."""
    if min(n_tokens, n_chars, n_bytes) < 1:
        raise HarnessError("token, char and byte counts must be positive")
    rate = payload_bytes / n_bytes if payload_bytes is not None else total / (8.0 * n_bytes)
    return MetricsReport(
        total_bits=total,
        n_tokens=n_tokens,
        n_chars=n_chars,
        n_bytes=n_bytes,
        bpt=total / n_tokens,
        bpc=total / n_chars,
        bpb=total / n_bytes,
        rate=rate,
        payload_bytes=payload_bytes,
    )


def _document_parts(doc) -> tuple[str, str | None, bytes]:
    if isinstance(doc, (bytes, bytearray)):
        return "<bytes>", None, bytes(doc)
    if isinstance(doc, str):
        return "<text>", doc, doc.encode("utf-8")
    doc_id = getattr(doc, "doc_id", "<doc>")
    text = getattr(doc, "text", None)
    data = getattr(doc, "data", None)
    if data is None:
        raise HarnessError(f"{doc_id}: document has no byte content")
    return doc_id, text, bytes(data)


def _ids_for(provider, config: EvalConfig, doc_id: str, text: str | None,
             data: bytes) -> list[int]:
    if isinstance(provider, Session):
        if config.domain == "bytes" or text is None:
            return provider.byte_ids(data)
        ids = provider.tokenize(text)
        back = provider.detokenize(ids)
        if back != text:
            raise TokenizeRoundTripError(
                f"{doc_id}: tokenizer does not round-trip this document"
            )
        return ids
    if provider.alphabet_size != 256:
        raise HarnessError(
            f"{doc_id}: in-process model over {provider.alphabet_size} symbols "
            "cannot consume byte documents"
        )
    return list(data)


def _score_window_model(model, ids, window: Window) -> list[float]:
    state = model.begin_chunk()
    out = []
    for pos in range(window.start, window.end):
        sym = ids[pos]
        if pos >= window.scored_start:
            out.append(model.next_log2_of(state, sym))
        model.advance(state, sym)
    return out


def _physical_payload(provider, ids, config: EvalConfig, doc_id: str) -> int:
    """Arithmetic-code the document chunk by chunk and verify the round trip."""
    coder_config = CoderConfig(freq_bits=config.freq_bits)
    c = config.context_size
    arr = np.asarray(ids, dtype=np.int64)
    if isinstance(provider, Session):
        payload = 0
        for start in range(0, arr.shape[0], c):
            piece = arr[start: start + c]
            encoder = BridgeCodecModel(provider, config.freq_bits, chunk_ids=piece.tolist())
            frame = encode_chunk(piece, encoder, coder_config)
            decoder = BridgeCodecModel(provider, config.freq_bits)
            out = decode_chunk(frame, decoder, coder_config)
            if not np.array_equal(out, piece):
                raise HarnessError(f"{doc_id}: physical round trip failed at chunk {start // c}")
            payload += (frame.bit_length + 7) // 8
        return payload
    archive = encode_stream(arr, provider, c, coder_config)
    if not np.array_equal(decode_stream(archive, provider), arr):
        raise HarnessError(f"{doc_id}: physical round trip failed")
    return archive.payload_bytes


def evaluate_document(doc, provider, config: EvalConfig) -> MetricsReport:
    """Score one document and return its compression metrics.

    ``provider`` is an in-process model or an open bridge Session.  With
    physical compression enabled the document is additionally
    arithmetic-coded chunk by chunk, round-trip verified, and the rate
    switches to payload bytes over raw bytes.
    """
    doc_id, text, data = _document_parts(doc)
    if len(data) == 0:
        raise HarnessError(f"{doc_id}: empty document")
    if config.domain == "bytes" and text is not None:
        text = None  # forced byte-domain evaluation of text content
    ids = _ids_for(provider, config, doc_id, text, data)
    n_tokens = len(ids)
    n_chars = len(text) if text is not None else len(data)
    n_bytes = len(data)

    if isinstance(provider, Session):
        if config.context_size > provider.info.effective_chunk_limit:
            raise HarnessError(
                f"context size {config.context_size} exceeds session limit "
                f"{provider.info.effective_chunk_limit}"
            )

    windows = make_windows(n_tokens, config)
    per_window = []
    for window in windows:
        if isinstance(provider, Session):
            response = provider.evaluate_chunk(
                EvalRequest(ids=tuple(ids[window.start: window.end]), mode="metrics")
            )
            probs = response.log2_probs[window.scored_start - window.start:
                                        window.scored_end - window.start]
        else:
            probs = _score_window_model(provider, ids, window)
        per_window.append(total_bits(probs))
    grand_total = math.fsum(per_window)

    payload = None
    if config.physical_compression:
        payload = _physical_payload(provider, ids, config, doc_id)
    return compute_metrics(grand_total, n_tokens, n_chars, n_bytes, payload)


# --- report rows ------------------------------------------------------------

ROW_COLUMNS = [
    "scope", "model", "dataset", "doc_id", "year_month", "mode", "context_size",
    "step", "total_bits", "n_tokens", "n_chars", "n_bytes", "bpt", "bpc", "bpb",
    "rate", "payload_bytes", "bos_policy", "status", "detail",
]


@dataclass
class ReportRow:
    scope: str  # "document" | "month"
    model: str
    dataset: str
    doc_id: str
    year_month: str
    mode: str
    context_size: int
    step: int
    total_bits: float = 0.0
    n_tokens: int = 0
    n_chars: int = 0
    n_bytes: int = 0
    bpt: float = 0.0
    bpc: float = 0.0
    bpb: float = 0.0
    rate: float = 0.0
    payload_bytes: int | None = None
    bos_policy: str = "none"
    status: str = "ok"
    detail: str = ""

    @classmethod
    def from_metrics(cls, metrics: MetricsReport, **meta) -> "ReportRow":
        return cls(
            total_bits=metrics.total_bits,
            n_tokens=metrics.n_tokens,
            n_chars=metrics.n_chars,
            n_bytes=metrics.n_bytes,
            bpt=metrics.bpt,
            bpc=metrics.bpc,
            bpb=metrics.bpb,
            rate=metrics.rate,
            payload_bytes=metrics.payload_bytes,
            **meta,
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ROW_COLUMNS}


def aggregate_rows(rows: list[ReportRow]) -> list[ReportRow]:
    """Collapse per-document rows into per-month rows (sorted, deterministic)."""
    groups: dict[tuple, list[ReportRow]] = {}
    for row in rows:
        if row.scope != "document" or row.status != "ok":
            continue
        key = (row.model, row.dataset, row.year_month, row.mode, row.context_size,
               row.step, row.bos_policy)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups):
        model, dataset, ym, mode, c, s, bos = key
        bucket = sorted(groups[key], key=lambda r: r.doc_id)
        total = math.fsum(r.total_bits for r in bucket)
        n_tokens = sum(r.n_tokens for r in bucket)
        n_chars = sum(r.n_chars for r in bucket)
        n_bytes = sum(r.n_bytes for r in bucket)
        payloads = [r.payload_bytes for r in bucket]
        payload = sum(payloads) if all(p is not None for p in payloads) else None
        metrics = compute_metrics(total, n_tokens, n_chars, n_bytes, payload)
        out.append(ReportRow.from_metrics(
            metrics, scope="month", model=model, dataset=dataset, doc_id="*",
            year_month=ym, mode=mode, context_size=c, step=s, bos_policy=bos,
        ))
    return out


def write_rows_jsonl(rows, fh) -> None:
    for row in rows:
        fh.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")


def read_rows_jsonl(fh) -> list[ReportRow]:
    rows = []
    for line in fh:
        if not line.strip():
            continue
        data = json.loads(line)
        rows.append(ReportRow(**{k: data.get(k) for k in ROW_COLUMNS}))
    return rows


def write_rows_csv(rows, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=ROW_COLUMNS)
    writer.writeheader()
    for row in rows:
        record = row.to_dict()
        if record["payload_bytes"] is None:
            record["payload_bytes"] = ""
        writer.writerow(record)


def read_rows_csv(fh) -> list[ReportRow]:
    rows = []
    for record in csv.DictReader(fh):
        record["context_size"] = int(record["context_size"])
        record["step"] = int(record["step"])
        for key in ("total_bits", "bpt", "bpc", "bpb", "rate"):
            record[key] = float(record[key])
        for key in ("n_tokens", "n_chars", "n_bytes"):
            record[key] = int(record[key])
        record["payload_bytes"] = (
            int(record["payload_bytes"]) if record["payload_bytes"] else None
        )
        rows.append(ReportRow(**record))
    return rows

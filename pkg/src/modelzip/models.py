"""Probability sources for both metrics (real log-probs) and coding (quantized).

All models speak one interface: a per-chunk state created by
``begin_chunk()``, advanced symbol by symbol, from which either a full
``log2`` distribution (metrics mode) or a :class:`~modelzip.quantize.QuantizedPmf`
(codec mode) can be requested before each symbol.  Adaptive models are
online-consistent: the distribution at a position depends only on the
symbols already seen in the chunk, so encoder and decoder evolve identical
state.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .quantize import QuantizedPmf, quantize_weights

__all__ = [
    "ModelContext",
    "ModelOutput",
    "ByteTokenMap",
    "ModelError",
    "UniformModel",
    "AdaptiveByteModel",
    "StaticNgramModel",
    "train_static_ngram",
    "next_distribution",
    "restrict_to_bytes",
    "compressor_predictor",
    "get_model",
]

BYTE_ALPHABET = 256


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelContext:
    """Conditioning prefix within the current chunk."""

    symbols_so_far: tuple[int, ...] = ()
    position: int = 0

    def __post_init__(self):
        if self.position != len(self.symbols_so_far):
            raise ModelError("position must equal the length of symbols_so_far")


@dataclass(frozen=True)
class ModelOutput:
    """One prediction step: real log2 probabilities and/or a quantized PMF."""

    log2_probs: np.ndarray | None = None
    quantized: QuantizedPmf | None = None
    log2_prob_of_next: float | None = None

    def __post_init__(self):
        if self.log2_probs is not None:
            p = np.exp2(np.asarray(self.log2_probs, dtype=np.float64))
            if abs(float(p.sum()) - 1.0) > 1e-9:
                raise ModelError("log2_probs do not sum to 1")
            if self.quantized is not None:
                if int(np.argmax(self.log2_probs)) != int(np.argmax(self.quantized.frequencies())):
                    raise ModelError("argmax of real and quantized distributions disagree")
        if self.log2_prob_of_next is not None and not math.isfinite(self.log2_prob_of_next):
            raise ModelError("log2_prob_of_next must be finite")


@dataclass(frozen=True)
class ByteTokenMap:
    """Injective mapping from the 256 byte values into a model vocabulary."""

    byte_to_token: tuple[int, ...]

    def __post_init__(self):
        if len(self.byte_to_token) != 256:
            raise ModelError("byte_to_token must cover all 256 byte values")
        if len(set(self.byte_to_token)) != 256:
            raise ModelError("byte_to_token must be injective")

    @property
    def token_to_byte(self) -> dict[int, int]:
        return {t: b for b, t in enumerate(self.byte_to_token)}


def _delta_fraction(delta: float) -> Fraction:
    if delta <= 0 or not math.isfinite(delta):
        raise ModelError("smoothing delta must be positive and finite")
    return Fraction(delta)


class UniformModel:
    """Memoryless uniform distribution over a fixed alphabet."""

    def __init__(self, alphabet_size: int = BYTE_ALPHABET):
        if alphabet_size < 2:
            raise ModelError("alphabet must have at least 2 symbols")
        self.alphabet_size = alphabet_size
        self.model_id = f"uniform-{alphabet_size}" if alphabet_size != 256 else "uniform"
        self._log2row = np.full(alphabet_size, -math.log2(alphabet_size))
        self._pmf_cache: dict[int, QuantizedPmf] = {}
        self._plan = None

    def begin_chunk(self):
        return None

    def next_quantized(self, state, freq_bits: int) -> QuantizedPmf:
        pmf = self._pmf_cache.get(freq_bits)
        if pmf is None:
            pmf = quantize_weights([1] * self.alphabet_size, freq_bits)
            self._pmf_cache[freq_bits] = pmf
        return pmf

    def next_log2(self, state) -> np.ndarray:
        return self._log2row

    def next_log2_of(self, state, symbol: int) -> float:
        return float(self._log2row[symbol])

    def advance(self, state, symbol: int):
        pass

    def kernel_plan(self):
        if self.alphabet_size > 256:
            return None
        if self._plan is None:
            rows = np.zeros((1, self.alphabet_size + 1), dtype=np.int64)
            rows[0] = self.next_quantized(None, 16).cum
            self._plan = _kernels.StaticRowsPlan(
                rows=rows,
                ctx_map=_kernels.build_ctx_map([(_kernels.pack_context(()), 0)]),
                order=0,
                alphabet_size=self.alphabet_size,
            )
        return self._plan


class AdaptiveByteModel:
    """Order-k adaptive count model with additive (Laplace/KT) smoothing.

    P(s | ctx) = (count(ctx, s) + delta) / (count(ctx, *) + delta * A), with
    counts accumulated within the current chunk only.  Contexts shorter than
    k (at the start of a chunk) are tracked separately, so the model is a
    deterministic function of the chunk prefix.
    """

    def __init__(self, order: int = 0, delta: float = 1.0, alphabet_size: int = BYTE_ALPHABET):
        if order < 0 or order > 8:
            raise ModelError("adaptive order must be in [0, 8]")
        if alphabet_size < 2:
            raise ModelError("alphabet must have at least 2 symbols")
        self.order = order
        self.alphabet_size = alphabet_size
        frac = _delta_fraction(delta)
        self.delta = float(delta)
        self.delta_num = frac.numerator
        self.delta_den = frac.denominator
        base = f"adaptive{order}"
        if delta != 1.0:
            base += f":{delta:g}"
        self.model_id = base

    def begin_chunk(self):
        return {"counts": {}, "recent": []}

    def _row(self, state):
        recent = state["recent"]
        ctx = tuple(recent[-self.order:]) if self.order else ()
        row = state["counts"].get(ctx)
        if row is None:
            row = np.zeros(self.alphabet_size, dtype=np.int64)
            state["counts"][ctx] = row
        return row

    def next_quantized(self, state, freq_bits: int) -> QuantizedPmf:
        row = self._row(state)
        weights = row * self.delta_den + self.delta_num
        return quantize_weights(weights, freq_bits)

    def next_log2(self, state) -> np.ndarray:
        row = self._row(state)
        total = float(row.sum()) + self.delta * self.alphabet_size
        return np.log2((row + self.delta) / total)

    def next_log2_of(self, state, symbol: int) -> float:
        row = self._row(state)
        total = float(row.sum()) + self.delta * self.alphabet_size
        return math.log2((float(row[symbol]) + self.delta) / total)

    def advance(self, state, symbol: int):
        self._row(state)[symbol] += 1
        state["recent"].append(symbol)
        if len(state["recent"]) > self.order:
            del state["recent"][: len(state["recent"]) - self.order]

    def kernel_plan(self):
        if self.alphabet_size > 256 or self.order > 3 or self.delta_den > 4:
            return None
        return _kernels.AdaptivePlan(
            alphabet_size=self.alphabet_size,
            order=self.order,
            delta_num=self.delta_num,
            delta_den=self.delta_den,
        )


_NGRAM_MAGIC = b"MZNG"


class StaticNgramModel:
    """Frozen order-k byte n-gram with additive smoothing and backoff.

    Count tables come from :func:`train_static_ngram`.  At prediction time
    the longest available context with training occurrences is used; unseen
    contexts back off toward order 0, whose table always exists.
    """

    def __init__(self, order: int, delta: float, tables: list[dict], model_id: str = ""):
        self.order = order
        self.alphabet_size = BYTE_ALPHABET
        frac = _delta_fraction(delta)
        self.delta = float(delta)
        self.delta_num = frac.numerator
        self.delta_den = frac.denominator
        self.tables = tables  # tables[L]: {context tuple of length L: count row}
        self.model_id = model_id or f"ngram{order}"
        self._pmf_cache: dict[tuple, QuantizedPmf] = {}
        self._log2_cache: dict[tuple, np.ndarray] = {}
        self._plan = None

    def begin_chunk(self):
        return []

    def _resolve(self, recent) -> tuple[int, tuple]:
        for level in range(min(self.order, len(recent)), -1, -1):
            ctx = tuple(recent[len(recent) - level:])
            if ctx in self.tables[level]:
                return level, ctx
        raise ModelError("order-0 table missing; model was not trained")

    def next_quantized(self, state, freq_bits: int) -> QuantizedPmf:
        level, ctx = self._resolve(state)
        key = (level, ctx, freq_bits)
        pmf = self._pmf_cache.get(key)
        if pmf is None:
            row = self.tables[level][ctx]
            pmf = quantize_weights(row * self.delta_den + self.delta_num, freq_bits)
            self._pmf_cache[key] = pmf
        return pmf

    def next_log2(self, state) -> np.ndarray:
        level, ctx = self._resolve(state)
        key = (level, ctx)
        out = self._log2_cache.get(key)
        if out is None:
            row = self.tables[level][ctx]
            total = float(row.sum()) + self.delta * self.alphabet_size
            out = np.log2((row + self.delta) / total)
            self._log2_cache[key] = out
        return out

    def next_log2_of(self, state, symbol: int) -> float:
        return float(self.next_log2(state)[symbol])

    def advance(self, state, symbol: int):
        state.append(symbol)
        if len(state) > self.order:
            del state[: len(state) - self.order]

    def kernel_plan(self):
        n_rows = sum(len(t) for t in self.tables)
        if n_rows > _kernels.max_static_rows():
            return None
        if self._plan is None:
            entries = []
            rows = np.empty((n_rows, self.alphabet_size + 1), dtype=np.int64)
            for level in range(self.order + 1):
                for ctx, row in sorted(self.tables[level].items()):
                    pmf = quantize_weights(row * self.delta_den + self.delta_num, 16)
                    entries.append((_kernels.pack_context(ctx), len(entries)))
                    rows[len(entries) - 1] = pmf.cum
            self._plan = _kernels.StaticRowsPlan(
                rows=rows,
                ctx_map=_kernels.build_ctx_map(entries),
                order=self.order,
                alphabet_size=self.alphabet_size,
            )
        return self._plan

    def save(self, path):
        """Versioned binary dump of the count tables (see docs/formats.md)."""
        with open(path, "wb") as fh:
            fh.write(_NGRAM_MAGIC)
            fh.write(struct.pack("<BBd", 1, self.order, self.delta))
            for level in range(self.order + 1):
                table = self.tables[level]
                fh.write(struct.pack("<I", len(table)))
                for ctx, row in sorted(table.items()):
                    fh.write(bytes(ctx))
                    fh.write(row.astype("<u4").tobytes())

    @classmethod
    def load(cls, path, model_id: str = "") -> "StaticNgramModel":
        with open(path, "rb") as fh:
            if fh.read(4) != _NGRAM_MAGIC:
                raise ModelError(f"{path}: not a static n-gram dump")
            version, order, delta = struct.unpack("<BBd", fh.read(10))
            if version != 1:
                raise ModelError(f"{path}: unsupported dump version {version}")
            tables = []
            for level in range(order + 1):
                (count,) = struct.unpack("<I", fh.read(4))
                table = {}
                for _ in range(count):
                    ctx = tuple(fh.read(level))
                    row = np.frombuffer(fh.read(4 * BYTE_ALPHABET), dtype="<u4").astype(np.int64)
                    table[ctx] = row
                tables.append(table)
        return cls(order=order, delta=delta, tables=tables, model_id=model_id)


def train_static_ngram(data: bytes, order: int, delta: float = 1.0,
                       model_id: str = "") -> StaticNgramModel:
    """Count transitions of every order up to ``order`` over the training bytes."""
    if not 0 <= order <= 3:
        raise ModelError("static n-gram order must be in [0, 3]")
    if len(data) == 0:
        raise ModelError("training data must be non-empty")
    arr = np.frombuffer(bytes(data), dtype=np.uint8)
    tables: list[dict] = []
    for level in range(order + 1):
        table: dict = {}
        for t in range(level, arr.shape[0]):
            ctx = tuple(int(x) for x in arr[t - level: t])
            row = table.get(ctx)
            if row is None:
                row = np.zeros(BYTE_ALPHABET, dtype=np.int64)
                table[ctx] = row
            row[int(arr[t])] += 1
        tables.append(table)
    return StaticNgramModel(order=order, delta=delta, tables=tables, model_id=model_id)


def next_distribution(model, ctx: ModelContext, mode: str = "metrics") -> ModelOutput:
    """Distribution over the next symbol after replaying ``ctx`` on a fresh chunk."""
    if mode not in ("metrics", "codec"):
        raise ModelError(f"unknown mode {mode!r}")
    capacity = getattr(model, "context_capacity", None)
    if capacity is not None and ctx.position >= capacity:
        raise ModelError("context overflow")
    state = model.begin_chunk()
    for sym in ctx.symbols_so_far:
        model.advance(state, sym)
    if mode == "metrics":
        return ModelOutput(log2_probs=model.next_log2(state))
    return ModelOutput(quantized=model.next_quantized(state, 16))


def restrict_to_bytes(full_output: ModelOutput, byte_map: ByteTokenMap) -> ModelOutput:
    """Renormalize a vocabulary-wide distribution onto the 256 byte tokens."""
    if full_output.log2_probs is None:
        raise ModelError("restriction needs a full log2 distribution")
    lp = np.asarray(full_output.log2_probs, dtype=np.float64)
    idx = np.asarray(byte_map.byte_to_token, dtype=np.int64)
    if np.any(idx >= lp.shape[0]):
        raise ModelError("byte map points outside the vocabulary")
    sel = lp[idx]
    # log-sum-exp over the selected tokens keeps the renormalization stable
    m = float(np.max(sel))
    log_norm = m + math.log2(float(np.sum(np.exp2(sel - m))))
    return ModelOutput(log2_probs=sel - log_norm)


def compressor_predictor(prefix: bytes, compress_len) -> ModelOutput:
    """Next-byte distribution induced by a compressor's incremental code length.

    P(b | prefix) is proportional to 2**(len(prefix) - len(prefix + b)),
    normalized over all 256 one-byte extensions.
    """
    base = compress_len(bytes(prefix))
    exponents = np.empty(256, dtype=np.float64)
    for b in range(256):
        n = compress_len(bytes(prefix) + bytes([b]))
        if not math.isfinite(n):
            raise ModelError(f"compress_len failed on extension byte {b}")
        exponents[b] = float(base) - float(n)
    m = float(np.max(exponents))
    probs = np.exp2(exponents - m)
    probs /= probs.sum()
    with np.errstate(divide="ignore"):
        log2p = np.log2(probs)
    return ModelOutput(log2_probs=np.maximum(log2p, -1074.0))


_REGISTERED = {}


def get_model(model_id: str):
    """Resolve a model id string: uniform, adaptiveK[:delta], ngram:<path>."""
    if model_id in _REGISTERED:
        return _REGISTERED[model_id]
    if model_id == "uniform":
        return UniformModel()
    if model_id.startswith("uniform-"):
        return UniformModel(int(model_id.split("-", 1)[1]))
    if model_id.startswith("adaptive"):
        rest = model_id[len("adaptive"):]
        if ":" in rest:
            order_s, delta_s = rest.split(":", 1)
            return AdaptiveByteModel(order=int(order_s), delta=float(delta_s))
        return AdaptiveByteModel(order=int(rest))
    if model_id.startswith("ngram:"):
        path = model_id[len("ngram:"):]
        return StaticNgramModel.load(path, model_id=model_id)
    raise ModelError(f"unknown model id {model_id!r}")


def register_model(model) -> None:
    """Make a model instance resolvable by its id (used for trained models)."""
    _REGISTERED[model.model_id] = model

"""Finite-precision arithmetic coder over quantized probability models.

Classic integer realization with B-bit ``low``/``high`` registers and
pending-bit (carry/underflow) handling at the 1/4, 1/2, 3/4 thresholds.
The flush emits the leading bits of ``low + quarter``: one chosen bit, the
accumulated pending bits, and one disambiguation bit.  Decoding relies on
the frame's symbol count, never on a terminator symbol, and never consumes
more than ``bit_length`` payload bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantize import QuantizedPmf

__all__ = [
    "ChunkFrame",
    "CoderConfig",
    "CoderError",
    "DecodeMismatchError",
    "TruncatedPayloadError",
    "encode_chunk",
    "decode_chunk",
]

DEFAULT_REGISTER_BITS = 32


class CoderError(ValueError):
    pass


class DecodeMismatchError(CoderError):
    """Decoder interval no longer contains the code value.

    Indicates the decode-side model diverged from the encode-side model.
    """

    def __init__(self, position: int):
        self.position = position
        super().__init__(f"interval exhausted while decoding symbol {position}")


class TruncatedPayloadError(CoderError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"payload ends before symbol {position} could be decoded")


@dataclass(frozen=True)
class CoderConfig:
    register_bits: int = DEFAULT_REGISTER_BITS
    freq_bits: int = 16

    def __post_init__(self):
        if self.register_bits < 4:
            raise CoderError("register width must be at least 4 bits")
        if self.freq_bits > self.register_bits - 2:
            raise CoderError("frequency precision must satisfy F <= B - 2")
        if self.freq_bits < 1:
            raise CoderError("frequency precision must be positive")


@dataclass(frozen=True)
class ChunkFrame:
    """Arithmetic code for one chunk: symbol count, bit length, payload bytes.

    Encoder output always satisfies ``ceil(bit_length / 8) == len(payload)``.
    A shorter payload can only come from damaged input; it is representable
    so that decoding can report exactly which symbol the loss hits.
    """

    symbol_count: int
    bit_length: int
    payload: bytes

    def __post_init__(self):
        if self.symbol_count < 1:
            raise CoderError("chunk must contain at least one symbol")
        if len(self.payload) > (self.bit_length + 7) // 8:
            raise CoderError("payload longer than bit_length implies")

    @property
    def is_intact(self) -> bool:
        return (self.bit_length + 7) // 8 == len(self.payload)


class _BitWriter:
    __slots__ = ("buf", "acc", "nacc", "nbits")

    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nacc = 0
        self.nbits = 0

    def write(self, bit: int):
        self.acc = (self.acc << 1) | bit
        self.nacc += 1
        self.nbits += 1
        if self.nacc == 8:
            self.buf.append(self.acc)
            self.acc = 0
            self.nacc = 0

    def getvalue(self) -> tuple[bytes, int]:
        if self.nacc:
            self.buf.append(self.acc << (8 - self.nacc))
        return bytes(self.buf), self.nbits


class _BitReader:
    """Yields payload bits; zero-pads past bit_length, errors past the bytes.

    A read at an index below ``bit_length`` that falls beyond the physical
    payload means the frame was truncated.
    """

    __slots__ = ("payload", "bit_length", "pos", "position_hook")

    def __init__(self, payload: bytes, bit_length: int):
        self.payload = payload
        self.bit_length = bit_length
        self.pos = 0

    def read(self, symbol_index: int) -> int:
        i = self.pos
        self.pos = i + 1
        if i >= self.bit_length:
            return 0
        byte_index = i >> 3
        if byte_index >= len(self.payload):
            raise TruncatedPayloadError(symbol_index)
        return (self.payload[byte_index] >> (7 - (i & 7))) & 1


def _check_pmf(pmf: QuantizedPmf, alphabet_size: int, config: CoderConfig, position: int):
    if pmf.freq_bits != config.freq_bits:
        raise CoderError(
            f"model produced total 2**{pmf.freq_bits} at position {position}, "
            f"coder expects 2**{config.freq_bits}"
        )
    if pmf.alphabet_size != alphabet_size:
        raise CoderError(f"model changed alphabet size at position {position}")


def encode_chunk(symbols, model, config: CoderConfig | None = None, freq_log=None) -> ChunkFrame:
    """Arithmetic-code one chunk of symbols under ``model``.

    The model supplies one QuantizedPmf per position, conditioned on the
    symbols already coded within the chunk.  When ``freq_log`` is a list,
    the integer frequency actually used at each step is appended to it
    (needed for coding-length accounting).
    """
    config = config or CoderConfig()
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.ndim != 1 or symbols.shape[0] == 0:
        raise CoderError("symbols must be a non-empty 1-D sequence")

    plan = getattr(model, "kernel_plan", lambda: None)()
    if plan is not None:
        from . import _kernels

        result = _kernels.encode_with_plan(symbols, plan, config)
        if result is not None:
            frame, freqs = result
            if freq_log is not None:
                freq_log.extend(int(x) for x in freqs)
            return frame

    return _encode_chunk_pure(symbols, model, config, freq_log)


def _encode_chunk_pure(symbols, model, config: CoderConfig, freq_log=None) -> ChunkFrame:
    b = config.register_bits
    total = 1 << config.freq_bits
    mask = (1 << b) - 1
    half = 1 << (b - 1)
    quarter = 1 << (b - 2)
    three_quarters = half + quarter

    alphabet = model.alphabet_size
    if np.any(symbols < 0) or np.any(symbols >= alphabet):
        raise CoderError("symbol out of range for model alphabet")

    out = _BitWriter()
    pending = 0

    def emit(bit: int):
        nonlocal pending
        out.write(bit)
        inv = bit ^ 1
        for _ in range(pending):
            out.write(inv)
        pending = 0

    low = 0
    high = mask
    state = model.begin_chunk()
    for pos, sym in enumerate(symbols.tolist()):
        pmf = model.next_quantized(state, config.freq_bits)
        _check_pmf(pmf, alphabet, config, pos)
        cum = pmf.cum
        c_lo = int(cum[sym])
        c_hi = int(cum[sym + 1])
        if freq_log is not None:
            freq_log.append(c_hi - c_lo)

        span = high - low + 1
        high = low + (span * c_hi) // total - 1
        low = low + (span * c_lo) // total
        while True:
            if high < half:
                emit(0)
            elif low >= half:
                emit(1)
                low -= half
                high -= half
            elif low >= quarter and high < three_quarters:
                pending += 1
                low -= quarter
                high -= quarter
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        # register invariant: renormalization leaves at least a quarter range
        assert low <= high and high - low >= quarter
        model.advance(state, sym)

    # terminal bits: the first two bits of low + quarter, with pending
    # inversions in between, pin the code value inside the final interval
    pending += 1
    emit(0 if low < quarter else 1)

    payload, nbits = out.getvalue()
    return ChunkFrame(symbol_count=symbols.shape[0], bit_length=nbits, payload=payload)


def decode_chunk(frame: ChunkFrame, model, config: CoderConfig | None = None) -> np.ndarray:
    """Invert :func:`encode_chunk` under the same deterministic model."""
    config = config or CoderConfig()

    plan = getattr(model, "kernel_plan", lambda: None)()
    if plan is not None and (frame.bit_length + 7) // 8 == len(frame.payload):
        from . import _kernels

        symbols = _kernels.decode_with_plan(frame, plan, config)
        if symbols is not None:
            return symbols

    return _decode_chunk_pure(frame, model, config)


def _decode_chunk_pure(frame: ChunkFrame, model, config: CoderConfig) -> np.ndarray:
    b = config.register_bits
    total = 1 << config.freq_bits
    mask = (1 << b) - 1
    half = 1 << (b - 1)
    quarter = 1 << (b - 2)
    three_quarters = half + quarter

    reader = _BitReader(frame.payload, frame.bit_length)
    code = 0
    for _ in range(b):
        code = (code << 1) | reader.read(0)

    low = 0
    high = mask
    out = np.empty(frame.symbol_count, dtype=np.int64)
    state = model.begin_chunk()
    for pos in range(frame.symbol_count):
        pmf = model.next_quantized(state, config.freq_bits)
        _check_pmf(pmf, model.alphabet_size, config, pos)
        cum = pmf.cum

        span = high - low + 1
        value = ((code - low + 1) * total - 1) // span
        sym = int(np.searchsorted(cum, value, side="right")) - 1
        c_lo = int(cum[sym])
        c_hi = int(cum[sym + 1])

        high = low + (span * c_hi) // total - 1
        low = low + (span * c_lo) // total
        if not (low <= code <= high):
            raise DecodeMismatchError(pos)
        while True:
            if high < half:
                pass
            elif low >= half:
                low -= half
                high -= half
                code -= half
            elif low >= quarter and high < three_quarters:
                low -= quarter
                high -= quarter
                code -= quarter
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            code = (code << 1) | reader.read(pos)
        assert low <= high and high - low >= quarter

        out[pos] = sym
        model.advance(state, sym)
    return out

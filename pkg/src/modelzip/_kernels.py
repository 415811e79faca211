"""Compiled fast paths for the arithmetic coder with built-in count models.

Each kernel re-implements the coder loop plus the integer largest-remainder
quantization inline, producing byte-identical output to the pure-Python path
(enforced by tests).  Kernels cover byte-alphabet count models only; anything
else falls back to the reference implementation in :mod:`modelzip.coder`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, types
from numba.typed import Dict as NumbaDict

from .coder import ChunkFrame, CoderConfig, DecodeMismatchError

__all__ = ["AdaptivePlan", "StaticRowsPlan", "encode_with_plan", "decode_with_plan"]

# Packed sort keys for the remainder ordering need rem and weight to fit in
# 22 bits each; count models stay far below this at supported chunk sizes.
_MAX_WEIGHT_TOTAL = 1 << 22

# Above this many distinct contexts the one-off table build costs more than
# the pure path with per-context caching saves.
_MAX_STATIC_ROWS = 20000


@dataclass
class AdaptivePlan:
    alphabet_size: int
    order: int
    delta_num: int
    delta_den: int


@dataclass
class StaticRowsPlan:
    rows: np.ndarray  # (n_rows, alphabet+1) int64 cumulative tables
    ctx_map: object  # numba typed Dict: packed context -> row index
    order: int
    alphabet_size: int
    freq_bits: int = 16


@njit(cache=True)
def _exact_div(scaled, big, inv_big):
    """floor(scaled / big) using a float reciprocal plus exact correction."""
    q = np.int64(scaled * inv_big)
    while q * big > scaled:
        q -= 1
    while (q + 1) * big <= scaled:
        q += 1
    return q


@njit(cache=True)
def _kth_ascending(scratch, n, k):
    """Value at ascending rank k (0-based) of scratch[:n]; reorders scratch."""
    lo = 0
    hi = n - 1
    while lo < hi:
        pivot = scratch[(lo + hi) >> 1]
        i = lo
        j = hi
        while i <= j:
            while scratch[i] < pivot:
                i += 1
            while scratch[j] > pivot:
                j -= 1
            if i <= j:
                tmp = scratch[i]
                scratch[i] = scratch[j]
                scratch[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return scratch[k]
    return scratch[lo]


@njit(cache=True)
def _quantize_counts_step(counts, dnum, dden, freq_bits, f, keys, scratch):
    """Quantize (dden * counts + dnum) to integer frequencies summing 2**freq_bits.

    Identical result to quantize.quantize_weights: largest-remainder with
    the (remainder desc, weight desc, index asc) ordering, then zero repair
    from the largest frequencies.  Only the top-r *set* matters for the unit
    distribution, so a quickselect threshold replaces the full sort.
    """
    n = counts.shape[0]
    total = np.int64(1) << freq_bits
    big = np.int64(0)
    for i in range(n):
        big += dden * counts[i] + dnum
    inv_big = 1.0 / big
    assigned = np.int64(0)
    for i in range(n):
        w = dden * counts[i] + dnum
        scaled = w * total
        q = _exact_div(scaled, big, inv_big)
        rem = scaled - q * big
        f[i] = q
        assigned += q
        # ascending key order equals (rem desc, weight desc, idx asc)
        keys[i] = ((big - 1 - rem) << 38) | ((_MAX_WEIGHT_TOTAL - 1 - w) << 16) | i
    r = total - assigned
    if r > 0:
        for i in range(n):
            scratch[i] = keys[i]
        # keys are distinct, so exactly r of them are <= the r-th smallest
        threshold = _kth_ascending(scratch, n, r - 1)
        for i in range(n):
            if keys[i] <= threshold:
                f[i] += 1
    deficit = 0
    for i in range(n):
        if f[i] == 0:
            f[i] = 1
            deficit += 1
    while deficit > 0:
        j = np.argmax(f)
        f[j] -= 1
        deficit -= 1


@njit(cache=True)
def _write_bit_pending(buf, nbits, pending, bit):
    pos = nbits
    if bit:
        buf[pos >> 3] |= np.uint8(1 << (7 - (pos & 7)))
    pos += 1
    inv = 1 - bit
    for _ in range(pending):
        if inv:
            buf[pos >> 3] |= np.uint8(1 << (7 - (pos & 7)))
        pos += 1
    return pos


@njit(cache=True)
def _read_bit(payload, bit_length, pos):
    if pos >= bit_length:
        return 0
    return (payload[pos >> 3] >> (7 - (pos & 7))) & 1


@njit(cache=True)
def _pack_key(symbols, t, length):
    key = np.int64(length) << 24
    for j in range(length):
        key |= symbols[t - length + j] << (8 * (length - 1 - j))
    return key


@njit(cache=True)
def _encode_counts(symbols, alphabet, order, dnum, dden, static_rows, static_map,
                   use_static, freq_bits, register_bits):
    """Shared encode loop for adaptive count models and static row tables."""
    n = symbols.shape[0]
    total = np.int64(1) << freq_bits
    half = np.int64(1) << (register_bits - 1)
    quarter = half >> 1
    three_q = half + quarter
    mask = (np.int64(1) << register_bits) - 1

    buf = np.zeros((n * register_bits + register_bits + 64) // 8 + 2, dtype=np.uint8)
    nbits = 0
    pending = 0
    low = np.int64(0)
    high = mask

    freqs_used = np.empty(n, dtype=np.int64)
    cum = np.empty(alphabet + 1, dtype=np.int64)
    f = np.empty(alphabet, dtype=np.int64)
    keys = np.empty(alphabet, dtype=np.int64)
    scratch = np.empty(alphabet, dtype=np.int64)

    ctx_rows = np.zeros((1, 1), dtype=np.int64)
    ctx_map = NumbaDict.empty(types.int64, types.int64)
    n_rows = 0
    if not use_static:
        ctx_rows = np.zeros((n + 1, alphabet), dtype=np.int64)

    for t in range(n):
        ctx_len = order if t >= order else t
        if use_static:
            row = 0
            lvl = ctx_len
            while lvl >= 0:
                k2 = _pack_key(symbols, t, lvl)
                if k2 in static_map:
                    row = static_map[k2]
                    break
                lvl -= 1
            cumrow = static_rows[row]
        else:
            key = _pack_key(symbols, t, ctx_len)
            if key in ctx_map:
                row = ctx_map[key]
            else:
                row = n_rows
                ctx_map[key] = row
                n_rows += 1
            _quantize_counts_step(ctx_rows[row], dnum, dden, freq_bits, f, keys, scratch)
            acc = np.int64(0)
            cum[0] = 0
            for i in range(alphabet):
                acc += f[i]
                cum[i + 1] = acc
            cumrow = cum

        s = symbols[t]
        c_lo = cumrow[s]
        c_hi = cumrow[s + 1]
        freqs_used[t] = c_hi - c_lo

        span = high - low + 1
        high = low + (span * c_hi) // total - 1
        low = low + (span * c_lo) // total
        while True:
            if high < half:
                nbits = _write_bit_pending(buf, nbits, pending, 0)
                pending = 0
            elif low >= half:
                nbits = _write_bit_pending(buf, nbits, pending, 1)
                pending = 0
                low -= half
                high -= half
            elif low >= quarter and high < three_q:
                pending += 1
                low -= quarter
                high -= quarter
            else:
                break
            low <<= 1
            high = (high << 1) | 1

        if not use_static:
            ctx_rows[row, s] += 1

    pending += 1
    if low < quarter:
        nbits = _write_bit_pending(buf, nbits, pending, 0)
    else:
        nbits = _write_bit_pending(buf, nbits, pending, 1)

    return buf[: (nbits + 7) // 8], nbits, freqs_used


@njit(cache=True)
def _decode_counts(payload, bit_length, nsym, alphabet, order, dnum, dden,
                   static_rows, static_map, use_static, freq_bits, register_bits):
    """Shared decode loop; returns (symbols, error_position or -1)."""
    total = np.int64(1) << freq_bits
    half = np.int64(1) << (register_bits - 1)
    quarter = half >> 1
    three_q = half + quarter
    mask = (np.int64(1) << register_bits) - 1

    out = np.empty(nsym, dtype=np.int64)
    cum = np.empty(alphabet + 1, dtype=np.int64)
    f = np.empty(alphabet, dtype=np.int64)
    keys = np.empty(alphabet, dtype=np.int64)
    scratch = np.empty(alphabet, dtype=np.int64)

    ctx_rows = np.zeros((1, 1), dtype=np.int64)
    ctx_map = NumbaDict.empty(types.int64, types.int64)
    n_rows = 0
    if not use_static:
        ctx_rows = np.zeros((nsym + 1, alphabet), dtype=np.int64)

    pos = 0
    code = np.int64(0)
    for _ in range(register_bits):
        code = (code << 1) | _read_bit(payload, bit_length, pos)
        pos += 1
    low = np.int64(0)
    high = mask

    for t in range(nsym):
        ctx_len = order if t >= order else t
        if use_static:
            row = 0
            lvl = ctx_len
            while lvl >= 0:
                k2 = _pack_key(out, t, lvl)
                if k2 in static_map:
                    row = static_map[k2]
                    break
                lvl -= 1
            cumrow = static_rows[row]
        else:
            key = _pack_key(out, t, ctx_len)
            if key in ctx_map:
                row = ctx_map[key]
            else:
                row = n_rows
                ctx_map[key] = row
                n_rows += 1
            _quantize_counts_step(ctx_rows[row], dnum, dden, freq_bits, f, keys, scratch)
            acc = np.int64(0)
            cum[0] = 0
            for i in range(alphabet):
                acc += f[i]
                cum[i + 1] = acc
            cumrow = cum

        span = high - low + 1
        value = ((code - low + 1) * total - 1) // span
        s = np.searchsorted(cumrow, value, side="right") - 1
        c_lo = cumrow[s]
        c_hi = cumrow[s + 1]
        high = low + (span * c_hi) // total - 1
        low = low + (span * c_lo) // total
        if code < low or code > high:
            return out, t
        while True:
            if high < half:
                pass
            elif low >= half:
                low -= half
                high -= half
                code -= half
            elif low >= quarter and high < three_q:
                low -= quarter
                high -= quarter
                code -= quarter
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            code = (code << 1) | _read_bit(payload, bit_length, pos)
            pos += 1

        out[t] = s
        if not use_static:
            ctx_rows[row, s] += 1

    return out, -1


@njit(cache=True)
def _fill_map(d, keys, rows):
    for i in range(keys.shape[0]):
        d[keys[i]] = rows[i]


_EMPTY_ROWS = np.zeros((1, 2), dtype=np.int64)
_SHARED_EMPTY_MAP = None


def _empty_map():
    return NumbaDict.empty(types.int64, types.int64)


def _plan_supported(plan, n, config: CoderConfig) -> bool:
    if config.register_bits + config.freq_bits > 62 or config.register_bits > 62:
        return False
    if isinstance(plan, AdaptivePlan):
        if plan.alphabet_size > 256 or plan.order > 3:
            return False
        heaviest = plan.delta_den * n + plan.alphabet_size * plan.delta_num
        return 0 < plan.delta_den <= 4 and plan.delta_num > 0 and heaviest < _MAX_WEIGHT_TOTAL
    if isinstance(plan, StaticRowsPlan):
        return (
            plan.alphabet_size <= 256
            and plan.order <= 3
            and plan.freq_bits == config.freq_bits
        )
    return False


def encode_with_plan(symbols: np.ndarray, plan, config: CoderConfig):
    global _SHARED_EMPTY_MAP
    n = symbols.shape[0]
    if not _plan_supported(plan, n, config):
        return None
    if _SHARED_EMPTY_MAP is None:
        _SHARED_EMPTY_MAP = _empty_map()
    if isinstance(plan, AdaptivePlan):
        buf, nbits, freqs = _encode_counts(
            symbols, plan.alphabet_size, plan.order, plan.delta_num, plan.delta_den,
            _EMPTY_ROWS, _SHARED_EMPTY_MAP, False, config.freq_bits, config.register_bits,
        )
    else:
        buf, nbits, freqs = _encode_counts(
            symbols, plan.alphabet_size, plan.order, 1, 1,
            plan.rows, plan.ctx_map, True, config.freq_bits, config.register_bits,
        )
    frame = ChunkFrame(symbol_count=n, bit_length=int(nbits), payload=buf.tobytes())
    return frame, freqs


def decode_with_plan(frame: ChunkFrame, plan, config: CoderConfig):
    global _SHARED_EMPTY_MAP
    if not _plan_supported(plan, frame.symbol_count, config):
        return None
    if _SHARED_EMPTY_MAP is None:
        _SHARED_EMPTY_MAP = _empty_map()
    payload = np.frombuffer(frame.payload, dtype=np.uint8)
    if isinstance(plan, AdaptivePlan):
        out, err = _decode_counts(
            payload, frame.bit_length, frame.symbol_count, plan.alphabet_size,
            plan.order, plan.delta_num, plan.delta_den,
            _EMPTY_ROWS, _SHARED_EMPTY_MAP, False, config.freq_bits, config.register_bits,
        )
    else:
        out, err = _decode_counts(
            payload, frame.bit_length, frame.symbol_count, plan.alphabet_size,
            plan.order, 1, 1,
            plan.rows, plan.ctx_map, True, config.freq_bits, config.register_bits,
        )
    if err >= 0:
        raise DecodeMismatchError(int(err))
    return out


def build_ctx_map(entries) -> object:
    """Typed dict for StaticRowsPlan: packed (length, bytes) context -> row index."""
    d = _empty_map()
    if entries:
        keys = np.asarray([k for k, _ in entries], dtype=np.int64)
        rows = np.asarray([r for _, r in entries], dtype=np.int64)
        _fill_map(d, keys, rows)
    return d


def pack_context(ctx) -> int:
    """Pack up to 3 byte-symbols (oldest first) plus their length into an int key."""
    key = len(ctx) << 24
    for j, s in enumerate(ctx):
        key |= int(s) << (8 * (len(ctx) - 1 - j))
    return key


def max_static_rows() -> int:
    return _MAX_STATIC_ROWS

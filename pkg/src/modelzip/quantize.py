"""Integer quantization of probability distributions for the entropy coder.

The coder consumes only ``QuantizedPmf`` tables: cumulative frequencies with
denominator ``2**F``.  Both the float path (:func:`quantize_pmf`) and the
integer-weight path (:func:`quantize_weights`, used by count-based models)
apply the same largest-remainder scheme so that encoder and decoder always
agree bit for bit.  The exact algorithm is documented in
``docs/formats.md`` and must not change without a format version bump.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuantizedPmf", "QuantizationError", "quantize_pmf", "quantize_weights"]

DEFAULT_FREQ_BITS = 16


class QuantizationError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizedPmf:
    """Cumulative integer frequency table over a symbol alphabet.

    ``cum`` has length ``alphabet_size + 1`` with ``cum[0] == 0`` and
    ``cum[-1] == total == 2**freq_bits``; strictly increasing, so every
    symbol has frequency >= 1.
    """

    cum: np.ndarray
    freq_bits: int

    def __post_init__(self):
        cum = np.asarray(self.cum, dtype=np.int64)
        object.__setattr__(self, "cum", cum)
        if cum.ndim != 1 or cum.shape[0] < 3:
            raise QuantizationError("cum must be a vector of length alphabet_size+1 >= 3")
        if cum[0] != 0:
            raise QuantizationError("cum[0] must be 0")
        if cum[-1] != (1 << self.freq_bits):
            raise QuantizationError("cum[-1] must equal 2**freq_bits")
        if not np.all(np.diff(cum) >= 1):
            raise QuantizationError("cumulative frequencies must be strictly increasing")

    @property
    def alphabet_size(self) -> int:
        return self.cum.shape[0] - 1

    @property
    def total(self) -> int:
        return 1 << self.freq_bits

    def frequencies(self) -> np.ndarray:
        return np.diff(self.cum)

    def log2_prob(self, symbol: int) -> float:
        f = int(self.cum[symbol + 1] - self.cum[symbol])
        return float(np.log2(f)) - self.freq_bits


def _distribute_and_repair(floors, rems, weights, total):
    """Largest-remainder unit distribution followed by zero repair.

    Tie-break on the remainder sort is (remainder desc, weight desc, index
    asc); the zero repair takes the deficit from the current largest
    frequency (ties toward the lowest index).  Fully deterministic.
    """
    n = floors.shape[0]
    f = floors.copy()
    r = int(total - floors.sum())
    if r < 0 or r > n:
        raise QuantizationError("internal rounding error in largest-remainder step")
    if r:
        order = np.lexsort((np.arange(n), -weights, -rems))
        f[order[:r]] += 1
    # every symbol must stay decodable: raise zeros to 1, take the surplus
    # back from whichever frequency is currently largest
    deficit = int(np.count_nonzero(f == 0))
    if deficit:
        f[f == 0] = 1
        for _ in range(deficit):
            j = int(np.argmax(f))
            if f[j] <= 1:
                raise QuantizationError("alphabet too large for frequency precision")
            f[j] -= 1
    return f


def quantize_pmf(probs, freq_bits: int = DEFAULT_FREQ_BITS) -> QuantizedPmf:
    """Quantize real probabilities to integer frequencies with denominator 2**F.

    Largest-remainder rounding of ``probs * 2**F``, then zero frequencies are
    raised to 1 with the deficit removed from the largest frequencies.
    Deterministic: identical input gives identical output on any platform.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise QuantizationError("need at least 2 probabilities")
    if not np.all(np.isfinite(p)):
        raise QuantizationError("non-finite probability")
    if np.any(p < 0):
        raise QuantizationError("negative probability")
    s = float(p.sum())
    if abs(s - 1.0) > 1e-6:
        raise QuantizationError(f"probabilities sum to {s!r}, not 1")
    total = 1 << freq_bits
    if total < p.shape[0]:
        raise QuantizationError(
            f"alphabet of {p.shape[0]} does not fit in 2**{freq_bits} frequency units"
        )
    t = (p / s) * total
    floors = np.floor(t).astype(np.int64)
    rems = t - floors
    f = _distribute_and_repair(floors, rems, t, total)
    cum = np.zeros(p.shape[0] + 1, dtype=np.int64)
    np.cumsum(f, out=cum[1:])
    return QuantizedPmf(cum=cum, freq_bits=freq_bits)


def quantize_weights(weights, freq_bits: int = DEFAULT_FREQ_BITS) -> QuantizedPmf:
    """Exact integer variant of :func:`quantize_pmf` for count-based models.

    ``weights`` are positive integers proportional to the model's
    probabilities.  All arithmetic is exact (Python integers), so encoder
    and decoder derive identical tables from identical counts.
    """
    w = list(map(int, weights))
    n = len(w)
    if n < 2:
        raise QuantizationError("need at least 2 weights")
    if any(x <= 0 for x in w):
        raise QuantizationError("weights must be positive")
    total = 1 << freq_bits
    if total < n:
        raise QuantizationError(f"alphabet of {n} does not fit in 2**{freq_bits} frequency units")
    big = sum(w)
    if max(w) * total < (1 << 62):
        wa = np.asarray(w, dtype=np.int64)
        scaled = wa * total
        floors = scaled // big
        rems = (scaled - floors * big) / big
        weights_f = wa.astype(np.float64)
    else:
        floors = np.empty(n, dtype=np.int64)
        rems = np.empty(n, dtype=np.float64)
        for i, x in enumerate(w):
            q, rem = divmod(x * total, big)
            floors[i] = q
            rems[i] = rem / big
        weights_f = np.asarray(w, dtype=np.float64)
    f = _distribute_and_repair(floors, rems, weights_f, total)
    cum = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(f, out=cum[1:])
    return QuantizedPmf(cum=cum, freq_bits=freq_bits)

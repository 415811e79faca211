"""Largest-remainder quantization of next-symbol weights, exact integers.

Implements the normative rule from the host project's docs/formats.md:
floor-scale to a 2**F total, hand the leftover units to the largest
remainders (ties: larger weight, then lower index), then raise zero
frequencies to one, paying from the current largest frequency.  Count
weights stay in exact integer arithmetic end to end, so independent
implementations produce identical tables.
"""

from __future__ import annotations

import math

__all__ = ["quantize_weights", "quantize_probs"]


def quantize_weights(weights: list[int], freq_bits: int) -> list[int]:
    n = len(weights)
    total = 1 << freq_bits
    if n < 2:
        raise ValueError("need at least 2 weights")
    if total < n:
        raise ValueError("alphabet does not fit the frequency precision")
    big = sum(weights)
    freqs = []
    order = []
    for index, w in enumerate(weights):
        if w <= 0:
            raise ValueError("weights must be positive")
        q, rem = divmod(w * total, big)
        freqs.append(q)
        order.append((-rem, -w, index))
    leftover = total - sum(freqs)
    order.sort()
    for _, _, index in order[:leftover]:
        freqs[index] += 1
    deficit = 0
    for index in range(n):
        if freqs[index] == 0:
            freqs[index] = 1
            deficit += 1
    while deficit:
        largest = max(range(n), key=lambda i: (freqs[i], -i))
        freqs[largest] -= 1
        deficit -= 1
    return freqs


def quantize_probs(probs: list[float], freq_bits: int) -> list[int]:
    """Float-weight variant (softmax rows): same rule on p * 2**F targets."""
    n = len(probs)
    total = 1 << freq_bits
    if n < 2:
        raise ValueError("need at least 2 probabilities")
    if total < n:
        raise ValueError("alphabet does not fit the frequency precision")
    s = math.fsum(probs)
    if not math.isfinite(s) or abs(s - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    freqs = []
    order = []
    for index, p in enumerate(probs):
        target = (p / s) * total
        q = math.floor(target)
        freqs.append(q)
        order.append((-(target - q), -target, index))
    leftover = total - sum(freqs)
    order.sort()
    for _, _, index in order[:leftover]:
        freqs[index] += 1
    deficit = 0
    for index in range(n):
        if freqs[index] == 0:
            freqs[index] = 1
            deficit += 1
    while deficit:
        largest = max(range(n), key=lambda i: (freqs[i], -i))
        freqs[largest] -= 1
        deficit -= 1
    return freqs

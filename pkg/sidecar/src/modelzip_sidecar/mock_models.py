"""Deterministic mock models, stdlib only.

These mirror the reference mock's arithmetic exactly (same formulas, same
operation order), so transcripts from the two implementations are
byte-identical on identical request streams.
"""

from __future__ import annotations

import math

from .quantize import quantize_weights

__all__ = ["UniformMock", "AdaptiveMock"]


class UniformMock:
    vocab_size = 256
    name = "mock-uniform"

    def score_ids(self, ids: list[int]) -> list[float]:
        return [-8.0] * len(ids)

    def pmf_rows(self, ids: list[int], freq_bits: int) -> list[list[int]]:
        row = quantize_weights([1] * 256, freq_bits)
        return [list(row) for _ in ids]


class AdaptiveMock:
    """Order-0 Laplace (add-one) byte model, counts reset per request."""

    vocab_size = 256
    name = "mock-adaptive0"

    def score_ids(self, ids: list[int]) -> list[float]:
        counts = [0] * 256
        seen = 0
        out = []
        for sym in ids:
            out.append(math.log2((float(counts[sym]) + 1.0) / (float(seen) + 256.0)))
            counts[sym] += 1
            seen += 1
        return out

    def pmf_rows(self, ids: list[int], freq_bits: int) -> list[list[int]]:
        counts = [0] * 256
        rows = []
        for sym in ids:
            rows.append(quantize_weights([c + 1 for c in counts], freq_bits))
            counts[sym] += 1
        return rows

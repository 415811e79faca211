"""Classical-compressor baseline: deflate code lengths and compression rates.

Raw deflate streams (no zlib/gzip container) are the canonical measure, so
no header or footer bytes need subtracting.  Level 9 throughout; recorded in
report metadata by callers.
"""

from __future__ import annotations

import zlib

__all__ = ["deflate_len", "deflate_len_bits", "deflate_rate", "DEFLATE_LEVEL"]

DEFLATE_LEVEL = 9


def deflate_len(data: bytes) -> int:
    """Length in bytes of the raw deflate stream for ``data``."""
    co = zlib.compressobj(level=DEFLATE_LEVEL, wbits=-zlib.MAX_WBITS)
    return len(co.compress(data) + co.flush())


def deflate_len_bits(data: bytes) -> int:
    """Deflate code length in bits, for use as a compressor-predictor l_c."""
    return 8 * deflate_len(data)


def deflate_rate(data: bytes) -> float:
    """Compressed size over raw size; container-free by construction."""
    if len(data) == 0:
        raise ValueError("rate is undefined for empty input")
    return deflate_len(data) / len(data)

"""Built-in verification: exact-rational coding oracle and protocol checks.

The oracle re-runs the interval arithmetic with exact fractions (no
registers, no renormalization, no carries) over the same quantized tables
the coder consumes, yielding the infinite-precision code length
ceil(-log2 P) + 1.  The finite coder must stay within a small additive
budget of that number on every input.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coder import CoderConfig, decode_chunk, encode_chunk
from .models import AdaptiveByteModel, UniformModel, train_static_ngram
from .synthdata import english_like_text

__all__ = [
    "rational_interval",
    "rational_code_length_bound",
    "oracle_equivalence_cases",
    "run_selftest",
]

ORACLE_SLACK_BITS = 8


def rational_interval(symbols, model, freq_bits: int = 16) -> tuple[Fraction, Fraction]:
    """Exact [low, low + width) after coding ``symbols`` with the model's tables."""
    low = Fraction(0)
    width = Fraction(1)
    total = 1 << freq_bits
    state = model.begin_chunk()
    for sym in symbols:
        cum = model.next_quantized(state, freq_bits).cum
        low += width * Fraction(int(cum[sym]), total)
        width *= Fraction(int(cum[sym + 1] - cum[sym]), total)
        model.advance(state, int(sym))
    return low, width


def rational_code_length_bound(symbols, model, freq_bits: int = 16) -> int:
    """ceil(-log2 P) + 1 for the exact sequence probability P, in whole bits."""
    _, width = rational_interval(symbols, model, freq_bits)
    num, den = width.numerator, width.denominator
    if den & (den - 1):
        raise AssertionError("interval width denominator must stay a power of two")
    k = den.bit_length() - 1
    # ceil(k - log2 num) for num in [1, 2^k]; exact for powers of two as well
    ceil_neg_log2 = k - num.bit_length() + 1
    return ceil_neg_log2 + 1


def _suite_models(rng):
    text = english_like_text(20000, seed=int(rng.integers(0, 2**31)))
    return [
        UniformModel(),
        AdaptiveByteModel(0, 1.0),
        AdaptiveByteModel(0, 0.5),
        AdaptiveByteModel(1, 1.0),
        AdaptiveByteModel(2, 1.0),
        train_static_ngram(text.encode("utf-8"), 2),
    ]


def oracle_equivalence_cases(n_cases: int = 100, max_len: int = 256, seed: int = 0):
    """Yield (description, coded bits, oracle bound) for randomized sequences."""
    rng = np.random.default_rng(seed)
    config = CoderConfig()
    models = _suite_models(rng)
    for case in range(n_cases):
        n = int(rng.integers(1, max_len + 1))
        if rng.integers(0, 2):
            symbols = rng.integers(0, 256, n)
        else:
            symbols = rng.integers(0, 8, n)  # skewed inputs stress pending bits
        model = models[case % len(models)]
        frame = encode_chunk(symbols, model, config)
        decoded = decode_chunk(frame, model, config)
        if not np.array_equal(decoded, symbols):
            raise AssertionError(f"case {case}: round trip failed")
        bound = rational_code_length_bound(symbols, model, config.freq_bits)
        yield f"case {case} ({model.model_id}, n={n})", frame.bit_length, bound


@dataclass
class SelftestResult:
    lines: list[str]
    ok: bool


def run_selftest(seed: int = 0, n_cases: int = 100) -> SelftestResult:
    lines = [f"selftest seed={seed}"]
    ok = True

    worst = -(10**9)
    failures = 0
    for label, bits, bound in oracle_equivalence_cases(n_cases=n_cases, seed=seed):
        excess = bits - bound
        worst = max(worst, excess)
        if excess > ORACLE_SLACK_BITS:
            failures += 1
            lines.append(f"FAIL {label}: coded {bits} bits, oracle bound {bound}")
    if failures:
        ok = False
        lines.append(f"[FAIL] rational oracle: {failures}/{n_cases} cases over budget")
    else:
        lines.append(
            f"[PASS] rational oracle: {n_cases} cases within +{ORACLE_SLACK_BITS} bits "
            f"(worst excess {worst})"
        )

    from .conformance import run_conformance

    for endpoint in ("mock:uniform", "mock:adaptive0"):
        report = run_conformance(endpoint)
        lines.extend(f"  {line}" for line in report.summary_lines())
        if report.passed:
            lines.append(f"[PASS] protocol conformance against {endpoint}")
        else:
            ok = False
            lines.append(f"[FAIL] protocol conformance against {endpoint}")

    return SelftestResult(lines=lines, ok=ok)

"""The model zoo: every probability source the engine can code against.

Covers the uniform floor, adaptive Laplace/KT estimators, frozen n-grams
with backoff, vocabulary restriction onto bytes, and turning a classical
compressor into a next-byte predictor.
"""

import numpy as np

from modelzip import (
    AdaptiveByteModel,
    ByteTokenMap,
    ModelContext,
    UniformModel,
    compressor_predictor,
    next_distribution,
    restrict_to_bytes,
    train_static_ngram,
)
from modelzip.baselines import deflate_len

print(__doc__)

# --- adaptive estimators -----------------------------------------------------
# Laplace (add-1): after seeing "AA", P(A) = (2+1)/(2+256)
out = next_distribution(AdaptiveByteModel(0, delta=1.0),
                        ModelContext((65, 65), 2))
print(f"Laplace P(A | 'AA') = {2 ** out.log2_probs[65]:.6f}  (= 3/258)")

# Krichevsky-Trofimov (add-1/2) on a binary alphabet: sequential probability
# of the string 010 is 1/2 * 1/4 * 1/2 = 1/16
kt = AdaptiveByteModel(0, delta=0.5, alphabet_size=2)
state, logp = kt.begin_chunk(), 0.0
for bit in (0, 1, 0):
    logp += kt.next_log2_of(state, bit)
    kt.advance(state, bit)
print(f"KT probability of 010: {2 ** logp:.6f}  (= 1/16)")

# --- static n-grams with backoff ----------------------------------------------
model = train_static_ngram(b"the cat sat on the mat, the cat sat still", 2)
state = model.begin_chunk()
for sym in b"the c":
    model.advance(state, sym)
probs = np.exp2(model.next_log2(state))
top = int(np.argmax(probs))
print(f"\norder-2 n-gram after 'the c': argmax is {chr(top)!r} "
      f"with P = {probs[top]:.3f}")
state = model.begin_chunk()
for sym in b"zq":  # context never trained: falls back toward order 0
    model.advance(state, sym)
print("unseen context backs off; distribution still sums to",
      round(float(np.exp2(model.next_log2(state)).sum()), 6))

# --- vocabulary restriction ---------------------------------------------------
# A model over a big vocabulary restricted onto its 256 byte tokens.
vocab = 1000
rng = np.random.default_rng(7)
full = next_distribution(UniformModel(vocab), ModelContext())
byte_map = ByteTokenMap(tuple(int(t) for t in rng.permutation(vocab)[:256]))
restricted = restrict_to_bytes(full, byte_map)
print(f"\nuniform over {vocab} restricted to bytes: every byte gets "
      f"{2 ** restricted.log2_probs[0]:.6f} (= 1/256)")

# --- a compressor as a predictor ----------------------------------------------
# P(next byte) is proportional to 2^(-marginal code length).  On an
# alternating pattern, deflate overwhelmingly expects the pattern to go on.
prefix = b"ab" * 31 + b"a"
out = compressor_predictor(prefix, deflate_len)
probs = np.exp2(out.log2_probs)
print(f"\ndeflate-as-predictor after 'abab...a': "
      f"P('b') = {probs[ord('b')]:.3f}, runner-up P = {np.sort(probs)[-2]:.5f}")

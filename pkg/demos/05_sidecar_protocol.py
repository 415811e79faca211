"""Talking to an external probability provider over the wire protocol.

Spawns the bundled mock sidecar, walks the handshake, tokenization, and
both eval modes, then codes a chunk losslessly using server-side quantized
tables, and finishes with the conformance suite.
"""

import numpy as np

from modelzip.bridge import BridgeCodecModel, EvalRequest, open_session
from modelzip.coder import CoderConfig, decode_chunk, encode_chunk
from modelzip.conformance import run_conformance

print(__doc__)

# --- handshake --------------------------------------------------------------
session = open_session("mock:adaptive0", capture=True)
info = session.info
print(f"connected to {info.model_name}: vocab {info.vocab_size}, "
      f"context limit {info.context_limit}, bos policy {info.bos_policy}")

# --- tokenization ------------------------------------------------------------
ids = session.tokenize("hello, sidecar")
print(f"tokenize('hello, sidecar') -> {ids[:6]}... ({len(ids)} ids)")
assert session.detokenize(ids) == "hello, sidecar"

# --- metrics mode --------------------------------------------------------------
response = session.evaluate_chunk(EvalRequest(ids=tuple(ids), mode="metrics"))
bits = -sum(response.log2_probs)
print(f"metrics eval: {len(response.log2_probs)} scored positions, "
      f"L = {bits:.2f} bits ({bits / len(ids):.2f} per token)")

# --- codec mode: the server quantizes, the client codes -------------------------
data = list(b"server-quantized tables drive the coder on both sides")
encoder = BridgeCodecModel(session, precision=16, chunk_ids=data)
frame = encode_chunk(np.asarray(data), encoder, CoderConfig())
decoded = decode_chunk(frame, BridgeCodecModel(session, precision=16), CoderConfig())
assert decoded.tolist() == data
print(f"codec eval: {len(data)} bytes -> {frame.bit_length} bits, "
      "decoded losslessly through incremental row requests")

print("\nfirst captured exchange:")
print("  ->", session.sent_lines[0])
print("  <-", session.received_lines[0][:100], "...")
session.close()

# --- conformance -----------------------------------------------------------------
print("\nconformance suite against mock:uniform:")
report = run_conformance("mock:uniform")
for line in report.summary_lines():
    print("  " + line)
print("all passed" if report.passed else "FAILURES above")

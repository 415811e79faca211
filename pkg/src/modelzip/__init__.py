"""modelzip: arithmetic-coding compression engine driven by pluggable
probability models, with an evaluation harness that measures model
generalization over time through compression metrics."""

from .archive import Archive, ArchiveError, decode_stream, encode_stream
from .coder import (
    ChunkFrame,
    CoderConfig,
    CoderError,
    DecodeMismatchError,
    TruncatedPayloadError,
    decode_chunk,
    encode_chunk,
)
from .models import (
    AdaptiveByteModel,
    ByteTokenMap,
    ModelContext,
    ModelOutput,
    StaticNgramModel,
    UniformModel,
    compressor_predictor,
    get_model,
    next_distribution,
    restrict_to_bytes,
    train_static_ngram,
)
from .quantize import QuantizedPmf, QuantizationError, quantize_pmf, quantize_weights

__version__ = "0.1.0"

import numpy as np
import pytest

from modelzip.coder import CoderConfig, decode_chunk, encode_chunk
from modelzip.models import AdaptiveByteModel, UniformModel, train_static_ngram
from modelzip.synthdata import build_fixture_corpus, english_like_text


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba fast paths once so individual tests time honestly."""
    cfg = CoderConfig()
    symbols = np.arange(64, dtype=np.int64) % 7
    for model in (UniformModel(), AdaptiveByteModel(1)):
        frame = encode_chunk(symbols, model, cfg)
        decode_chunk(frame, model, cfg)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "wikisample"
    build_fixture_corpus(root)
    return root


@pytest.fixture(scope="session")
def trained_ngram2():
    return train_static_ngram(english_like_text(30000, seed=11).encode("utf-8"), 2)


def builtin_models():
    """The model set exercised by round-trip suites."""
    return [
        UniformModel(),
        AdaptiveByteModel(0, 1.0),
        AdaptiveByteModel(0, 0.5),
        AdaptiveByteModel(1, 1.0),
        AdaptiveByteModel(2, 1.0),
        train_static_ngram(english_like_text(20000, seed=3).encode("utf-8"), 2),
    ]

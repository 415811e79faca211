import pytest

from modelzip.baselines import deflate_len, deflate_len_bits, deflate_rate
from modelzip.synthdata import english_like_text, random_bytes


class TestDeflateRate:
    def test_run_dominated_input(self):
        assert deflate_rate(b"A" * 10240) < 0.02

    def test_random_bytes_incompressible(self):
        rate = deflate_rate(random_bytes(64 * 1024, seed=17))
        assert 1.0 <= rate <= 1.01

    def test_english_like_text_sits_near_published_value(self):
        data = english_like_text(300_000, seed=23).encode("utf-8")
        assert 0.378 - 0.05 <= deflate_rate(data) <= 0.378 + 0.05

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            deflate_rate(b"")


class TestDeflateLen:
    def test_deterministic(self):
        data = english_like_text(10_000, seed=1).encode("utf-8")
        assert deflate_len(data) == deflate_len(data)

    def test_bits_is_eight_times_bytes(self):
        data = b"some sample"
        assert deflate_len_bits(data) == 8 * deflate_len(data)

    def test_subadditive_with_framing_slack(self):
        parts = [
            english_like_text(20_000, seed=s).encode("utf-8") for s in (3, 4, 5)
        ]
        for a in parts:
            for b in parts:
                assert deflate_len(a + b) <= deflate_len(a) + deflate_len(b) + 64

    def test_empty_stream_is_small_constant(self):
        assert deflate_len(b"") <= 8

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelzip.baselines import deflate_len
from modelzip.models import (
    AdaptiveByteModel,
    ByteTokenMap,
    ModelContext,
    ModelError,
    ModelOutput,
    StaticNgramModel,
    UniformModel,
    compressor_predictor,
    get_model,
    next_distribution,
    restrict_to_bytes,
    train_static_ngram,
)


class TestUniformModel:
    def test_log_probs_are_minus_eight(self):
        out = next_distribution(UniformModel(256), ModelContext())
        assert np.all(out.log2_probs == -8.0)

    def test_any_context_same_distribution(self):
        model = UniformModel(256)
        ctx = ModelContext(symbols_so_far=(1, 2, 3), position=3)
        out = next_distribution(model, ctx)
        assert np.all(out.log2_probs == -8.0)


class TestAdaptiveByteModel:
    def test_laplace_update_after_two_repeats(self):
        model = AdaptiveByteModel(order=0, delta=1.0)
        ctx = ModelContext(symbols_so_far=(65, 65), position=2)
        out = next_distribution(model, ctx)
        assert out.log2_probs[65] == pytest.approx(math.log2(3 / 258), abs=1e-12)

    def test_kt_estimator_binary_sequence(self):
        # 0,1,0 under add-1/2 on a binary alphabet: 1/2 * 1/4 * 1/2 = 1/16
        model = AdaptiveByteModel(order=0, delta=0.5, alphabet_size=2)
        state = model.begin_chunk()
        total = 0.0
        for sym in (0, 1, 0):
            total += model.next_log2_of(state, sym)
            model.advance(state, sym)
        assert 2.0 ** total == pytest.approx(1 / 16, rel=1e-12)

    def test_state_resets_per_chunk(self):
        model = AdaptiveByteModel(order=0)
        state = model.begin_chunk()
        for _ in range(10):
            model.advance(state, 7)
        fresh = model.begin_chunk()
        assert model.next_log2_of(fresh, 7) == pytest.approx(math.log2(1 / 256))

    def test_order_changes_conditioning(self):
        model = AdaptiveByteModel(order=1)
        state = model.begin_chunk()
        for sym in (1, 2, 1, 2, 1):
            model.advance(state, sym)
        # context is now (1); symbol 2 followed 1 twice
        assert model.next_log2_of(state, 2) == pytest.approx(math.log2(3 / 258))

    def test_rejects_bad_delta(self):
        with pytest.raises(ModelError):
            AdaptiveByteModel(order=0, delta=0.0)


class TestStaticNgram:
    def test_order0_hand_count(self):
        model = train_static_ngram(b"AAAB", 0)
        state = model.begin_chunk()
        assert model.next_log2_of(state, ord("A")) == pytest.approx(
            math.log2(4 / 260), abs=1e-12
        )

    def test_order1_hand_count(self):
        model = train_static_ngram(b"ABAB", 1)
        state = model.begin_chunk()
        model.advance(state, ord("A"))
        assert model.next_log2_of(state, ord("B")) == pytest.approx(
            math.log2(3 / 258), abs=1e-12
        )

    def test_unseen_context_backs_off_to_order0(self):
        model = train_static_ngram(b"ABAB", 1)
        state = model.begin_chunk()
        model.advance(state, ord("Z"))  # never seen as context in training
        zero = train_static_ngram(b"ABAB", 0)
        zero_state = zero.begin_chunk()
        for sym in (ord("A"), ord("B"), ord("Z")):
            assert model.next_log2_of(state, sym) == pytest.approx(
                zero.next_log2_of(zero_state, sym), abs=1e-12
            )

    def test_backoff_chain_reaches_order0(self):
        model = train_static_ngram(b"the cat sat on the mat", 3)
        state = model.begin_chunk()
        for sym in b"zqx":  # context absent at every positive order
            model.advance(state, sym)
        probs = model.next_log2(state)
        assert np.isfinite(probs).all()

    def test_rejects_empty_training_data(self):
        with pytest.raises(ModelError):
            train_static_ngram(b"", 1)

    def test_rejects_order_out_of_range(self):
        with pytest.raises(ModelError):
            train_static_ngram(b"abc", 4)

    def test_save_load_round_trip(self, tmp_path):
        model = train_static_ngram(b"banana bandana", 2, delta=0.5)
        path = tmp_path / "model.mzng"
        model.save(path)
        twin = StaticNgramModel.load(path)
        state_a, state_b = model.begin_chunk(), twin.begin_chunk()
        for sym in b"ban":
            assert model.next_log2_of(state_a, sym) == twin.next_log2_of(state_b, sym)
            model.advance(state_a, sym)
            twin.advance(state_b, sym)

    def test_load_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.mzng"
        path.write_bytes(b"JUNKxxxx")
        with pytest.raises(ModelError, match="not a static n-gram dump"):
            StaticNgramModel.load(path)


class TestNextDistributionOp:
    def test_codec_mode_returns_valid_pmf(self):
        out = next_distribution(AdaptiveByteModel(0), ModelContext(), mode="codec")
        assert out.quantized is not None
        assert out.quantized.total == 1 << 16

    def test_rejects_unknown_mode(self):
        with pytest.raises(ModelError):
            next_distribution(UniformModel(), ModelContext(), mode="sample")

    def test_context_position_must_match(self):
        with pytest.raises(ModelError):
            ModelContext(symbols_so_far=(1, 2), position=3)


class TestModelOutput:
    def test_rejects_unnormalized(self):
        bad = np.log2(np.full(4, 0.3))
        with pytest.raises(ModelError):
            ModelOutput(log2_probs=bad)

    def test_accepts_consistent_pair(self):
        probs = np.array([0.75, 0.25])
        from modelzip.quantize import quantize_pmf

        ModelOutput(log2_probs=np.log2(probs), quantized=quantize_pmf(probs, 16))


class TestByteTokenMap:
    def test_requires_all_bytes(self):
        with pytest.raises(ModelError):
            ByteTokenMap(tuple(range(255)))

    def test_requires_injective(self):
        with pytest.raises(ModelError):
            ByteTokenMap(tuple([0] * 256))

    def test_inverse(self):
        table = tuple(range(1000, 1256))
        assert ByteTokenMap(table).token_to_byte[1042] == 42


class TestRestrictToBytes:
    def test_uniform_stays_uniform(self):
        vocab = 1000
        full = ModelOutput(log2_probs=np.full(vocab, -math.log2(vocab)))
        mapped = restrict_to_bytes(full, ByteTokenMap(tuple(range(256))))
        assert np.allclose(mapped.log2_probs, -8.0, atol=1e-12)

    def test_mass_already_on_bytes_is_relabeling(self):
        vocab = 512
        probs = np.zeros(vocab)
        rng = np.random.default_rng(0)
        byte_tokens = rng.permutation(vocab)[:256]
        probs[byte_tokens] = rng.dirichlet(np.ones(256))
        with np.errstate(divide="ignore"):
            lp = np.log2(probs)
        full = ModelOutput(log2_probs=np.maximum(lp, -1074.0))
        mapped = restrict_to_bytes(full, ByteTokenMap(tuple(int(t) for t in byte_tokens)))
        assert np.allclose(np.exp2(mapped.log2_probs), probs[byte_tokens], atol=1e-12)

    def test_matches_select_then_divide_oracle(self):
        rng = np.random.default_rng(1)
        vocab = 1000
        probs = rng.dirichlet(np.ones(vocab))
        byte_tokens = tuple(int(t) for t in rng.permutation(vocab)[:256])
        full = ModelOutput(log2_probs=np.log2(probs))
        mapped = restrict_to_bytes(full, ByteTokenMap(byte_tokens))
        selected = probs[list(byte_tokens)]
        oracle = selected / selected.sum()
        assert np.allclose(np.exp2(mapped.log2_probs), oracle, atol=1e-12)

    def test_rejects_map_outside_vocab(self):
        full = ModelOutput(log2_probs=np.full(100, -math.log2(100)))
        with pytest.raises(ModelError):
            restrict_to_bytes(full, ByteTokenMap(tuple(range(256))))


class TestCompressorPredictor:
    def test_constant_length_gives_uniform(self):
        out = compressor_predictor(b"anything", lambda data: 42)
        assert np.allclose(np.exp2(out.log2_probs), 1 / 256, atol=1e-12)

    def test_empty_prefix_normalizes(self):
        out = compressor_predictor(b"", deflate_len)
        assert abs(np.exp2(out.log2_probs).sum() - 1.0) <= 1e-12

    def test_alternating_pattern_predicts_continuation(self):
        # all-256-extension oracle: after "...ab ab a", deflate extends the
        # match most cheaply with 'b'
        prefix = b"ab" * 31 + b"a"
        out = compressor_predictor(prefix, deflate_len)
        assert int(np.argmax(out.log2_probs)) == ord("b")

    def test_ideal_compressor_recovers_dyadic_source(self):
        # l_c = exact -log2 P of an iid dyadic source, in whole bits
        source = {ord("a"): Fraction(1, 2), ord("b"): Fraction(1, 4),
                  ord("c"): Fraction(1, 8), ord("d"): Fraction(1, 8)}

        def ideal_len(data: bytes) -> float:
            bits = 0
            for b in data:
                if b not in source:
                    return 10_000 + len(data)
                bits += -math.log2(source[b])
            return bits

        out = compressor_predictor(b"abacad", ideal_len)
        probs = np.exp2(out.log2_probs)
        for sym, p in source.items():
            assert probs[sym] == pytest.approx(float(p), rel=1e-9)

    def test_compress_len_failure_is_reported(self):
        def broken(data: bytes) -> float:
            return float("nan") if data.endswith(b"\x07") else float(len(data))

        with pytest.raises(ModelError, match="extension byte 7"):
            compressor_predictor(b"xy", broken)


class TestRegistry:
    def test_known_ids(self):
        assert get_model("uniform").alphabet_size == 256
        assert get_model("adaptive2").order == 2
        assert get_model("adaptive0:0.5").delta == 0.5

    def test_ngram_path(self, tmp_path):
        model = train_static_ngram(b"some training bytes", 1)
        path = tmp_path / "m.mzng"
        model.save(path)
        loaded = get_model(f"ngram:{path}")
        assert loaded.order == 1

    def test_unknown_id(self):
        with pytest.raises(ModelError):
            get_model("gpt5")


class TestOnlineConsistency:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_distribution_depends_only_on_prefix(self, seed):
        rng = np.random.default_rng(seed)
        prefix = tuple(int(x) for x in rng.integers(0, 256, 20))
        model = AdaptiveByteModel(2)
        a = next_distribution(model, ModelContext(prefix, len(prefix)))
        b = next_distribution(model, ModelContext(prefix, len(prefix)))
        assert np.array_equal(a.log2_probs, b.log2_probs)

"""Encoder contracts: determinism, permutation invariance, the shuffle
wrapper, and the embedding table binary format."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capprobe.encoders import (
    BowEncoder,
    EmbeddingLookupError,
    EmbeddingTable,
    FileBackedEncoder,
    PositionalBowEncoder,
    ShuffleWrapper,
    Tokenizer,
)
from capprobe.grammar import bundled_vocabulary_path, load_vocabulary


class TestTokenizer:
    def test_round_trip_identity(self):
        tok = Tokenizer(["cat", "dog", "orange"])
        words = ["orange", "cat", "dog"]
        assert tok.decode(tok.encode(words)) == words

    def test_specials(self):
        tok = Tokenizer(["x"])
        assert tok.encode(["never-seen"]) == [tok.unk_id]
        assert tok.decode([tok.bos_id, tok.index["x"], tok.eos_id]) == ["x"]

    def test_from_vocabulary_covers_surface(self):
        vocab = load_vocabulary(bundled_vocabulary_path())
        tok = Tokenizer.from_vocabulary(vocab)
        for w in ("a", "an", "and", "that", "is", "not", "cats", "to", "left"):
            assert w in tok.index, w

    def test_from_word_list_round_trip(self):
        tok = Tokenizer(["cat", "dog"])
        tok2 = Tokenizer.from_word_list(tok.words)
        assert tok2.words == tok.words and tok2.eos_id == tok.eos_id


class TestBowEncoder:
    def test_permutation_invariance_bitwise(self):
        enc = BowEncoder(dim=32, seed=0)
        a = enc.encode("a cat chasing a dog".split())
        b = enc.encode("a dog chasing a cat".split())
        assert np.array_equal(a, b)

    @settings(max_examples=25, deadline=None)
    @given(st.permutations(["a", "cat", "chasing", "a", "dog", "orange"]))
    def test_any_permutation(self, perm):
        enc = BowEncoder(dim=16, seed=1)
        base = enc.encode(["a", "cat", "chasing", "a", "dog", "orange"])
        assert np.array_equal(enc.encode(list(perm)), base)

    def test_distinct_words_distinct_vectors(self):
        enc = BowEncoder(dim=32, seed=0)
        assert not np.array_equal(enc.encode(["a", "cat"]), enc.encode(["a", "dog"]))

    def test_empty_is_zero(self):
        enc = BowEncoder(dim=16, seed=0)
        assert np.array_equal(enc.encode([]), np.zeros(16, np.float32))

    def test_deterministic_across_instances(self):
        a = BowEncoder(dim=32, seed=5).encode(["a", "cat"])
        b = BowEncoder(dim=32, seed=5).encode(["a", "cat"])
        assert np.array_equal(a, b)

    def test_seed_changes_vectors(self):
        a = BowEncoder(dim=32, seed=0).encode(["cat"])
        b = BowEncoder(dim=32, seed=1).encode(["cat"])
        assert not np.array_equal(a, b)

    def test_min_dim(self):
        with pytest.raises(ValueError):
            BowEncoder(dim=4)

    def test_positional_variant_is_order_aware(self):
        enc = PositionalBowEncoder(dim=32, seed=0)
        a = enc.encode("a cat chasing a dog".split())
        b = enc.encode("a dog chasing a cat".split())
        assert not np.array_equal(a, b)


class TestShuffleWrapper:
    def test_is_permutation(self):
        inner = BowEncoder(dim=32, seed=0)
        wrapped = ShuffleWrapper(inner, seed=7)
        x = ["a", "cat", "yawning"]
        assert sorted(wrapped.encode(x).tolist()) == sorted(inner.encode(x).tolist())

    def test_preserves_norm(self):
        inner = BowEncoder(dim=64, seed=0)
        wrapped = ShuffleWrapper(inner, seed=7)
        x = ["an", "orange", "cat"]
        assert np.linalg.norm(wrapped.encode(x)) == pytest.approx(
            np.linalg.norm(inner.encode(x)), abs=0.0
        )

    def test_deterministic(self):
        inner = BowEncoder(dim=32, seed=0)
        w = ShuffleWrapper(inner, seed=7)
        assert np.array_equal(w.encode(["cat"]), w.encode(["cat"]))
        w2 = ShuffleWrapper(BowEncoder(dim=32, seed=0), seed=7)
        assert np.array_equal(w.encode(["cat"]), w2.encode(["cat"]))

    def test_inverse_permutation_recovers_inner(self):
        inner = BowEncoder(dim=32, seed=0)
        w = ShuffleWrapper(inner, seed=7)
        inverse = np.argsort(w.permutation)
        x = ["a", "dog"]
        assert np.array_equal(w.encode(x)[inverse], inner.encode(x))

    def test_nontrivial(self):
        w = ShuffleWrapper(BowEncoder(dim=64, seed=0), seed=7)
        assert not np.array_equal(w.permutation, np.arange(64))


class TestEmbeddingTable:
    def test_binary_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = rng.standard_normal((5, 12)).astype(np.float32)
        table = EmbeddingTable([f"p{i}" for i in range(5)], matrix, "test-enc")
        path = tmp_path / "t.emb"
        table.save(path)
        loaded = EmbeddingTable.load(path)
        assert loaded.ids == table.ids
        assert loaded.encoder_name == "test-enc"
        assert np.array_equal(loaded.matrix, matrix)
        # resave is byte-identical
        loaded.save(tmp_path / "t2.emb")
        assert (tmp_path / "t.emb").read_bytes() == (tmp_path / "t2.emb").read_bytes()

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddingTable(["a", "a"], np.zeros((2, 4), np.float32), "x")

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            EmbeddingTable(["a"], np.zeros((2, 4), np.float32), "x")

    def test_dim_reported_from_header(self, tmp_path):
        table = EmbeddingTable(["a"], np.zeros((1, 512), np.float32), "clip-vit-b32")
        path = tmp_path / "c.emb"
        table.save(path)
        assert EmbeddingTable.load(path).dim == 512

    def test_magic_checked(self, tmp_path):
        p = tmp_path / "bad.emb"
        p.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            EmbeddingTable.load(p)


class TestFileBackedEncoder:
    def test_lookup(self):
        matrix = np.arange(8, dtype=np.float32).reshape(2, 4)
        enc = FileBackedEncoder(EmbeddingTable(["p1", "p2"], matrix, "m"))
        assert np.array_equal(enc.encode([], prompt_id="p1"), matrix[0])
        assert enc.dim == 4

    def test_missing_id_names_it(self):
        enc = FileBackedEncoder(
            EmbeddingTable(["p1"], np.zeros((1, 4), np.float32), "m")
        )
        with pytest.raises(EmbeddingLookupError, match="p9"):
            enc.encode([], prompt_id="p9")
        with pytest.raises(EmbeddingLookupError):
            enc.encode(["some", "tokens"])  # no id given

    def test_encode_batch(self):
        matrix = np.arange(8, dtype=np.float32).reshape(2, 4)
        enc = FileBackedEncoder(EmbeddingTable(["p1", "p2"], matrix, "m"))
        out = enc.encode_batch([("p2", "whatever"), ("p1", "text")])
        assert np.array_equal(out.matrix, matrix[[1, 0]])


class TestEncoderContracts:
    @pytest.mark.parametrize("enc", [
        BowEncoder(dim=32, seed=0),
        PositionalBowEncoder(dim=32, seed=0),
        ShuffleWrapper(BowEncoder(dim=32, seed=0), seed=1),
    ], ids=lambda e: e.name)
    def test_dim_finite_deterministic(self, enc):
        tokens = "an orange cat chasing a dog".split()
        out = enc.encode(tokens)
        assert out.shape == (enc.dim,)
        assert np.all(np.isfinite(out))
        assert np.array_equal(out, enc.encode(tokens))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acadsearch.corpus import make_query
from acadsearch.dense_encoder import (DocEmbeddingStore, HashedBowEncoder,
                                      dense_score, embed_corpus, encode_text,
                                      load_embedding_matrix,
                                      load_precomputed_embeddings,
                                      save_embedding_matrix, train_encoder,
                                      triplet_loss, triplet_loss_grads)
from acadsearch.errors import ConfigError, DataFormatError
from oracles import central_difference, relative_error

finite_vec = st.lists(st.floats(-5, 5), min_size=6, max_size=6).map(np.array)


@pytest.fixture
def encoder():
    return HashedBowEncoder(dim=16, buckets=512, seed=3)


def test_encode_single_token_is_normalized_bucket_row(encoder):
    vec = encode_text(encoder, "hello")
    row = encoder.table[encoder.bucket("hello")]
    assert np.allclose(vec, row / np.linalg.norm(row), atol=1e-12)
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)


def test_encode_empty_is_zero_flag(encoder):
    vec = encode_text(encoder, "")
    assert not vec.any()


def test_encode_order_invariant(encoder):
    assert np.array_equal(encode_text(encoder, "a b"), encode_text(encoder, "b a"))


def test_triplet_loss_examples():
    q = np.array([0.0, 0.0])
    d_pos = np.array([0.1, 0.0])
    far = np.array([10.0, 0.0])
    # margin satisfied for every negative
    assert triplet_loss(q, d_pos, np.array([far]), margin=1.0) == 0.0
    # q = d+ = d-  ->  exactly the margin
    assert triplet_loss(q, q, np.array([q]), margin=1.0) == pytest.approx(1.0)


def test_triplet_loss_matches_direct_formula():
    rng = np.random.default_rng(5)
    for _ in range(20):
        q, dp = rng.normal(size=8), rng.normal(size=8)
        negs = rng.normal(size=(4, 8))
        expected = 0.0
        for neg in negs:
            expected += max(np.linalg.norm(q - dp) - np.linalg.norm(q - neg) + 1.0, 0.0)
        assert triplet_loss(q, dp, negs, 1.0) == pytest.approx(expected, abs=1e-12)


def test_triplet_loss_dimension_mismatch():
    with pytest.raises(ValueError):
        triplet_loss(np.zeros(3), np.zeros(4), np.zeros((1, 3)), 1.0)


def test_triplet_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 30:
        q, dp = rng.normal(size=6), rng.normal(size=6)
        negs = rng.normal(size=(3, 6))
        loss, gq, gp, gn = triplet_loss_grads(q, dp, negs, 1.0)
        hinges = (np.linalg.norm(q - dp) - np.linalg.norm(q[None] - negs, axis=1)
                  + 1.0)
        if np.any(np.abs(hinges) < 1e-3):
            continue
        checked += 1
        fn = lambda qq, dd, nn: triplet_loss(qq, dd, nn, 1.0)
        assert relative_error(central_difference(fn, [q, dp, negs], 0), gq) < 1e-4
        assert relative_error(central_difference(fn, [q, dp, negs], 1), gp) < 1e-4
        num_n = central_difference(fn, [q, dp, negs], 2)
        assert relative_error(num_n, gn) < 1e-4


@given(finite_vec, finite_vec, finite_vec)
@settings(max_examples=50)
def test_triplet_loss_nonnegative(q, dp, dn):
    assert triplet_loss(q, dp, np.array([dn]), 1.0) >= 0.0


@given(finite_vec, finite_vec, finite_vec, finite_vec)
@settings(max_examples=50)
def test_triplet_loss_translation_invariant(q, dp, dn, shift):
    a = triplet_loss(q, dp, np.array([dn]), 1.0)
    b = triplet_loss(q + shift, dp + shift, np.array([dn + shift]), 1.0)
    assert a == pytest.approx(b, abs=1e-9)


def test_dense_score_examples():
    v = np.array([1.0, 0.0])
    w = np.array([0.0, 1.0])
    assert dense_score(v, v) == pytest.approx(1.0)
    assert dense_score(v, w) == pytest.approx(0.0)
    rng = np.random.default_rng(0)
    a = rng.normal(size=32)
    a /= np.linalg.norm(a)
    b = rng.normal(size=32)
    b /= np.linalg.norm(b)
    assert dense_score(a, b) == pytest.approx(float(sum(x * y for x, y in zip(a, b))),
                                              abs=1e-12)
    with pytest.raises(ValueError):
        dense_score(np.zeros(3), np.zeros(4))


def _pairs_and_texts(corpus, n=400):
    texts = [d.text() for d in corpus.docs]
    pairs = []
    for doc in corpus.docs[:n]:
        q = make_query(doc.title)
        if q and doc.references:
            pairs.append((q, corpus.ordinal(doc.references[0])))
    return pairs, texts


def test_train_encoder_zero_epochs_is_identity(encoder, small_synth):
    _, corpus, _ = small_synth
    pairs, texts = _pairs_and_texts(corpus, 50)
    before = encoder.table.copy()
    train_encoder(encoder, pairs, texts, epochs=0)
    assert np.array_equal(encoder.table, before)


def test_train_encoder_batch_size_validation(encoder):
    with pytest.raises(ConfigError):
        train_encoder(encoder, [("q", 0)], ["text"], epochs=1, batch_size=1)


def test_train_encoder_loss_decreases(small_synth):
    _, corpus, _ = small_synth
    pairs, texts = _pairs_and_texts(corpus)
    enc = HashedBowEncoder(dim=24, buckets=2048, seed=2)
    losses = train_encoder(enc, pairs, texts, epochs=3, batch_size=64, seed=9)
    assert losses[-1] < losses[0]


def test_train_encoder_deterministic(small_synth):
    _, corpus, _ = small_synth
    pairs, texts = _pairs_and_texts(corpus, 150)
    tables = []
    for _ in range(2):
        enc = HashedBowEncoder(dim=16, buckets=1024, seed=4)
        train_encoder(enc, pairs, texts, epochs=2, batch_size=32, seed=11)
        tables.append(enc.table.copy())
    assert np.array_equal(tables[0], tables[1])


def test_embed_corpus_matches_encode_text(encoder, small_synth):
    _, corpus, _ = small_synth
    docs = corpus.docs[:40]
    store = embed_corpus(encoder, docs)
    assert store.count == 40
    for i, doc in enumerate(docs):
        assert np.allclose(store.row(i), encode_text(encoder, doc.text()),
                           atol=1e-12)
    norms = np.linalg.norm(store.vectors[~store.empty_mask], axis=1)
    assert np.all(np.abs(norms - 1.0) < 1e-6)
    again = embed_corpus(encoder, docs)
    assert np.array_equal(store.vectors, again.vectors)


def test_embedding_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.normal(size=(7, 5))
    path = tmp_path / "m.bin"
    save_embedding_matrix(m, path)
    loaded = load_embedding_matrix(path)
    # one f32 quantization, then lossless
    path2 = tmp_path / "m2.bin"
    save_embedding_matrix(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()
    assert np.array_equal(loaded, load_embedding_matrix(path2))


def test_embedding_load_validation(tmp_path):
    m = np.eye(4, 3)
    path = tmp_path / "m.bin"
    save_embedding_matrix(m, path)
    with pytest.raises(DataFormatError, match="expected 9 rows, found 4"):
        load_embedding_matrix(path, expect_count=9)
    with pytest.raises(DataFormatError, match="dimension"):
        load_embedding_matrix(path, expect_dim=8)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + b"\x00" * 12)
    with pytest.raises(DataFormatError, match="magic"):
        load_embedding_matrix(bad)


def test_precomputed_store_renormalizes_and_warns(tmp_path, caplog):
    rows = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    path = tmp_path / "emb.bin"
    save_embedding_matrix(rows, path)
    with caplog.at_level("WARNING"):
        store = load_precomputed_embeddings(path)
    assert store.renormalized == 1
    assert "1 rows" in caplog.text
    assert np.allclose(store.row(0), [1.0, 0.0])
    assert store.empty_mask.tolist() == [False, False, True]


def test_store_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    store = DocEmbeddingStore(rng.normal(size=(6, 4)))
    path = tmp_path / "s.bin"
    store.save(path)
    loaded = load_precomputed_embeddings(path, expect_count=6, expect_dim=4)
    path2 = tmp_path / "s2.bin"
    loaded.save(path2)
    assert path.read_bytes() == path2.read_bytes()

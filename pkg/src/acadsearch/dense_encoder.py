"""Pluggable text embeddings and the triplet-margin-loss trainer.

The built-in encoder is a trainable hashed bag-of-words model: tokens hash
(crc32) into H buckets of a learned H x d table; a text is the L2-normalized
mean of its token bucket rows. It is a deliberately lightweight stand-in for
a transformer bi-encoder; precomputed embeddings from any external model can
be dropped in through the shared binary format.

Training minimizes, per (query, positive) pair,

    sum over negatives of max(||q - d+|| - ||q - d-|| + margin, 0)

with negatives taken from the other positives in the same batch, optimized
by AdamW. Runs are bit-reproducible for a fixed seed at any thread count:
with threads > 1 the encode work is chunked across a pool and merged in a
fixed order.
"""
from __future__ import annotations

import logging
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .lexical_index import tokenize
from .optim import AdamW

log = logging.getLogger(__name__)

_MAGIC = b"EMBD"
_FORMAT_VERSION = 1


# --- shared embedding binary format (also used for KG entity matrices) -----

def save_embedding_matrix(matrix: np.ndarray, path: str | Path) -> None:
    """magic | u32 version | u32 count | u32 dim | count*dim little-endian f32."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _FORMAT_VERSION, matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.astype("<f4").tobytes(order="C"))


def load_embedding_matrix(path: str | Path, expect_count: int | None = None,
                          expect_dim: int | None = None) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _MAGIC:
        raise DataFormatError(f"{path}: not an embedding file (bad magic)")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != _FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported embedding format version {version}")
    if expect_count is not None and count != expect_count:
        raise DataFormatError(f"{path}: expected {expect_count} rows, found {count}")
    if expect_dim is not None and dim != expect_dim:
        raise DataFormatError(f"{path}: expected dimension {expect_dim}, found {dim}")
    need = 16 + 4 * count * dim
    if len(data) < need:
        raise DataFormatError(f"{path}: truncated embedding file")
    flat = np.frombuffer(data, dtype="<f4", count=count * dim, offset=16)
    return flat.astype(np.float64).reshape(count, dim)


class DocEmbeddingStore:
    """Document vectors aligned with index ordinals; rows unit-length or zero."""

    def __init__(self, vectors: np.ndarray, renormalized: int = 0):
        vectors = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(vectors, axis=1)
        self.empty_mask = norms < 1e-12
        safe = np.where(self.empty_mask, 1.0, norms)
        self.vectors = vectors / safe[:, None]
        self.vectors[self.empty_mask] = 0.0
        self.renormalized = renormalized

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, ordinal: int) -> np.ndarray:
        return self.vectors[ordinal]

    def save(self, path: str | Path) -> None:
        save_embedding_matrix(self.vectors, path)


def load_precomputed_embeddings(path: str | Path, expect_count: int | None = None,
                                expect_dim: int | None = None) -> DocEmbeddingStore:
    """Load a store, re-normalizing rows and warning when any deviates > 1e-3."""
    matrix = load_embedding_matrix(path, expect_count, expect_dim)
    norms = np.linalg.norm(matrix, axis=1)
    nonempty = norms >= 1e-12
    off = int(np.sum(nonempty & (np.abs(norms - 1.0) > 1e-3)))
    if off:
        log.warning("%s: re-normalized %d rows whose norm deviated by more than 1e-3",
                    path, off)
    return DocEmbeddingStore(matrix, renormalized=off)


# --- the trainable encoder --------------------------------------------------

class HashedBowEncoder:
    """Learned bucket table; texts embed as normalized means of token rows."""

    def __init__(self, dim: int = 64, buckets: int = 1 << 16, seed: int = 0):
        if buckets < 1:
            raise ConfigError(f"buckets must be >= 1, got {buckets}")
        self.dim = dim
        self.buckets = buckets
        rng = np.random.default_rng(seed)
        # float32 throughout: the on-disk format is f32 anyway, and the
        # optimizer runs several times faster on half the memory traffic
        self.table = rng.normal(0.0, 1.0 / np.sqrt(dim),
                                size=(buckets, dim)).astype(np.float32)
        self._bucket_cache: dict[str, int] = {}

    def bucket(self, token: str) -> int:
        b = self._bucket_cache.get(token)
        if b is None:
            b = zlib.crc32(token.encode("utf-8")) % self.buckets
            self._bucket_cache[token] = b
        return b

    def bucket_ids(self, text: str) -> np.ndarray:
        return np.asarray([self.bucket(t) for t in tokenize(text)], dtype=np.int64)

    def encode_ids(self, ids: np.ndarray) -> np.ndarray:
        if len(ids) == 0:
            return np.zeros(self.dim)
        vec = self.table[ids].astype(np.float64).mean(axis=0)
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            return np.zeros(self.dim)
        return vec / norm

    def encode(self, text: str) -> np.ndarray:
        return self.encode_ids(self.bucket_ids(text))

    def copy(self) -> "HashedBowEncoder":
        clone = HashedBowEncoder.__new__(HashedBowEncoder)
        clone.dim = self.dim
        clone.buckets = self.buckets
        clone.table = self.table.copy()
        clone._bucket_cache = dict(self._bucket_cache)
        return clone

    def save(self, path: str | Path) -> None:
        save_embedding_matrix(self.table, path)

    @classmethod
    def load(cls, path: str | Path) -> "HashedBowEncoder":
        table = load_embedding_matrix(path).astype(np.float32)
        enc = cls.__new__(cls)
        enc.buckets, enc.dim = table.shape
        enc.table = table
        enc._bucket_cache = {}
        return enc


def encode_text(encoder: HashedBowEncoder, text: str) -> np.ndarray:
    """Embed one text; the zero vector marks empty input."""
    return encoder.encode(text)


def dense_score(q_vec: np.ndarray, d_vec: np.ndarray) -> float:
    """Dot product of normalized vectors (cosine); zero-flagged inputs give 0."""
    if q_vec.shape != d_vec.shape:
        raise ValueError(f"dimension mismatch: {q_vec.shape} vs {d_vec.shape}")
    return float(np.dot(q_vec, d_vec))


def triplet_loss(q: np.ndarray, d_pos: np.ndarray, negatives: np.ndarray,
                 margin: float) -> float:
    """Hinge loss pushing the positive closer than each negative by ``margin``."""
    if margin <= 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    q = np.asarray(q, dtype=np.float64)
    d_pos = np.asarray(d_pos, dtype=np.float64)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if d_pos.shape != q.shape or negatives.shape[1] != q.shape[0]:
        raise ValueError("dimension mismatch between query, positive, and negatives")
    pos_dist = np.linalg.norm(q - d_pos)
    neg_dists = np.linalg.norm(q[None, :] - negatives, axis=1)
    return float(np.sum(np.maximum(pos_dist - neg_dists + margin, 0.0)))


def triplet_loss_grads(q, d_pos, negatives, margin):
    """Loss and analytic gradients w.r.t. q, d_pos, and each negative."""
    q = np.asarray(q, dtype=np.float64)
    d_pos = np.asarray(d_pos, dtype=np.float64)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    u = q - d_pos
    pos_dist = np.linalg.norm(u)
    diffs = q[None, :] - negatives
    neg_dists = np.linalg.norm(diffs, axis=1)
    hinge = pos_dist - neg_dists + margin
    active = hinge > 0.0
    loss = float(np.sum(hinge[active]))
    g_q = np.zeros_like(q)
    g_pos = np.zeros_like(q)
    g_negs = np.zeros_like(negatives)
    n_active = int(np.count_nonzero(active))
    if n_active:
        # Subgradient 0 at zero distance.
        u_hat = u / pos_dist if pos_dist > 1e-12 else np.zeros_like(u)
        g_q += n_active * u_hat
        g_pos -= n_active * u_hat
        safe = np.where(neg_dists > 1e-12, neg_dists, 1.0)
        v_hat = diffs / safe[:, None]
        v_hat[neg_dists <= 1e-12] = 0.0
        g_q -= v_hat[active].sum(axis=0)
        g_negs[active] = v_hat[active]
    return loss, g_q, g_pos, g_negs


def _normalize_backward(grad_out: np.ndarray, out: np.ndarray, norm: float) -> np.ndarray:
    """Backprop through v -> v/||v||; ``out`` is the normalized vector."""
    if norm < 1e-12:
        return np.zeros_like(grad_out)
    return (grad_out - out * np.dot(out, grad_out)) / norm


def _encode_batch(table: np.ndarray, ids_list: list[np.ndarray]):
    """Vectorized forward pass over many token-id arrays.

    Returns (normalized matrix, raw-mean norms, concatenated ids, segment
    lengths); empty or degenerate texts get zero rows and zero norms.
    """
    dim = table.shape[1]
    n = len(ids_list)
    lengths = np.array([len(ids) for ids in ids_list], dtype=np.int64)
    out = np.zeros((n, dim))
    norms = np.zeros(n)
    nonempty = np.flatnonzero(lengths > 0)
    if len(nonempty) == 0:
        return out, norms, np.empty(0, dtype=np.int64), lengths
    all_ids = np.concatenate([ids_list[i] for i in nonempty])
    starts = np.zeros(len(nonempty), dtype=np.int64)
    np.cumsum(lengths[nonempty][:-1], out=starts[1:])
    sums = np.add.reduceat(table[all_ids], starts, axis=0)
    means = sums / lengths[nonempty, None]
    raw = np.linalg.norm(means, axis=1)
    ok = raw > 1e-12
    means[ok] /= raw[ok, None]
    means[~ok] = 0.0
    out[nonempty] = means
    norms[nonempty] = np.where(ok, raw, 0.0)
    return out, norms, all_ids, lengths


def train_encoder(encoder: HashedBowEncoder, pairs: list[tuple[str, int]],
                  doc_texts, epochs: int, lr: float = 1e-3,
                  batch_size: int = 128, margin: float = 1.0, seed: int = 0,
                  weight_decay: float = 0.01, threads: int = 1
                  ) -> list[float]:
    """Train in place on (query text, positive doc ordinal) pairs.

    Negatives for each query are the other positives in its batch. Returns
    the per-epoch mean batch loss. ``doc_texts`` maps ordinal -> text.
    """
    if batch_size < 2:
        raise ConfigError("batch_size must be >= 2 for in-batch negatives")
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if not pairs or epochs == 0:
        return []
    rng = np.random.default_rng(seed)
    query_ids = [encoder.bucket_ids(q) for q, _ in pairs]
    doc_ids_cache: dict[int, np.ndarray] = {}
    for _, o in pairs:
        if o not in doc_ids_cache:
            doc_ids_cache[o] = encoder.bucket_ids(doc_texts[o])
    opt = AdamW(encoder.table.shape, lr=lr, weight_decay=weight_decay,
                dtype=encoder.table.dtype)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    n = len(pairs)
    losses: list[float] = []
    try:
        for epoch in range(epochs):
            order = rng.permutation(n)
            epoch_losses = []
            for start in range(0, n, batch_size):
                batch = order[start:start + batch_size]
                if len(batch) < 2:
                    continue
                q_ids = [query_ids[i] for i in batch]
                p_ids = [doc_ids_cache[pairs[i][1]] for i in batch]
                loss = _encoder_step(encoder.table, q_ids, p_ids, margin, opt, pool)
                epoch_losses.append(loss)
            mean_loss = float(np.mean(epoch_losses)) if epoch_losses else 0.0
            losses.append(mean_loss)
            log.info("encoder epoch %d/%d: mean batch loss %.6f",
                     epoch + 1, epochs, mean_loss)
    finally:
        if pool is not None:
            pool.shutdown()
    return losses


def _encoder_step(table, q_ids, p_ids, margin, opt, pool) -> float:
    b = len(q_ids)
    dim = table.shape[1]
    ids_list = q_ids + p_ids

    if pool is not None:
        # Chunked forward; chunk order is fixed, so results are reproducible.
        workers = pool._max_workers
        bounds = np.linspace(0, len(ids_list), workers + 1).astype(int)
        parts = list(pool.map(
            lambda lo_hi: _encode_batch(table, ids_list[lo_hi[0]:lo_hi[1]]),
            [(bounds[i], bounds[i + 1]) for i in range(workers)]))
        vecs = np.concatenate([p[0] for p in parts])
        norms = np.concatenate([p[1] for p in parts])
        all_ids = np.concatenate([p[2] for p in parts])
        lengths = np.concatenate([p[3] for p in parts])
    else:
        vecs, norms, all_ids, lengths = _encode_batch(table, ids_list)
    Q, P = vecs[:b], vecs[b:]

    diff = Q[:, None, :] - P[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    pos = np.diag(dist)
    hinge = pos[:, None] - dist + margin
    np.fill_diagonal(hinge, 0.0)
    active = hinge > 0.0
    loss = float(hinge[active].sum() / b)

    safe = np.where(dist > 1e-12, dist, 1.0)
    unit = diff / safe[:, :, None]
    counts = active.sum(axis=1) / b                       # weight on the positive term
    w = active.astype(np.float64) / b
    pos_unit = unit[np.arange(b), np.arange(b)]
    grad_q = counts[:, None] * pos_unit - np.einsum("ij,ijd->id", w, unit)
    grad_p = -counts[:, None] * pos_unit + np.einsum("ij,ijd->jd", w, unit)

    # Backprop through normalization and the token mean into the bucket table.
    grad_vecs = np.vstack([grad_q, grad_p])
    ok = norms > 1e-12
    inner = np.einsum("ij,ij->i", vecs, grad_vecs)
    grad_vecs = np.where(
        ok[:, None],
        (grad_vecs - vecs * inner[:, None]) / np.where(ok, norms, 1.0)[:, None],
        0.0)
    grad_vecs /= np.maximum(lengths, 1)[:, None]
    per_token = np.repeat(grad_vecs[lengths > 0], lengths[lengths > 0], axis=0)
    grad_table = np.zeros_like(table)
    if len(all_ids):
        flat = (all_ids[:, None] * dim + np.arange(dim)).ravel()
        grad_table = np.bincount(flat, weights=per_token.ravel(),
                                 minlength=table.size
                                 ).reshape(table.shape).astype(table.dtype)
    opt.step(table, grad_table)
    return loss


def embed_corpus(encoder: HashedBowEncoder, documents, threads: int = 1
                 ) -> DocEmbeddingStore:
    """One row per document in ordinal order; empty texts become zero rows."""
    texts = [d if isinstance(d, str) else d.text() for d in documents]

    def enc(text):
        return encoder.encode(text)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(enc, texts))
    else:
        rows = [enc(t) for t in texts]
    store = DocEmbeddingStore(np.stack(rows) if rows else np.zeros((0, encoder.dim)))
    n_empty = int(store.empty_mask.sum())
    if n_empty:
        log.warning("embed_corpus: %d documents produced empty embeddings", n_empty)
    return store

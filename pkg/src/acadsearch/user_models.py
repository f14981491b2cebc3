"""User scoring: KG-embedding similarity plus the classic user-model baselines.

All scorers return cosine-style values in [-1, 1] (self-citation is binary).
Candidates whose authors are unknown receive the per-query minimum so that
min-max normalization maps them to zero; an unknown query user makes the
whole channel constant, which fusion then ignores.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus.model import Corpus
from .dense_encoder import DocEmbeddingStore
from .kg_builder import EntityKind
from .kg_embed import KGEmbeddings


class AggregationMode(str, Enum):
    """How scores over a candidate's authors collapse to one value."""
    MAX = "max"
    MEAN = "mean"


@dataclass
class UserContext:
    user_id: str
    authored: list[int]          # pre-cutoff doc ordinals
    coauthors: frozenset[str]    # pre-cutoff co-authors, excluding the user


def build_user_contexts(corpus: Corpus, cutoff_year: int) -> dict[str, UserContext]:
    authored: dict[str, list[int]] = {}
    coauthors: dict[str, set[str]] = {}
    for i, doc in enumerate(corpus.docs):
        if doc.year >= cutoff_year:
            continue
        for u in doc.author_ids:
            authored.setdefault(u, []).append(i)
            others = coauthors.setdefault(u, set())
            others.update(a for a in doc.author_ids if a != u)
    return {u: UserContext(u, docs, frozenset(coauthors.get(u, ())))
            for u, docs in authored.items()}


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def kg_user_score(embeddings: KGEmbeddings, query_user_id: str,
                  candidate_author_ids: list[str],
                  mode: AggregationMode = AggregationMode.MAX,
                  metric: str = "cosine") -> tuple[float | None, bool]:
    """Similarity between the query user's entity vector and candidate authors.

    Returns (score, known). An unknown query user yields (0.0, False); a
    candidate with no catalogued authors yields (None, True) and the caller
    substitutes the per-query floor. ``metric`` is cosine by default, with
    negative euclidean distance as the alternative.
    """
    if metric not in ("cosine", "neg_l2"):
        raise ValueError(f"unknown user-score metric {metric!r}")
    catalog = embeddings.catalog
    if (EntityKind.USER, query_user_id) not in catalog:
        return 0.0, False
    q_vec = embeddings.entities[catalog.ordinal(EntityKind.USER, query_user_id)]
    sims = []
    for a in candidate_author_ids:
        if (EntityKind.USER, a) not in catalog:
            continue
        a_vec = embeddings.entities[catalog.ordinal(EntityKind.USER, a)]
        if metric == "cosine":
            sims.append(_cosine(q_vec, a_vec))
        else:
            sims.append(-float(np.linalg.norm(q_vec - a_vec)))
    if not sims:
        return None, True
    agg = max(sims) if mode == AggregationMode.MAX else float(np.mean(sims))
    return agg, True


def mean_user_vector(doc_store: DocEmbeddingStore, context: UserContext
                     ) -> np.ndarray | None:
    """Normalized mean of the user's authored-document rows; None if undefined."""
    if not context.authored:
        return None
    mean = doc_store.vectors[context.authored].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return None
    return mean / norm


def attention_user_score(q_vec: np.ndarray, context: UserContext,
                         doc_store: DocEmbeddingStore,
                         candidate_ordinal: int) -> float:
    """Query-aware profile: softmax((q . d_i)/sqrt(dim)) over authored docs."""
    weights = attention_weights(q_vec, context, doc_store)
    if weights is None:
        return 0.0
    profile = weights @ doc_store.vectors[context.authored]
    norm = np.linalg.norm(profile)
    if norm < 1e-12:
        return 0.0
    return float(np.dot(profile / norm, doc_store.vectors[candidate_ordinal]))


def attention_weights(q_vec: np.ndarray, context: UserContext,
                      doc_store: DocEmbeddingStore) -> np.ndarray | None:
    if not context.authored:
        return None
    logits = doc_store.vectors[context.authored] @ q_vec / np.sqrt(doc_store.dim)
    logits -= logits.max()
    exp = np.exp(logits)
    return exp / exp.sum()


def self_citation_score(context: UserContext | None,
                        candidate_author_ids: list[str]) -> float:
    """1.0 iff the candidate shares an author with the user or a co-author."""
    if context is None:
        return 0.0
    boost_set = {context.user_id} | set(context.coauthors)
    return 1.0 if boost_set.intersection(candidate_author_ids) else 0.0

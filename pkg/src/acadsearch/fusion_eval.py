"""Score fusion and evaluation.

The final score of a candidate is the convex combination

    S = l1 * bm25 + l2 * dense + l3 * user      (l1 + l2 + l3 = 1, li >= 0)

over per-query min-max normalized channels. Weights are tuned by exhaustive
search over the simplex lattice with a configurable step, maximizing
validation MAP@100. Metrics are MAP@100, MRR@10, and NDCG@10 with binary
gains; significance uses a two-sided paired randomization test.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus.model import QrelSet
from .errors import ConfigError, DataFormatError

log = logging.getLogger(__name__)

CHANNELS = ("bm25", "dense", "user")


@dataclass(frozen=True)
class Lambdas:
    bm25: float
    dense: float
    user: float

    def __post_init__(self):
        total = self.bm25 + self.dense + self.user
        if min(self.bm25, self.dense, self.user) < 0:
            raise ConfigError(f"fusion weights must be nonnegative: {self}")
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"fusion weights must sum to 1, got {total!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.bm25, self.dense, self.user])


@dataclass
class CandidateList:
    """First-stage candidates for one query with raw per-channel scores.

    ``scores`` has shape (n_candidates, 3) ordered per CHANNELS.
    """
    query_id: str
    doc_ids: list[str]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.doc_ids) != self.scores.shape[0] or (
                len(self.doc_ids) and self.scores.shape[1] != len(CHANNELS)):
            raise ConfigError(f"{self.query_id}: candidate/score shape mismatch")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise DataFormatError(f"{self.query_id}: duplicate candidate doc_ids")


def minmax_normalize(scores) -> np.ndarray:
    """(s - min) / (max - min) per element; a constant list maps to all zeros."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ConfigError("cannot normalize an empty score list")
    if not np.all(np.isfinite(scores)):
        raise ConfigError("scores must be finite")
    lo = scores.min()
    hi = scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def normalize_channels(candidates: CandidateList) -> np.ndarray:
    if candidates.scores.shape[0] == 0:
        return candidates.scores.copy()
    return np.column_stack([minmax_normalize(candidates.scores[:, c])
                            for c in range(len(CHANNELS))])


def fuse(lambdas: Lambdas, candidates: CandidateList) -> list[tuple[str, float]]:
    """Final ranking: weighted normalized scores, descending, ties by doc_id."""
    if not candidates.doc_ids:
        return []
    norm = normalize_channels(candidates)
    fused = norm @ lambdas.as_array()
    order = sorted(range(len(fused)), key=lambda i: (-fused[i], candidates.doc_ids[i]))
    return [(candidates.doc_ids[i], float(fused[i])) for i in order]


# --- rank-quality metrics -----------------------------------------------------

def map_at_k(ranking: list[str], relevant: frozenset[str] | set[str],
             k: int = 100) -> float:
    """Average precision at k, normalized by min(|relevant|, k)."""
    if not relevant:
        raise ValueError("empty relevant set; exclude the query instead")
    hits = 0
    total = 0.0
    for i, doc in enumerate(ranking[:k], start=1):
        if doc in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), k)


def mrr_at_k(ranking: list[str], relevant, k: int = 10) -> float:
    for i, doc in enumerate(ranking[:k], start=1):
        if doc in relevant:
            return 1.0 / i
    return 0.0


def ndcg_at_k(ranking: list[str], relevant, k: int = 10) -> float:
    """Binary gains, discount 1/log2(rank + 1), ideal packs relevant on top."""
    if not relevant:
        raise ValueError("empty relevant set; exclude the query instead")
    dcg = sum(1.0 / math.log2(i + 1)
              for i, doc in enumerate(ranking[:k], start=1) if doc in relevant)
    ideal = sum(1.0 / math.log2(i + 1)
                for i in range(1, min(len(relevant), k) + 1))
    return dcg / ideal


METRIC_FNS = {"map@100": lambda r, rel: map_at_k(r, rel, 100),
              "mrr@10": lambda r, rel: mrr_at_k(r, rel, 10),
              "ndcg@10": lambda r, rel: ndcg_at_k(r, rel, 10)}


@dataclass
class MetricReport:
    """Aggregate and per-query metrics for one system."""
    name: str
    means: dict[str, float]
    per_query: dict[str, dict[str, float]]   # metric -> {query_id: value}
    skipped_empty: int


def evaluate_run(name: str, rankings: dict[str, list[str]], qrels: QrelSet
                 ) -> MetricReport:
    """Metrics over all queries with nonempty qrels; others counted, not scored."""
    per_query: dict[str, dict[str, float]] = {m: {} for m in METRIC_FNS}
    skipped = 0
    for qid in sorted(rankings):
        relevant = qrels.relevant(qid)
        if not relevant:
            skipped += 1
            continue
        for metric, fn in METRIC_FNS.items():
            per_query[metric][qid] = fn(rankings[qid], relevant)
    means = {m: (float(np.mean(list(vals.values()))) if vals else 0.0)
             for m, vals in per_query.items()}
    return MetricReport(name, means, per_query, skipped)


# --- lambda tuning -------------------------------------------------------------

def lambda_grid(step: float) -> list[Lambdas]:
    """All lattice points on the simplex with the given step."""
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ConfigError(f"step {step} does not divide 1")
    grid = []
    for i in range(n + 1):
        for j in range(n - i + 1):
            k = n - i - j
            grid.append(Lambdas(i / n, j / n, k / n))
    return grid


def _prepare_arrays(candidate_lists: list[CandidateList], qrels: QrelSet):
    """Per-query arrays sorted by doc_id so a stable sort on -S breaks ties right."""
    prepared = []
    for cl in candidate_lists:
        relevant = qrels.relevant(cl.query_id)
        if not relevant or not cl.doc_ids:
            continue
        order = sorted(range(len(cl.doc_ids)), key=lambda i: cl.doc_ids[i])
        doc_ids = [cl.doc_ids[i] for i in order]
        norm = normalize_channels(cl)[order]
        rel_mask = np.array([d in relevant for d in doc_ids])
        prepared.append((norm, rel_mask, len(relevant)))
    return prepared


def _grid_map(prepared, lam: Lambdas, k: int = 100) -> float:
    """MAP@k over prepared arrays; identical ordering semantics to fuse()."""
    weights = lam.as_array()
    values = []
    for norm, rel_mask, n_rel in prepared:
        fused = norm @ weights
        order = np.argsort(-fused, kind="stable")
        rel_sorted = rel_mask[order][:k]
        hits = np.cumsum(rel_sorted)
        ranks = np.arange(1, len(rel_sorted) + 1)
        ap = float((hits[rel_sorted] / ranks[rel_sorted]).sum()) / min(n_rel, k)
        values.append(ap)
    return float(np.mean(values)) if values else 0.0


def tune_lambdas(candidate_lists: list[CandidateList], qrels: QrelSet,
                 step: float = 0.05, fix_user_zero: bool = False
                 ) -> tuple[Lambdas, str]:
    """Exhaustive simplex grid search maximizing validation MAP@100.

    Ties prefer larger dense weight, then larger bm25 weight. Returns the
    winner and the full grid as a text table. ``fix_user_zero`` restricts the
    search to the no-personalization face of the simplex.
    """
    if not candidate_lists:
        raise ConfigError("empty validation set")
    prepared = _prepare_arrays(candidate_lists, qrels)
    if not prepared:
        raise ConfigError("no validation query has relevant candidates")
    grid = lambda_grid(step)
    if fix_user_zero:
        grid = [g for g in grid if g.user == 0.0]
    rows = []
    best = None
    best_key = None
    for lam in grid:
        score = _grid_map(prepared, lam)
        rows.append((lam, score))
        key = (score, lam.dense, lam.bm25)
        if best_key is None or key > best_key:
            best_key = key
            best = lam
    lines = [f"{'bm25':>6} {'dense':>6} {'user':>6}   {'map@100':>10}"]
    for lam, score in rows:
        marker = "  <-- selected" if lam == best else ""
        lines.append(f"{lam.bm25:6.2f} {lam.dense:6.2f} {lam.user:6.2f}   "
                     f"{score:10.6f}{marker}")
    return best, "\n".join(lines) + "\n"


# --- significance ---------------------------------------------------------------

def significance_test(metrics_a, metrics_b, permutations: int = 10000,
                      seed: int = 0) -> float:
    """Two-sided paired randomization test on the mean difference."""
    a = np.asarray(metrics_a, dtype=np.float64)
    b = np.asarray(metrics_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"paired arrays differ in length: {a.shape} vs {b.shape}")
    diffs = a - b
    observed = abs(diffs.mean())
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(permutations):
        signs = rng.integers(0, 2, size=len(diffs)) * 2 - 1
        if abs((signs * diffs).mean()) >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (permutations + 1)


# --- run files -------------------------------------------------------------------

@dataclass
class RunFile:
    """Ranked output per query: (doc_id, score, rank) with ranks 1..n."""
    name: str
    rankings: dict[str, list[tuple[str, float, int]]]

    def validate(self) -> None:
        for qid, entries in self.rankings.items():
            ranks = [r for _, _, r in entries]
            if ranks != list(range(1, len(entries) + 1)):
                raise DataFormatError(f"{qid}: ranks are not contiguous from 1")
            scores = [s for _, s, _ in entries]
            if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
                raise DataFormatError(f"{qid}: scores increase with rank")

    def ranking_ids(self) -> dict[str, list[str]]:
        return {qid: [d for d, _, _ in entries]
                for qid, entries in self.rankings.items()}


def run_from_rankings(name: str, fused: dict[str, list[tuple[str, float]]]) -> RunFile:
    return RunFile(name, {
        qid: [(doc, score, rank) for rank, (doc, score) in enumerate(entries, 1)]
        for qid, entries in fused.items()})


def write_run(run: RunFile, path: str | Path) -> None:
    """TREC 6-column format: query_id Q0 doc_id rank score run_tag."""
    run.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run.rankings):
            for doc_id, score, rank in run.rankings[qid]:
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6g} {run.name}\n")


def read_run(path: str | Path) -> RunFile:
    path = Path(path)
    rankings: dict[str, list[tuple[str, float, int]]] = {}
    name = "run"
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataFormatError(f"{path}: expected 6 columns on line "
                                      f"{lineno}, got {len(parts)}")
            qid, _, doc_id, rank, score, tag = parts
            try:
                entry = (doc_id, float(score), int(rank))
            except ValueError:
                raise DataFormatError(f"{path}: bad rank or score on line "
                                      f"{lineno}") from None
            rankings.setdefault(qid, []).append(entry)
            name = tag
    for qid in rankings:
        rankings[qid].sort(key=lambda e: e[2])
    run = RunFile(name, rankings)
    run.validate()
    return run


# --- reports ----------------------------------------------------------------------

def metrics_table(reports: list[MetricReport]) -> str:
    metrics = list(METRIC_FNS)
    width = max((len(r.name) for r in reports), default=6) + 2
    lines = [f"{'system':<{width}}" + "".join(f"{m:>10}" for m in metrics)
             + f"{'queries':>9}{'no-rel':>8}"]
    for r in reports:
        n_queries = len(next(iter(r.per_query.values()), {}))
        lines.append(f"{r.name:<{width}}"
                     + "".join(f"{r.means[m]:>10.4f}" for m in metrics)
                     + f"{n_queries:>9}{r.skipped_empty:>8}")
    return "\n".join(lines) + "\n"


def ablation_report(rows: list[tuple[str, dict[str, float]]],
                    reference: tuple[str, dict[str, float]] | None = None) -> str:
    """Fixed-order ablation table over KG node-type configurations."""
    metrics = list(METRIC_FNS)
    width = max(len(name) for name, _ in rows + ([reference] if reference else [])) + 2
    lines = [f"{'node types':<{width}}" + "".join(f"{m:>10}" for m in metrics)]
    for name, means in rows:
        lines.append(f"{name:<{width}}" + "".join(f"{means[m]:>10.4f}" for m in metrics))
    if reference is not None:
        name, means = reference
        lines.append(f"{name:<{width}}" + "".join(f"{means[m]:>10.4f}" for m in metrics))
    return "\n".join(lines) + "\n"

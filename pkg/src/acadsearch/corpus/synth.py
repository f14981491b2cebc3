"""Deterministic synthetic academic corpus generator.

The generator plants three distinct, partially overlapping signals so that
every pipeline stage has something real to learn:

* lexical/topical: vocabulary is partitioned into topic blocks, each split
  further into subtopic blocks. A document writes mostly in its subtopic
  and topic vocabulary, and its title borrows words from the titles of the
  papers it cites, so cited work is lexically reachable from a title query;
* graph: references prefer earlier documents of the same topic/subtopic and
  occasionally copy a citation of a cited paper, skewing in-degree;
* social: authors cluster by affiliation, affiliations carry topics and
  sticky subtopics, and a configurable fraction of references points at
  documents written by the team or by affiliation colleagues. Which cluster
  a paper belongs to is invisible in its text, so this signal is only
  reachable through authorship metadata.

Everything is a pure function of (config, seed).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .model import Author, Corpus, Document

# Pseudoword syllables: consonant+vowel only, so generated words never end in
# s/ed/ing and are fixed points of the query stemmer.
_CONSONANTS = "bcdfghjklmnprtvz"
_SYLLABLES = [c + v for c in _CONSONANTS for v in "aeiou"]

_TITLE_STOPWORDS = ("the", "of", "and", "for", "with", "on", "in", "a")


@dataclass
class SynthConfig:
    n_docs: int = 20000
    n_authors: int = 2000
    n_venues: int = 50
    n_affiliations: int = 200
    n_topics: int = 25
    vocab_size: int = 5000
    year_min: int = 2000
    year_max: int = 2019
    n_subtopics: int = 8
    title_len: tuple[int, int] = (5, 12)
    abstract_len: tuple[int, int] = (50, 150)
    refs_mean: float = 8.0
    refs_max: int = 30
    shared_vocab_frac: float = 0.2
    stopword_prob: float = 0.12
    social_cite_prob: float = 0.7
    subtopic_cite_prob: float = 0.2
    copy_cite_prob: float = 0.35
    coauthor_same_affiliation_prob: float = 0.55
    coauthor_same_topic_prob: float = 0.35
    subtopic_sticky_prob: float = 0.35
    # junior member goes first on the byline; query writers are then often
    # users with a thin publication history whose embeddings lean on
    # metadata edges
    junior_first_prob: float = 0.6
    junior_coauthor_prob: float = 0.35
    authorless_prob: float = 0.01

    def validate(self) -> None:
        if self.n_docs < 2:
            raise ConfigError(f"n_docs must be >= 2, got {self.n_docs}")
        if self.vocab_size < 1:
            raise ConfigError("vocabulary must be nonempty")
        if self.n_topics < 1 or self.n_subtopics < 1:
            raise ConfigError("n_topics and n_subtopics must be >= 1")
        shared = int(self.vocab_size * self.shared_vocab_frac)
        if (self.vocab_size - shared) // (self.n_topics * self.n_subtopics) < 2:
            raise ConfigError("vocabulary too small for the requested "
                              "topic/subtopic grid (needs a synonym pair "
                              "per subtopic)")
        if self.year_max < self.year_min:
            raise ConfigError("year_max must be >= year_min")
        if self.n_authors < 1 or self.n_venues < 1 or self.n_affiliations < 1:
            raise ConfigError("need at least one author, venue, and affiliation")


def _make_vocabulary(rng: np.random.Generator, size: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        n_syl = int(rng.integers(2, 5))
        word = "".join(_SYLLABLES[int(rng.integers(len(_SYLLABLES)))]
                       for _ in range(n_syl))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def _zipf_cdf(n: int, s: float = 1.1) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** s
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


class _Vocab:
    """Topic blocks, each split into subtopic blocks, plus a shared pool.

    Within a subtopic, consecutive words form synonym pairs: one underlying
    concept surfaces as either form with equal probability. Exact-match
    retrieval cannot bridge the forms; an encoder trained on co-occurrence
    can, which is the transferable edge the dense channel is supposed to add.
    """

    def __init__(self, rng: np.random.Generator, cfg: SynthConfig):
        vocab = _make_vocabulary(rng, cfg.vocab_size)
        n_shared = max(1, int(cfg.vocab_size * cfg.shared_vocab_frac))
        self.shared = vocab[:n_shared]
        per_topic = (cfg.vocab_size - n_shared) // cfg.n_topics
        per_sub = per_topic // cfg.n_subtopics
        self.topic_words: list[list[str]] = []
        self.sub_words: list[list[list[str]]] = []
        for t in range(cfg.n_topics):
            base = n_shared + t * per_topic
            block = vocab[base: base + per_topic]
            self.topic_words.append(block)
            self.sub_words.append(
                [block[s * per_sub: (s + 1) * per_sub]
                 for s in range(cfg.n_subtopics)])
        self.shared_cdf = _zipf_cdf(len(self.shared))
        self.topic_cdf = _zipf_cdf(per_topic)
        self.concept_cdf = _zipf_cdf(max(1, per_sub // 2))

    def draw(self, rng, words: list[str], cdf: np.ndarray) -> str:
        return words[int(np.searchsorted(cdf, rng.random()))]

    def draw_sub(self, rng, topic: int, sub: int, dialect: int) -> str:
        """Concept by Zipf; the surface form is the document's dialect."""
        block = self.sub_words[topic][sub]
        concept = int(np.searchsorted(self.concept_cdf, rng.random()))
        return block[min(2 * concept + dialect, len(block) - 1)]


def generate_synthetic(config: SynthConfig, seed: int) -> tuple[Corpus, list[Author]]:
    """Generate a corpus plus author records; deterministic for a fixed seed."""
    cfg = config
    cfg.validate()
    rng = np.random.default_rng(seed)
    vocab = _Vocab(rng, cfg)

    # Affiliations carry topics; authors inherit their affiliation's topic as
    # their first affinity, which is what makes the affiliation node useful.
    aff_topic = np.arange(cfg.n_affiliations) % cfg.n_topics
    author_aff = rng.integers(0, cfg.n_affiliations, size=cfg.n_authors)
    author_topics: list[list[int]] = []
    for a in range(cfg.n_authors):
        affin = [int(aff_topic[author_aff[a]])]
        for _ in range(2):
            if rng.random() < 0.3:
                extra = int(rng.integers(cfg.n_topics))
                if extra not in affin:
                    affin.append(extra)
        author_topics.append(affin)
    topic_authors: list[list[int]] = [[] for _ in range(cfg.n_topics)]
    for a, affin in enumerate(author_topics):
        for t in affin:
            topic_authors[t].append(a)
    aff_authors: list[list[int]] = [[] for _ in range(cfg.n_affiliations)]
    for a in range(cfg.n_authors):
        aff_authors[author_aff[a]].append(a)

    venue_topic = np.arange(cfg.n_venues) % cfg.n_topics
    venues_by_topic: list[list[int]] = [[] for _ in range(cfg.n_topics)]
    for v in range(cfg.n_venues):
        venues_by_topic[venue_topic[v]].append(v)

    # Seniority model: author index doubles as a seniority rank. Low-index
    # authors entered the field early and lead/co-author prolifically
    # (Zipf); high-index authors activate late, publish little, and appear
    # on bylines as junior first authors. Their embeddings are the ones
    # that must lean on metadata edges.
    span = max(1, cfg.year_max - cfg.year_min)
    frac = np.arange(cfg.n_authors) / max(1, cfg.n_authors - 1)
    activation = (cfg.year_min + (frac ** 0.7) * span * 0.95).astype(np.int64)
    zipf_w = 1.0 / np.arange(1, cfg.n_authors + 1, dtype=np.float64) ** 0.9
    lead_cdf_by_year: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for y in range(cfg.year_min, cfg.year_max + 1):
        active = np.flatnonzero(activation <= y)
        cdf = np.cumsum(zipf_w[active])
        lead_cdf_by_year[y] = (active, cdf / cdf[-1])

    def pick_coauthor(pool, year):
        """Seniors by productivity most of the time, a recent junior otherwise."""
        if rng.random() < cfg.junior_coauthor_prob:
            for _ in range(6):
                cand = pool[int(rng.integers(len(pool)))]
                if year - 3 <= activation[cand] <= year:
                    return cand
        for _ in range(6):
            cand = pool[int(len(pool) * rng.random() ** 2.2)]
            if activation[cand] <= year:
                return cand
        return None

    # Publication volume grows over time, so an 80th-percentile cutoff leaves
    # a healthy test partition.
    years_range = np.arange(cfg.year_min, cfg.year_max + 1)
    year_weights = np.linspace(1.0, 2.0, len(years_range))
    year_weights /= year_weights.sum()
    years = np.sort(rng.choice(years_range, size=cfg.n_docs, p=year_weights))

    all_authors = list(range(cfg.n_authors))
    author_docs: list[list[int]] = [[] for _ in range(cfg.n_authors)]
    aff_docs: list[list[int]] = [[] for _ in range(cfg.n_affiliations)]
    sub_docs: dict[tuple[int, int], list[int]] = {}
    aff_subtopic: dict[tuple[int, int], int] = {}
    doc_refs: list[list[int]] = []
    doc_topic = np.empty(cfg.n_docs, dtype=np.int64)
    doc_sub = np.empty(cfg.n_docs, dtype=np.int64)
    title_tokens_by_doc: list[list[str]] = []
    docs: list[Document] = []

    def text_tokens(n, primary, sub, dialect, secondary, ref_pool, mix):
        """mix = (p_sub, p_ref, p_topic); remainder goes to the shared pool."""
        out = []
        p_sub, p_ref, p_topic = mix
        for _ in range(n):
            u = rng.random()
            if u < cfg.stopword_prob:
                out.append(_TITLE_STOPWORDS[int(rng.random()
                                                * len(_TITLE_STOPWORDS))])
                continue
            u = rng.random()
            if u < p_ref and ref_pool:
                out.append(ref_pool[int(rng.integers(len(ref_pool)))])
            elif u < p_ref + p_sub:
                out.append(vocab.draw_sub(rng, primary, sub, dialect))
            elif u < p_ref + p_sub + p_topic:
                topic = primary
                if secondary is not None and rng.random() < 0.25:
                    topic = secondary
                out.append(vocab.draw(rng, vocab.topic_words[topic],
                                      vocab.topic_cdf))
            else:
                out.append(vocab.draw(rng, vocab.shared, vocab.shared_cdf))
        return out

    for i in range(cfg.n_docs):
        year = int(years[i])
        elig_end = int(np.searchsorted(years, year, side="left"))

        if rng.random() < cfg.authorless_prob:
            team: list[int] = []
            primary = int(rng.integers(cfg.n_topics))
            aff_of_lead = None
        else:
            active, lead_cdf = lead_cdf_by_year[year]
            lead = int(active[int(np.searchsorted(lead_cdf, rng.random()))])
            team = [lead]
            team_size = int(rng.integers(1, 4))
            attempts = 0
            while len(team) < team_size and attempts < 20:
                attempts += 1
                u = rng.random()
                if u < cfg.coauthor_same_affiliation_prob:
                    pool = aff_authors[author_aff[lead]]
                elif u < (cfg.coauthor_same_affiliation_prob
                          + cfg.coauthor_same_topic_prob):
                    pool = topic_authors[author_topics[lead][0]]
                else:
                    pool = all_authors
                cand = pick_coauthor(pool, year)
                if cand is not None and cand not in team:
                    team.append(int(cand))
            primary = author_topics[lead][int(rng.integers(
                len(author_topics[lead])))]
            aff_of_lead = int(author_aff[lead])
        # Affiliations keep working on the same subtopic most of the time,
        # which concentrates each social cluster in a lexical neighborhood.
        key = (aff_of_lead, primary) if aff_of_lead is not None else None
        if key is not None and key in aff_subtopic \
                and rng.random() < cfg.subtopic_sticky_prob:
            sub = aff_subtopic[key]
        else:
            sub = int(rng.integers(cfg.n_subtopics))
            if key is not None:
                aff_subtopic[key] = sub
        secondary = int(rng.integers(cfg.n_topics)) if rng.random() < 0.5 else None
        # Every document writes all its subtopic terms in one of two synonym
        # dialects; exact matching sees only half the neighborhood.
        dialect = 1 if rng.random() < 0.5 else 0
        doc_topic[i] = primary
        doc_sub[i] = sub

        # References: social pool first, then same-subtopic, then anything
        # earlier. Copying a cited paper's reference skews in-degree.
        refs: list[int] = []
        if elig_end > 0:
            social: list[int] = []
            for a in team:
                social.extend(author_docs[a])
            for aff in {int(author_aff[a]) for a in team}:
                social.extend(aff_docs[aff])
            social = [d for d in social if d < elig_end]
            same_sub = [d for d in sub_docs.get((primary, sub), ())
                        if d < elig_end]
            n_refs = min(int(rng.poisson(cfg.refs_mean)), cfg.refs_max, elig_end)
            chosen: set[int] = set()
            for _ in range(n_refs):
                for _attempt in range(8):
                    u = rng.random()
                    if u < cfg.social_cite_prob and social:
                        # colleagues' work on the citing paper's own topic first
                        for _retry in range(3):
                            cand = social[int(rng.integers(len(social)))]
                            if doc_topic[cand] == primary:
                                break
                    elif u < cfg.social_cite_prob + cfg.subtopic_cite_prob \
                            and same_sub:
                        cand = same_sub[int(rng.integers(len(same_sub)))]
                        if rng.random() < cfg.copy_cite_prob and doc_refs[cand]:
                            copied = doc_refs[cand][int(rng.integers(
                                len(doc_refs[cand])))]
                            if copied < elig_end:
                                cand = copied
                    else:
                        cand = int(rng.integers(elig_end))
                    if cand != i and cand not in chosen:
                        chosen.add(cand)
                        refs.append(cand)
                        break
        doc_refs.append(refs)

        # Words this paper borrows from the titles of what it cites.
        ref_pool: list[str] = []
        for r in refs:
            ref_pool.extend(w for w in title_tokens_by_doc[r]
                            if w not in _TITLE_STOPWORDS)

        title_tokens = text_tokens(
            int(rng.integers(cfg.title_len[0], cfg.title_len[1] + 1)),
            primary, sub, dialect, secondary, ref_pool, mix=(0.50, 0.25, 0.15))
        abstract_tokens = text_tokens(
            int(rng.integers(cfg.abstract_len[0], cfg.abstract_len[1] + 1)),
            primary, sub, dialect, secondary, ref_pool, mix=(0.42, 0.18, 0.25))

        # Venue tracks topic and loosely subtopic; the social cluster itself
        # is carried by affiliations, keeping the two node types distinct.
        topic_venues = venues_by_topic[primary]
        u = rng.random()
        if u < 0.7 and topic_venues:
            venue = topic_venues[sub % len(topic_venues)]
        elif u < 0.9 and topic_venues:
            venue = topic_venues[int(rng.integers(len(topic_venues)))]
        else:
            venue = int(rng.integers(cfg.n_venues))

        for a in team:
            author_docs[a].append(i)
        for aff in {int(author_aff[a]) for a in team}:
            aff_docs[aff].append(i)
        sub_docs.setdefault((primary, sub), []).append(i)
        title_tokens_by_doc.append(title_tokens)
        byline = list(team)
        if len(byline) > 1 and rng.random() < cfg.junior_first_prob:
            junior = max(byline, key=lambda a: (activation[a], a))
            byline.remove(junior)
            byline.insert(0, junior)
        docs.append(Document(
            doc_id=f"d{i:05d}",
            title=" ".join(title_tokens),
            abstract=" ".join(abstract_tokens),
            author_ids=[f"u{a:04d}" for a in byline],
            venue_id=f"v{venue:03d}",
            year=year,
            references=[f"d{r:05d}" for r in refs],
        ))

    authors = [Author(f"u{a:04d}", f"a{author_aff[a]:03d}")
               for a in range(cfg.n_authors)]
    extras = {
        "doc_topics": doc_topic.tolist(),
        "doc_subtopics": doc_sub.tolist(),
        "author_topics": {f"u{a:04d}": author_topics[a]
                          for a in range(cfg.n_authors)},
        "affiliation_topics": {f"a{k:03d}": int(aff_topic[k])
                               for k in range(cfg.n_affiliations)},
    }
    corpus = Corpus(docs, authors, extras=extras)
    return corpus, authors

import numpy as np
import pytest

from acadsearch.corpus import SynthConfig, generate_synthetic, save_corpus
from acadsearch.errors import ConfigError
from acadsearch.lexical_index import tokenize


def test_determinism_byte_identical(tmp_path, small_synth):
    cfg, corpus, _ = small_synth
    corpus2, _ = generate_synthetic(cfg, seed=13)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(corpus, p1)
    save_corpus(corpus2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_different_seed_differs(small_synth):
    cfg, corpus, _ = small_synth
    corpus2, _ = generate_synthetic(cfg, seed=14)
    assert any(a.title != b.title for a, b in zip(corpus.docs, corpus2.docs))


def test_single_topic_shares_vocabulary():
    cfg = SynthConfig(n_docs=50, n_authors=10, n_venues=2, n_affiliations=3,
                      n_topics=1, n_subtopics=2, vocab_size=200)
    corpus, _ = generate_synthetic(cfg, seed=1)
    assert set(corpus.extras["doc_topics"]) == {0}


def test_config_errors():
    with pytest.raises(ConfigError):
        generate_synthetic(SynthConfig(n_docs=1), seed=0)
    with pytest.raises(ConfigError):
        generate_synthetic(SynthConfig(n_docs=10, vocab_size=0), seed=0)
    with pytest.raises(ConfigError):
        # not enough words for a synonym pair per subtopic
        generate_synthetic(SynthConfig(n_docs=10, n_topics=30, n_subtopics=10,
                                       vocab_size=100), seed=0)


def test_structure_invariants(small_synth):
    _, corpus, authors = small_synth
    known_authors = {a.author_id for a in authors}
    for doc in corpus:
        assert doc.doc_id not in doc.references
        title_len = len(tokenize(doc.title))
        assert 5 <= title_len <= 12
        assert 50 <= len(tokenize(doc.abstract)) <= 150
        assert len(doc.author_ids) <= 3
        assert all(a in known_authors for a in doc.author_ids)
        for ref in doc.references:
            assert ref in corpus
            assert corpus.get(ref).year < doc.year


def test_years_sorted_and_in_range(small_synth):
    cfg, corpus, _ = small_synth
    years = corpus.years()
    assert years == sorted(years)
    assert min(years) >= cfg.year_min and max(years) <= cfg.year_max


def test_authors_have_affiliations(small_synth):
    _, _, authors = small_synth
    assert all(a.affiliation_id is not None for a in authors)


def test_citations_prefer_same_topic(small_synth):
    """Within-topic citation mass should dominate cross-topic mass."""
    _, corpus, _ = small_synth
    topics = corpus.extras["doc_topics"]
    same = cross = 0
    for doc in corpus:
        t = topics[corpus.ordinal(doc.doc_id)]
        for ref in doc.references:
            if topics[corpus.ordinal(ref)] == t:
                same += 1
            else:
                cross += 1
    assert same > cross


def test_default_config_topic_citation_dominance():
    """At the default scale, within-topic citation mass dominates."""
    corpus, _ = generate_synthetic(SynthConfig(), seed=7)
    topics = corpus.extras["doc_topics"]
    same = cross = 0
    for doc in corpus:
        t = topics[corpus.ordinal(doc.doc_id)]
        for ref in doc.references:
            if topics[corpus.ordinal(ref)] == t:
                same += 1
            else:
                cross += 1
    assert same > cross


def test_personalization_signal_exists(small_synth):
    """References hit the team's own affiliations far above chance."""
    cfg, corpus, authors = small_synth
    aff_of = {a.author_id: a.affiliation_id for a in authors}
    hits = total = 0
    for doc in corpus:
        team_affs = {aff_of[a] for a in doc.author_ids}
        if not team_affs:
            continue
        for ref in doc.references:
            ref_affs = {aff_of[a] for a in corpus.get(ref).author_ids}
            total += 1
            if team_affs & ref_affs:
                hits += 1
    assert total > 0
    assert hits / total > 3.0 / cfg.n_affiliations

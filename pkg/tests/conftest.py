import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from acadsearch.corpus import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_synth():
    """A small but structured corpus shared across module tests."""
    cfg = SynthConfig(n_docs=1500, n_authors=250, n_venues=16, n_affiliations=40,
                      n_topics=8, vocab_size=1600)
    corpus, authors = generate_synthetic(cfg, seed=13)
    return cfg, corpus, authors

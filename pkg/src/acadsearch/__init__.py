"""Personalized academic search pipeline at desk scale.

Two-stage retrieval (BM25 candidates, dense re-ranking) combined with a
knowledge-graph user model via convex score fusion, plus baselines and
standard rank-quality evaluation.
"""

__version__ = "0.1.0"

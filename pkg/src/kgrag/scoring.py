"""Path relevance scoring: adapter attention, lexical/embedding similarity, PageRank.

Each scorer returns exactly one score per input path, in input order.
Attention and PageRank scores are min-max normalized per question so a
coarse threshold means the same thing across scorers; similarity already
lands in [0,1] via the cosine shift and is reported as-is.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .kg import KnowledgeGraph, personalized_pagerank
from .retrieval import Path, Question, RetrievalResult, verbalize
from .text import tokenize

Embedder = Callable[[Sequence[str]], list[dict[str, float]]]

SCORERS = ("attention", "similarity", "pagerank", "external")


@dataclass(frozen=True)
class ScoredPath:
    path: Path
    score: float
    scorer: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.score) or self.score < 0:
            raise ValueError(f"score must be finite and >= 0, got {self.score!r}")
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer tag {self.scorer!r}")


def minmax_normalize(scores: Sequence[float]) -> list[float]:
    """Scale to [0,1] per question; an all-equal batch maps to all 1.0."""
    if not scores:
        return []
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def score_attention(client, q: Question, paths: Sequence[Path]) -> list[ScoredPath]:
    """Score via the adapter's attention endpoint, min-max normalized."""
    if not paths:
        raise ValueError("score_attention requires at least one path")
    raw = client.score_paths(q.text, [verbalize(p) for p in paths])
    normalized = minmax_normalize(raw)
    return [ScoredPath(p, s, "attention") for p, s in zip(paths, normalized)]


def tfidf_embed(docs: Sequence[str]) -> list[dict[str, float]]:
    """Sparse TF-IDF vectors over the given pool (smoothed idf, raw tf)."""
    token_docs = [tokenize(d) for d in docs]
    n = len(token_docs)
    df = Counter(t for toks in token_docs for t in set(toks))
    idf = {t: 1.0 + math.log((1.0 + n) / (1.0 + c)) for t, c in df.items()}
    return [{t: c * idf[t] for t, c in Counter(toks).items()} for toks in token_docs]


def _cosine(a: dict[str, float], b: dict[str, float]) -> float:
    dot = sum(v * b.get(t, 0.0) for t, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0  # zero vector: treat as orthogonal
    return dot / (na * nb)


def score_similarity(q: Question, paths: Sequence[Path], embedder: Embedder | None = None) -> list[ScoredPath]:
    """Cosine similarity between question and path, shifted to [0,1] by (1+cos)/2.

    The default embedder is the built-in lexical TF-IDF fitted on the
    question plus this question's path pool, so the baseline runs with no
    external model; any callable with the same shape can replace it.
    """
    if not paths:
        raise ValueError("score_similarity requires at least one path")
    embed = embedder or tfidf_embed
    texts = [q.text] + [verbalize(p) for p in paths]
    vectors = embed(texts)
    q_vec = vectors[0]
    scores = [(1.0 + _cosine(q_vec, v)) / 2.0 for v in vectors[1:]]
    return [ScoredPath(p, s, "similarity") for p, s in zip(paths, scores)]


def score_pagerank(g: KnowledgeGraph, q: Question, paths: Sequence[Path]) -> list[ScoredPath]:
    """Mean personalized-PageRank score of each path's entities, min-max normalized.

    PageRank is seeded on the question's resolvable topic entities; with none
    resolvable the teleport falls back to the global uniform distribution.
    Entities missing from the graph contribute rank 0.
    """
    if not paths:
        raise ValueError("score_pagerank requires at least one path")
    seeds = [t for t in q.topic_entities if g.has_entity(t)]
    ranks = personalized_pagerank(g, seeds=seeds)
    raw = []
    for p in paths:
        vals = [float(ranks.scores[g.entity_id(e)]) if g.has_entity(e) else 0.0 for e in p.entities]
        raw.append(sum(vals) / len(vals))
    normalized = minmax_normalize(raw)
    return [ScoredPath(p, s, "pagerank") for p, s in zip(paths, normalized)]


def score_external(result: RetrievalResult) -> list[ScoredPath]:
    """Wrap an external retriever's own ranking scores, min-max normalized."""
    if result.external_scores is None:
        raise ValueError(f"result for {result.question_id!r} carries no external scores")
    normalized = minmax_normalize([max(s, 0.0) for s in result.external_scores])
    return [ScoredPath(p, s, "external") for p, s in zip(result.paths, normalized)]

"""Metrics and analyses: Hit/F1 scoring, category breakdown, path-count and
attention analyses, and the seeded synthetic noise injector.

Answer matching is exact after normalization (lowercase, trim, collapse
whitespace); macro averages are reported as percentages.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .kg import KnowledgeGraph
from .retrieval import Path, Question, RetrievalResult, load_questions, verbalize, with_paths
from .scoring import ScoredPath
from .text import normalize

logger = logging.getLogger(__name__)

CATEGORIES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class MetricResult:
    hit: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalRecord:
    question_id: str
    predicted: tuple[str, ...]
    gold: tuple[str, ...]
    hit: int
    f1: float
    precision: float
    recall: float
    n_paths_retrieved: int = 0


@dataclass(frozen=True)
class RunSummary:
    """Macro-averaged metrics as percentages in [0,100]."""

    n_questions: int
    hit_pct: float
    f1_pct: float
    precision_pct: float
    recall_pct: float

    def as_table(self) -> str:
        return (
            f"{'questions':>10}  {'Hit':>7}  {'F1':>7}  {'Prec':>7}  {'Rec':>7}\n"
            f"{self.n_questions:>10}  {self.hit_pct:>7.2f}  {self.f1_pct:>7.2f}  "
            f"{self.precision_pct:>7.2f}  {self.recall_pct:>7.2f}"
        )

    def as_csv(self) -> str:
        return (
            "n_questions,hit,f1,precision,recall\n"
            f"{self.n_questions},{self.hit_pct:.2f},{self.f1_pct:.2f},"
            f"{self.precision_pct:.2f},{self.recall_pct:.2f}\n"
        )


def score_question(predicted: Sequence[str], gold: Sequence[str]) -> MetricResult:
    """Set Hit/precision/recall/F1 after normalization and dedup of both sides."""
    gold_set = {normalize(g) for g in gold if normalize(g)}
    if not gold_set:
        raise ValueError("gold answers must be nonempty")
    pred_set = {normalize(p) for p in predicted if normalize(p)}
    inter = len(pred_set & gold_set)
    hit = 1 if inter else 0
    precision = inter / len(pred_set) if pred_set else 0.0
    recall = inter / len(gold_set)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return MetricResult(hit=hit, precision=precision, recall=recall, f1=f1)


def categorize(f1_rag: float, f1_llm: float) -> str:
    """Four-way outcome comparison of with-retrieval vs standalone F1.

    D: both zero. B: retrieval strictly better. C: standalone strictly
    better. A: equal and nonzero (both correct to the same degree).
    """
    if not (0.0 <= f1_rag <= 1.0 and 0.0 <= f1_llm <= 1.0):
        raise ValueError(f"f1 values must be in [0,1], got ({f1_rag}, {f1_llm})")
    if f1_rag == 0.0 and f1_llm == 0.0:
        return "D"
    if f1_rag > f1_llm:
        return "B"
    if f1_llm > f1_rag:
        return "C"
    return "A"


@dataclass(frozen=True)
class CategoryBreakdown:
    counts: dict
    total: int

    @property
    def percentages(self) -> dict:
        if self.total == 0:
            return {c: 0.0 for c in CATEGORIES}
        return {c: 100.0 * self.counts.get(c, 0) / self.total for c in CATEGORIES}

    def as_csv(self) -> str:
        lines = ["category,count,percent"]
        pct = self.percentages
        for c in CATEGORIES:
            lines.append(f"{c},{self.counts.get(c, 0)},{pct[c]:.2f}")
        lines.append(f"total,{self.total},100.00")
        return "\n".join(lines) + "\n"


def breakdown(categories: Iterable[str]) -> CategoryBreakdown:
    counts = {c: 0 for c in CATEGORIES}
    total = 0
    for c in categories:
        if c not in counts:
            raise ValueError(f"unknown category {c!r}")
        counts[c] += 1
        total += 1
    return CategoryBreakdown(counts=counts, total=total)


@dataclass(frozen=True)
class PathCountBin:
    bin_center: float
    mean_f1: float | None
    smoothed_f1: float | None
    n: int


def analyze_path_count(
    records: Sequence[tuple[int, float]], n_bins: int, window: int = 3
) -> list[PathCountBin]:
    """Bin per-question F1 by retrieved-path count and smooth the bin means.

    Bins are equal-width over the observed count range; the smoothed value is
    a centered moving average of width `window` over occupied bins (edges use
    whatever neighbors exist). Empty bins keep n=0 and no mean.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if not records:
        raise ValueError("analyze_path_count requires at least one record")
    counts = [r[0] for r in records]
    lo, hi = min(counts), max(counts)
    if lo == hi:
        mean = sum(r[1] for r in records) / len(records)
        return [PathCountBin(bin_center=float(lo), mean_f1=mean, smoothed_f1=mean, n=len(records))]
    width = (hi - lo) / n_bins
    sums = [0.0] * n_bins
    ns = [0] * n_bins
    for n_paths, f1 in records:
        idx = min(int((n_paths - lo) / width), n_bins - 1)
        sums[idx] += f1
        ns[idx] += 1
    means: list[float | None] = [sums[i] / ns[i] if ns[i] else None for i in range(n_bins)]
    half = max(window, 1) // 2
    out = []
    for i in range(n_bins):
        neighborhood = [m for m in means[max(0, i - half): i + half + 1] if m is not None]
        smoothed = sum(neighborhood) / len(neighborhood) if neighborhood else None
        center = lo + width * (i + 0.5)
        out.append(PathCountBin(bin_center=center, mean_f1=means[i], smoothed_f1=smoothed, n=ns[i]))
    return out


def path_count_csv(bins: Sequence[PathCountBin]) -> str:
    lines = ["bin_center,mean_f1,smoothed_f1,n"]
    for b in bins:
        mean = f"{b.mean_f1:.6f}" if b.mean_f1 is not None else ""
        smoothed = f"{b.smoothed_f1:.6f}" if b.smoothed_f1 is not None else ""
        lines.append(f"{b.bin_center:.3f},{mean},{smoothed},{b.n}")
    return "\n".join(lines) + "\n"


def path_contains_gold(path: Path, gold_answers: Sequence[str]) -> bool:
    """True when any normalized gold answer equals an entity on the path."""
    gold = {normalize(g) for g in gold_answers}
    return any(normalize(e) in gold for e in path.entities)


def analyze_attention_by_gold(
    scored: Sequence[tuple[ScoredPath, bool]],
) -> tuple[float | None, float | None]:
    """Mean score of gold-bearing vs non-gold paths; an absent group is None."""
    gold_scores = [sp.score for sp, has_gold in scored if has_gold]
    other_scores = [sp.score for sp, has_gold in scored if not has_gold]
    mean_gold = sum(gold_scores) / len(gold_scores) if gold_scores else None
    mean_other = sum(other_scores) / len(other_scores) if other_scores else None
    return mean_gold, mean_other


@dataclass(frozen=True)
class NoiseConfig:
    n_noise: int = 30
    seed: int = 0
    corrupt_fraction: float = 0.5  # remainder is random-walk noise

    def __post_init__(self) -> None:
        if self.n_noise < 0:
            raise ValueError(f"n_noise must be >= 0, got {self.n_noise}")
        if not 0.0 <= self.corrupt_fraction <= 1.0:
            raise ValueError(f"corrupt_fraction must be in [0,1], got {self.corrupt_fraction}")


def inject_noise(
    g: KnowledgeGraph,
    result: RetrievalResult,
    cfg: NoiseConfig,
    gold_answers: Sequence[str] = (),
) -> RetrievalResult:
    """Append synthetic noise paths: corrupted tails and random walks.

    corrupt_tail clones a retrieved path and swaps its final entity for a
    random non-gold entity (wrong information); random_walk emits a fresh
    up-to-2-hop walk from a random entity (irrelevant information). Original
    paths and their order are untouched; output is deterministic per seed.
    """
    if g.n_entities == 0:
        raise ValueError("graph is empty")
    if cfg.n_noise == 0:
        return result
    rng = random.Random(cfg.seed)
    n_corrupt = round(cfg.n_noise * cfg.corrupt_fraction)
    if not result.paths:
        n_corrupt = 0  # nothing to corrupt; use walks for the whole budget
    n_walk = cfg.n_noise - n_corrupt

    gold = {normalize(a) for a in gold_answers}
    noise: list[Path] = []
    origins: list[str] = []

    for _ in range(n_corrupt):
        base = result.paths[rng.randrange(len(result.paths))]
        candidates = [
            e for e in g.entities
            if normalize(e) not in gold and e != base.entities[-1]
        ]
        if not candidates:
            candidates = list(g.entities)
        new_tail = candidates[rng.randrange(len(candidates))]
        noise.append(Path(entities=base.entities[:-1] + (new_tail,), relations=base.relations))
        origins.append("noise:corrupt_tail")

    for _ in range(n_walk):
        ents: list[int] = []
        rels: list[int] = []
        for _attempt in range(10 * g.n_entities):
            start = rng.randrange(g.n_entities)
            if g.out_edges(start):
                ents = [start]
                break
        if not ents:  # graph with triples always has an out-edge somewhere
            start = g.triples[rng.randrange(g.n_triples)].head
            ents = [start]
        for _hop in range(2):
            edges = g.out_edges(ents[-1])
            if not edges:
                break
            rel, nxt = edges[rng.randrange(len(edges))]
            rels.append(rel)
            ents.append(nxt)
        noise.append(Path(
            entities=tuple(g.entities[e] for e in ents),
            relations=tuple(g.relations[r] for r in rels),
        ))
        origins.append("noise:random_walk")

    base_origins = result.path_origins or tuple("retrieved" for _ in result.paths)
    return with_paths(
        result,
        paths=result.paths + tuple(noise),
        origins=base_origins + tuple(origins),
    )


def load_predictions(path: str | FsPath) -> dict[str, dict]:
    """Read a predictions JSONL file keyed by question id; duplicate ids are an error."""
    path = FsPath(path)
    rows: dict[str, dict] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            qid = obj.get("question_id")
            if not isinstance(qid, str) or not qid:
                raise ValueError(f"{path}:{lineno}: question_id must be a non-empty string")
            if qid in rows:
                raise ValueError(f"{path}:{lineno}: duplicate prediction for question id {qid!r}")
            answers = obj.get("answers", [])
            if not isinstance(answers, list):
                raise ValueError(f"{path}:{lineno}: answers must be a list")
            rows[qid] = obj
    return rows


def evaluate_records(questions: Sequence[Question], predictions: dict[str, dict]) -> tuple[RunSummary, list[EvalRecord]]:
    """Score every dataset question; absent predictions count as empty."""
    records: list[EvalRecord] = []
    for q in questions:
        if not q.gold_answers:
            raise ValueError(f"question {q.id!r} has no gold answers; cannot evaluate")
        row = predictions.get(q.id, {})
        predicted = tuple(str(a) for a in row.get("answers", []))
        metrics = score_question(predicted, q.gold_answers)
        records.append(EvalRecord(
            question_id=q.id,
            predicted=predicted,
            gold=q.gold_answers,
            hit=metrics.hit,
            f1=metrics.f1,
            precision=metrics.precision,
            recall=metrics.recall,
            n_paths_retrieved=int(row.get("n_paths", 0)),
        ))
    n = len(records)
    if n == 0:
        raise ValueError("dataset has no questions")
    summary = RunSummary(
        n_questions=n,
        hit_pct=100.0 * sum(r.hit for r in records) / n,
        f1_pct=100.0 * sum(r.f1 for r in records) / n,
        precision_pct=100.0 * sum(r.precision for r in records) / n,
        recall_pct=100.0 * sum(r.recall for r in records) / n,
    )
    return summary, records


def evaluate_run(dataset_path: str | FsPath, predictions_path: str | FsPath) -> tuple[RunSummary, list[EvalRecord]]:
    """File-level wrapper: dataset JSONL + predictions JSONL to summary and records."""
    questions = load_questions(dataset_path)
    predictions = load_predictions(predictions_path)
    unknown = set(predictions) - {q.id for q in questions}
    if unknown:
        logger.warning("predictions contain %d unknown question ids (ignored)", len(unknown))
    return evaluate_records(questions, predictions)

"""Candidate path production: bounded search over the KG or ingest of external retriever output.

The built-in retriever is an exhaustive bounded search over out-edges, so
desk-scale runs are deterministic; learned retrievers plug in through the
retrieved-paths JSONL format instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath

from .kg import KnowledgeGraph

logger = logging.getLogger(__name__)

SEPARATOR = " → "  # " → "


class DatasetError(ValueError):
    """A dataset or retrieved-paths file could not be parsed."""


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    topic_entities: tuple[str, ...] = ()
    gold_answers: tuple[str, ...] = ()


@dataclass(frozen=True)
class Path:
    """An entity-relation chain; n relations link n+1 entities.

    n = 0 encodes a bare entity mention; n = 1 is a single triple.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.entities) != len(self.relations) + 1:
            raise ValueError(
                f"path needs len(entities) == len(relations)+1, got "
                f"{len(self.entities)} entities and {len(self.relations)} relations"
            )

    @property
    def hops(self) -> int:
        return len(self.relations)


@dataclass(frozen=True)
class RetrievalResult:
    question_id: str
    paths: tuple[Path, ...]
    source: str  # "builtin" | "ingested"
    retriever_name: str
    external_scores: tuple[float, ...] | None = None
    path_origins: tuple[str, ...] | None = None  # provenance tags, parallel to paths
    no_anchor: bool = False


def verbalize(p: Path) -> str:
    """Entities and relations joined with arrows; a bare entity is just its name."""
    parts: list[str] = [p.entities[0]]
    for rel, ent in zip(p.relations, p.entities[1:]):
        parts.append(rel)
        parts.append(ent)
    return SEPARATOR.join(parts)


def load_questions(path: str | FsPath) -> list[Question]:
    """Load a dataset JSONL file; ids must be non-empty and unique."""
    path = FsPath(path)
    questions: list[Question] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                qid = obj["id"]
                text = obj["question"]
            except (TypeError, KeyError) as exc:
                raise DatasetError(f"{path}:{lineno}: missing key {exc}") from None
            if not isinstance(qid, str) or not qid:
                raise DatasetError(f"{path}:{lineno}: id must be a non-empty string")
            if qid in seen_ids:
                raise DatasetError(f"{path}:{lineno}: duplicate question id {qid!r}")
            seen_ids.add(qid)
            questions.append(
                Question(
                    id=qid,
                    text=text,
                    topic_entities=tuple(obj.get("topic_entities", ())),
                    gold_answers=tuple(obj.get("answers", ())),
                )
            )
    return questions


def retrieve_paths(g: KnowledgeGraph, q: Question, max_hops: int, max_paths: int) -> RetrievalResult:
    """All simple paths from the question's topic entities, up to max_hops out-steps.

    Paths are produced breadth-first (shorter hops first) and within one hop
    count sorted by verbalization, then truncated to max_paths. Topic
    entities missing from the graph are skipped with a warning; if none
    resolve, the result is empty and flagged no_anchor.
    """
    if not 1 <= max_hops <= 4:
        raise ValueError(f"max_hops must be in [1,4], got {max_hops}")
    if max_paths < 1:
        raise ValueError(f"max_paths must be >= 1, got {max_paths}")

    anchors: list[int] = []
    for name in q.topic_entities:
        if g.has_entity(name):
            anchors.append(g.entity_id(name))
        else:
            logger.warning("question %s: topic entity %r not in graph, skipped", q.id, name)
    if not anchors:
        return RetrievalResult(q.id, (), source="builtin", retriever_name="builtin", no_anchor=True)

    collected: list[Path] = []
    seen: set[str] = set()
    # frontier entries: (entity ids on the path, relation ids on the path)
    frontier: list[tuple[tuple[int, ...], tuple[int, ...]]] = [((a,), ()) for a in anchors]
    for _hop in range(max_hops):
        level: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
        for ents, rels in frontier:
            for rel, nxt in g.out_edges(ents[-1]):
                if nxt in ents:  # simple paths only
                    continue
                level.append((ents + (nxt,), rels + (rel,)))
        level_paths = [
            Path(
                entities=tuple(g.entities[e] for e in ents),
                relations=tuple(g.relations[r] for r in rels),
            )
            for ents, rels in level
        ]
        for p in sorted(level_paths, key=verbalize):
            v = verbalize(p)
            if v not in seen:
                seen.add(v)
                collected.append(p)
        if len(collected) >= max_paths or not level:
            break
        frontier = level
    return RetrievalResult(
        question_id=q.id,
        paths=tuple(collected[:max_paths]),
        source="builtin",
        retriever_name="builtin",
    )


def ingest_paths(path: str | FsPath, retriever_name: str = "external") -> list[RetrievalResult]:
    """Parse a retrieved-paths JSONL file into one RetrievalResult per question id.

    Rows are {"question_id", "entities", "relations", "score"?}; paths are
    deduplicated by verbalized form (first occurrence wins). Length-mismatched
    rows fail with their line number.
    """
    path = FsPath(path)
    order: list[str] = []
    by_id: dict[str, list[Path]] = {}
    scores: dict[str, list[float]] = {}
    seen: dict[str, set[str]] = {}
    any_score = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                qid = obj["question_id"]
                entities = tuple(obj["entities"])
                relations = tuple(obj.get("relations", ()))
            except (TypeError, KeyError) as exc:
                raise DatasetError(f"{path}:{lineno}: missing key {exc}") from None
            if len(entities) != len(relations) + 1:
                raise DatasetError(
                    f"{path}:{lineno}: {len(entities)} entities need {len(entities) - 1} "
                    f"relations, got {len(relations)}"
                )
            p = Path(entities=entities, relations=relations)
            v = verbalize(p)
            if qid not in by_id:
                order.append(qid)
                by_id[qid] = []
                scores[qid] = []
                seen[qid] = set()
            if v in seen[qid]:
                continue
            seen[qid].add(v)
            by_id[qid].append(p)
            raw_score = obj.get("score")
            if raw_score is not None:
                any_score = True
            scores[qid].append(float(raw_score) if raw_score is not None else 0.0)

    results = []
    for qid in order:
        results.append(
            RetrievalResult(
                question_id=qid,
                paths=tuple(by_id[qid]),
                source="ingested",
                retriever_name=retriever_name,
                external_scores=tuple(scores[qid]) if any_score else None,
            )
        )
    return results


def with_paths(result: RetrievalResult, paths: tuple[Path, ...], origins: tuple[str, ...] | None) -> RetrievalResult:
    """Copy of result with replaced paths and provenance (used by the noise injector)."""
    return replace(result, paths=paths, path_origins=origins, external_scores=None)

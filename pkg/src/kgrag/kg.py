"""In-memory knowledge graph with interned vocabularies and PageRank.

Entities and relations are interned to dense integer ids so that a few
hundred thousand triples stay cheap; every user-facing call accepts and
returns the original strings. The graph is immutable once built and safe
for unrestricted concurrent reads.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Iterable, Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

GRAPH_FORMATS = ("tsv", "triples-jsonl")


class GraphFormatError(ValueError):
    """A graph file could not be parsed."""


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class PageRankVector:
    """Stationary distribution over entity ids (index = dense entity id)."""

    scores: np.ndarray
    damping: float
    iterations_run: int
    converged: bool


class KnowledgeGraph:
    """Directed labeled multigraph over interned entity/relation vocabularies.

    Duplicate input triples are dropped (the count is kept for auditing).
    Treat instances as immutable after construction.
    """

    def __init__(self, rows: Iterable[tuple[str, str, str]]):
        self._entity_ids: dict[str, int] = {}
        self._relation_ids: dict[str, int] = {}
        entities: list[str] = []
        relations: list[str] = []
        triples: list[Triple] = []
        seen: set[tuple[int, int, int]] = set()
        dropped = 0

        def intern(name: str, table: dict[str, int], names: list[str]) -> int:
            idx = table.get(name)
            if idx is None:
                idx = len(names)
                table[name] = idx
                names.append(name)
            return idx

        for head, relation, tail in rows:
            h = intern(head, self._entity_ids, entities)
            r = intern(relation, self._relation_ids, relations)
            t = intern(tail, self._entity_ids, entities)
            key = (h, r, t)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            triples.append(Triple(h, r, t))

        self.entities: tuple[str, ...] = tuple(entities)
        self.relations: tuple[str, ...] = tuple(relations)
        self.triples: tuple[Triple, ...] = tuple(triples)
        self.duplicates_dropped = dropped

        out_index: list[list[tuple[int, int]]] = [[] for _ in entities]
        in_index: list[list[tuple[int, int]]] = [[] for _ in entities]
        for t in triples:
            out_index[t.head].append((t.relation, t.tail))
            in_index[t.tail].append((t.relation, t.head))
        self._out_index = tuple(tuple(adj) for adj in out_index)
        self._in_index = tuple(tuple(adj) for adj in in_index)

        # Flat edge arrays for PageRank; built once, reused per call.
        if triples:
            self._src = np.fromiter((t.head for t in triples), dtype=np.int64, count=len(triples))
            self._dst = np.fromiter((t.tail for t in triples), dtype=np.int64, count=len(triples))
        else:
            self._src = np.empty(0, dtype=np.int64)
            self._dst = np.empty(0, dtype=np.int64)
        self._out_degree = np.bincount(self._src, minlength=len(entities)).astype(np.float64)

    # -- vocabulary --------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    def has_entity(self, name: str) -> bool:
        return name in self._entity_ids

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise KeyError(f"unknown entity: {name!r}") from None

    def stats(self) -> dict[str, int]:
        return {
            "entities": self.n_entities,
            "relations": self.n_relations,
            "triples": self.n_triples,
            "duplicates_dropped": self.duplicates_dropped,
        }

    # -- adjacency ---------------------------------------------------------

    def out_edges(self, entity_id: int) -> tuple[tuple[int, int], ...]:
        return self._out_index[entity_id]

    def in_edges(self, entity_id: int) -> tuple[tuple[int, int], ...]:
        return self._in_index[entity_id]

    def iter_triples(self) -> Iterator[tuple[str, str, str]]:
        for t in self.triples:
            yield self.entities[t.head], self.relations[t.relation], self.entities[t.tail]


def neighbors(g: KnowledgeGraph, entity: str, direction: str = "out") -> list[tuple[str, str]]:
    """Adjacent (relation, entity) string pairs, sorted by (relation, entity).

    direction: "out" follows head->tail edges, "in" the reverse, "both" merges
    the two (exact duplicates collapsed).
    """
    if direction not in ("out", "in", "both"):
        raise ValueError(f"direction must be out, in or both, got {direction!r}")
    eid = g.entity_id(entity)
    pairs: set[tuple[int, int]] = set()
    if direction in ("out", "both"):
        pairs.update(g.out_edges(eid))
    if direction in ("in", "both"):
        pairs.update(g.in_edges(eid))
    named = [(g.relations[r], g.entities[e]) for r, e in pairs]
    named.sort()
    return named


def load_graph(path: str | FsPath, format: str = "tsv") -> KnowledgeGraph:
    """Load a graph from a TSV or triples-JSONL file.

    TSV rows are ``head<TAB>relation<TAB>tail`` with exactly two tabs and no
    escaping. JSONL rows are objects with string keys "head", "relation",
    "tail". Malformed rows fail with their 1-based line number.
    """
    if format not in GRAPH_FORMATS:
        raise ValueError(f"unknown graph format {format!r}; expected one of {GRAPH_FORMATS}")
    path = FsPath(path)
    rows: list[tuple[str, str, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if format == "tsv":
                parts = line.split("\t")
                if len(parts) != 3:
                    raise GraphFormatError(
                        f"{path}:{lineno}: expected head<TAB>relation<TAB>tail, got {len(parts)} fields"
                    )
                head, relation, tail = parts
            else:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise GraphFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from None
                try:
                    head, relation, tail = obj["head"], obj["relation"], obj["tail"]
                except (TypeError, KeyError):
                    raise GraphFormatError(
                        f'{path}:{lineno}: object must have string keys "head","relation","tail"'
                    ) from None
                if not all(isinstance(v, str) for v in (head, relation, tail)):
                    raise GraphFormatError(f"{path}:{lineno}: head/relation/tail must all be strings")
            if not head or not relation or not tail:
                raise GraphFormatError(f"{path}:{lineno}: empty head, relation or tail")
            rows.append((head, relation, tail))
    if not rows:
        raise GraphFormatError(f"{path}: empty graph")
    g = KnowledgeGraph(rows)
    logger.info(
        "loaded graph %s: %d entities, %d relations, %d triples (%d duplicates dropped)",
        path, g.n_entities, g.n_relations, g.n_triples, g.duplicates_dropped,
    )
    return g


def save_graph(g: KnowledgeGraph, path: str | FsPath, format: str = "tsv") -> None:
    """Write the graph back out in a loadable format (triples in build order)."""
    if format not in GRAPH_FORMATS:
        raise ValueError(f"unknown graph format {format!r}; expected one of {GRAPH_FORMATS}")
    path = FsPath(path)
    with path.open("w", encoding="utf-8") as fh:
        for head, relation, tail in g.iter_triples():
            if format == "tsv":
                fh.write(f"{head}\t{relation}\t{tail}\n")
            else:
                fh.write(json.dumps({"head": head, "relation": relation, "tail": tail}, ensure_ascii=False) + "\n")


def personalized_pagerank(
    g: KnowledgeGraph,
    seeds: Sequence[str] | set[str] = (),
    damping: float = 0.85,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PageRankVector:
    """Power iteration on the directed graph, teleporting to the seed set.

    Empty seeds mean a uniform teleport over all entities (global PageRank).
    Dangling-node mass is redistributed to the teleport distribution. Stops
    when the L1 change drops below tol or after max_iter sweeps.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must be in (0,1), got {damping}")
    n = g.n_entities
    if n == 0:
        raise ValueError("graph has no entities")

    teleport = np.zeros(n, dtype=np.float64)
    seed_list = sorted(set(seeds))
    if seed_list:
        for name in seed_list:
            teleport[g.entity_id(name)] = 1.0
        teleport /= teleport.sum()
    else:
        teleport[:] = 1.0 / n

    out_degree = g._out_degree
    src, dst = g._src, g._dst
    dangling = out_degree == 0.0
    safe_degree = np.where(dangling, 1.0, out_degree)

    x = teleport.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        per_edge = x / safe_degree
        nxt = np.zeros(n, dtype=np.float64)
        if len(src):
            np.add.at(nxt, dst, per_edge[src])
        dangling_mass = float(x[dangling].sum())
        nxt = damping * (nxt + dangling_mass * teleport) + (1.0 - damping) * teleport
        delta = float(np.abs(nxt - x).sum())
        x = nxt
        if delta < tol:
            converged = True
            break
    x = x / x.sum()
    return PageRankVector(scores=x, damping=damping, iterations_run=iterations, converged=converged)

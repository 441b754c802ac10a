import random

import numpy as np
import pytest

from kgrag.kg import (
    GraphFormatError,
    KnowledgeGraph,
    load_graph,
    neighbors,
    personalized_pagerank,
    save_graph,
)

from helpers import FIXTURES
from oracles import oracle_pagerank


def write_tsv(tmp_path, rows, name="g.tsv"):
    p = tmp_path / name
    p.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")
    return p


def random_graph(rng, max_nodes=200, max_edges=400):
    n = rng.randint(2, max_nodes)
    m = rng.randint(1, max_edges)
    rows = [
        (f"e{rng.randrange(n)}", f"r{rng.randrange(5)}", f"e{rng.randrange(n)}")
        for _ in range(m)
    ]
    return KnowledgeGraph(rows)


class TestLoad:
    def test_dedup_counts(self, tmp_path):
        p = write_tsv(tmp_path, [("a", "r", "b"), ("a", "r", "b"), ("b", "r", "c")])
        g = load_graph(p)
        assert g.n_triples == 2
        assert g.duplicates_dropped == 1

    def test_empty_file_is_an_error(self, tmp_path):
        p = tmp_path / "empty.tsv"
        p.write_text("", encoding="utf-8")
        with pytest.raises(GraphFormatError, match="empty graph"):
            load_graph(p)

    def test_appendix_graph_counts(self, appendix_graph):
        # the four institution/location facts touch five distinct entities
        assert appendix_graph.n_triples == 4
        assert appendix_graph.n_entities == 5
        assert appendix_graph.n_relations == 2

    def test_malformed_row_names_line(self, tmp_path):
        p = write_tsv(tmp_path, [("a", "r", "b")])
        with p.open("a", encoding="utf-8") as fh:
            fh.write("only\ttwo\n")
        with pytest.raises(GraphFormatError, match=":2"):
            load_graph(p)

    def test_jsonl_roundtrip_matches_tsv(self, tmp_path, appendix_graph):
        out = tmp_path / "g.jsonl"
        save_graph(appendix_graph, out, "triples-jsonl")
        g2 = load_graph(out, "triples-jsonl")
        assert sorted(g2.iter_triples()) == sorted(appendix_graph.iter_triples())

    def test_jsonl_malformed_row(self, tmp_path):
        p = tmp_path / "g.jsonl"
        p.write_text('{"head": "a", "relation": "r", "tail": "b"}\n{"head": "a"}\n', encoding="utf-8")
        with pytest.raises(GraphFormatError, match=":2"):
            load_graph(p, "triples-jsonl")

    def test_reserialize_roundtrip_random(self, tmp_path):
        rng = random.Random(7)
        g = random_graph(rng, max_nodes=30, max_edges=60)
        out = tmp_path / "round.tsv"
        save_graph(g, out, "tsv")
        g2 = load_graph(out, "tsv")
        assert sorted(g2.iter_triples()) == sorted(g.iter_triples())
        assert g2.n_triples == g.n_triples


class TestNeighbors:
    def test_no_edges_is_empty(self, appendix_graph):
        assert neighbors(appendix_graph, "United States of America", "out") == []

    def test_greeley_out_sorted(self, appendix_graph):
        assert neighbors(appendix_graph, "Greeley", "out") == [
            ("location.location.containedby", "Greeley Masonic Temple"),
            ("location.location.containedby", "United States of America"),
        ]

    def test_both_on_single_triple(self):
        g = KnowledgeGraph([("a", "r", "b")])
        assert neighbors(g, "a", "both") == [("r", "b")]
        assert neighbors(g, "b", "both") == [("r", "a")]

    def test_unknown_entity(self, appendix_graph):
        with pytest.raises(KeyError, match="unknown entity"):
            neighbors(appendix_graph, "Nowhere", "out")

    def test_every_head_sees_its_triple(self):
        rng = random.Random(11)
        g = random_graph(rng, max_nodes=40, max_edges=80)
        for head, rel, tail in g.iter_triples():
            assert (rel, tail) in neighbors(g, head, "out")


class TestPageRank:
    def test_cycle_is_uniform(self):
        g = KnowledgeGraph([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a")])
        pr = personalized_pagerank(g)
        assert pr.converged
        assert np.allclose(pr.scores, 1 / 3, atol=1e-6)

    def test_single_node_seeded(self):
        g = KnowledgeGraph([("a", "self", "a")])
        pr = personalized_pagerank(g, seeds={"a"})
        assert pr.scores[g.entity_id("a")] == pytest.approx(1.0)

    def test_two_node_seeded_matches_oracle(self):
        # frozen from the oracle (equals the closed form 0.15 / (1 - 0.85^2))
        g = KnowledgeGraph([("A", "r", "B")])
        pr = personalized_pagerank(g, seeds={"A"}, tol=1e-12, max_iter=500)
        assert pr.scores[g.entity_id("A")] == pytest.approx(0.5405405405405406, abs=1e-9)
        assert pr.scores[g.entity_id("B")] == pytest.approx(0.4594594594594595, abs=1e-9)
        assert pr.scores.sum() == pytest.approx(1.0, abs=1e-12)

    def test_damping_bounds(self, appendix_graph):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError, match="damping"):
                personalized_pagerank(appendix_graph, damping=bad)

    def test_unknown_seed_is_an_error(self, appendix_graph):
        with pytest.raises(KeyError):
            personalized_pagerank(appendix_graph, seeds={"Atlantis"})

    def test_random_graphs_sum_and_nonneg(self):
        rng = random.Random(23)
        for _ in range(30):
            g = random_graph(rng)
            seeds = set()
            if rng.random() < 0.5:
                seeds = {g.entities[rng.randrange(g.n_entities)]}
            pr = personalized_pagerank(g, seeds=seeds)
            assert abs(pr.scores.sum() - 1.0) < 1e-9
            assert (pr.scores >= 0).all()

    def test_deterministic(self):
        rng = random.Random(5)
        g = random_graph(rng, max_nodes=50, max_edges=120)
        a = personalized_pagerank(g, seeds={g.entities[0]})
        b = personalized_pagerank(g, seeds={g.entities[0]})
        assert np.array_equal(a.scores, b.scores)
        assert a.iterations_run == b.iterations_run

    def test_matches_bruteforce_oracle(self):
        rng = random.Random(97)
        for _ in range(5):
            n = rng.randint(2, 20)
            m = rng.randint(1, 40)
            rows = [(f"e{rng.randrange(n)}", "r", f"e{rng.randrange(n)}") for _ in range(m)]
            g = KnowledgeGraph(rows)
            seeds = {g.entities[0]} if rng.random() < 0.5 else set()
            pr = personalized_pagerank(g, seeds=seeds, tol=1e-12, max_iter=500)
            edges = [(t.head, t.tail) for t in g.triples]
            seed_ids = [g.entity_id(s) for s in seeds]
            expected = oracle_pagerank(g.n_entities, edges, seeds=seed_ids, tol=1e-12, max_iter=500)
            assert np.abs(pr.scores - np.array(expected)).max() < 1e-8

"""Tuple-graph construction: builder, ingest, weights, pruning."""

import math
import random

import numpy as np
import pytest

from embanks.graph import (BYTES_PER_EDGE, BYTES_PER_NODE, DataGraph,
                           ForeignKey, GraphBuilder, GraphError, IngestError,
                           IngestSpec, TableSpec, apply_remap,
                           assign_backward_weights, build_graph, degree,
                           estimate_memory, ingest, parse_schema,
                           prune_transitive)

from conftest import WEIGHT_GRID, random_graph
from oracles import dijkstra_oracle, graph_adjacency


def test_memory_estimate_reference_points():
    assert estimate_memory(1_000_000, 10_000_000) == 140_000_000
    assert estimate_memory(500_000, 5_000_000) == 70_000_000
    assert estimate_memory(0, 0) == 0
    assert estimate_memory(3, 7) == 3 * BYTES_PER_NODE + 7 * BYTES_PER_EDGE


def test_degree_matches_link_scan(rng):
    for _ in range(25):
        g = random_graph(rng, rng.randint(2, 30))
        out_deg = [0] * g.node_count
        in_deg = [0] * g.node_count
        for u, v, *_ in g.links():
            out_deg[u] += 1
            in_deg[v] += 1
        for n in range(g.node_count):
            assert degree(g, n, "out") == out_deg[n]
            assert degree(g, n, "in") == in_deg[n]
            span = len(g.slots(n))
            assert degree(g, n, "out") + degree(g, n, "in") == span


def test_degree_balanced_node_is_half_span():
    b = GraphBuilder()
    hub = b.add_node()
    for i in range(6):
        other = b.add_node()
        if i < 3:
            b.add_link(hub, other, 1.0, 1.0)
        else:
            b.add_link(other, hub, 1.0, 1.0)
    g = b.build()
    assert len(g.slots(hub)) == 6
    assert degree(g, hub, "out") == 3 == len(g.slots(hub)) // 2
    assert degree(g, hub, "in") == 3


def test_pair_slots_are_an_involution(rng):
    for _ in range(10):
        g = random_graph(rng, rng.randint(2, 25))
        g.validate()
        owner = np.repeat(np.arange(g.node_count), np.diff(g.adjacency_offset))
        for j in range(g.slot_count):
            b = int(g.pair_slot[j])
            assert int(g.pair_slot[b]) == j
            assert bool(g.edge_direction[j]) != bool(g.edge_direction[b])
            assert int(g.adjacent_nodes[j]) == int(owner[b])
            assert int(g.adjacent_nodes[b]) == int(owner[j])


def test_validate_rejects_broken_pairing(rng):
    g = random_graph(rng, 8)
    g.pair_slot[0] = 0
    with pytest.raises(GraphError):
        g.validate()


def test_validate_rejects_nonpositive_weight(rng):
    g = random_graph(rng, 8)
    g.edge_weight[3] = 0.0
    with pytest.raises(GraphError):
        g.validate()


def test_backward_weights_formula(rng):
    """Backward slot weight is max(ln(1 + fk in-degree of target), default)."""
    for _ in range(15):
        b = GraphBuilder()
        n = rng.randint(2, 20)
        for _ in range(n):
            b.add_node()
        links = []
        for _ in range(rng.randint(1, 3 * n)):
            u, v = rng.randrange(n), rng.randrange(n)
            if u == v:
                continue
            links.append((u, v))
            b.add_link(u, v, 1.0, 1.0)
        if not links:
            continue
        default = rng.choice([0.5, 1.0, 2.0])
        g = assign_backward_weights(b.build(), default)
        indeg = [0] * n
        for _, v in links:
            indeg[v] += 1
        # the backward slot of link u -> v points at u, so u's fk in-degree
        # sets its cost
        for u, v, w_fwd, w_bwd, _, _ in g.links():
            assert w_fwd == 1.0
            expected = np.float32(max(math.log1p(indeg[u]), default))
            assert np.float32(w_bwd) == expected


# --- ingest -----------------------------------------------------------------


SCHEMA = """\
# people and places
table person text=name prestige=fame
table city text=city,state
table visit
fk person.home -> city.id
fk visit.who -> person.id
fk visit.where -> city.id
default_weight 1.0
"""


def _write_corpus(tmp_path):
    (tmp_path / "schema.txt").write_text(SCHEMA)
    (tmp_path / "person.tsv").write_text(
        "id\tname\tfame\thome\n"
        "p1\talice\t2.5\tc1\n"
        "p2\tbob\t0.5\tc9\n")
    (tmp_path / "city.tsv").write_text(
        "id\tcity\tstate\n"
        "c1\tspringfield\til\n"
        "c2\tshelbyville\til\n")
    (tmp_path / "visit.tsv").write_text(
        "id\twho\twhere\n"
        "v1\tp1\tc2\n"
        "v2\tp2\tc1\n"
        "v3\t\tc1\n"
        "v4\tp9\tc2\n")
    return tmp_path


def test_ingest_small_corpus(tmp_path):
    corpus = _write_corpus(tmp_path)
    spec = parse_schema(corpus / "schema.txt")
    result = ingest(spec, corpus)
    g, meta = result.graph, result.meta

    assert g.node_count == 8  # 2 person + 2 city + 4 visit
    assert meta.node_key == ["p1", "p2", "c1", "c2", "v1", "v2", "v3", "v4"]
    assert meta.node_text[:4] == ["alice", "bob", "springfield il",
                                  "shelbyville il"]
    assert meta.relation_names == ["person", "city", "visit"]
    assert list(meta.node_relation) == [0, 0, 1, 1, 2, 2, 2, 2]

    links = {(u, v) for u, v, *_ in g.links()}
    # p2's home is dangling, v3's who is empty, v4's who is dangling
    assert links == {(0, 2), (4, 0), (4, 3), (5, 1), (5, 2), (6, 2), (7, 3)}
    assert len(result.warnings) == 2
    assert any("c9" in w for w in result.warnings)
    assert any("p9" in w for w in result.warnings)

    # explicit prestige wins; everyone else gets fk in-degree
    assert g.prestige[0] == np.float32(2.5)
    assert g.prestige[1] == np.float32(0.5)
    assert g.prestige[2] == 3.0  # c1: person home + v2 + v3
    assert g.prestige[3] == 2.0  # c2: v1 + v4
    assert all(g.prestige[i] == 0.0 for i in (4, 5, 6, 7))


def test_ingest_duplicate_keys_first_wins(tmp_path):
    (tmp_path / "schema.txt").write_text(
        "table a text=t\ntable b text=t\nfk b.ref -> a.id\n")
    (tmp_path / "a.tsv").write_text("id\tt\nx\tfirst\nx\tsecond\n")
    (tmp_path / "b.tsv").write_text("id\tt\tref\nb1\thello\tx\n")
    result = ingest(parse_schema(tmp_path / "schema.txt"), tmp_path)
    links = list(result.graph.links())
    assert len(links) == 1
    assert links[0][:2] == (2, 0)


def test_parse_schema_errors(tmp_path):
    def parse(text):
        p = tmp_path / "s.txt"
        p.write_text(text)
        return parse_schema(p)

    with pytest.raises(IngestError):
        parse("fk a.b -> c.d\n")  # no tables
    with pytest.raises(IngestError):
        parse("table a\nfk a.b c.d\n")  # missing arrow
    with pytest.raises(IngestError):
        parse("table a colour=red\n")  # unknown option
    with pytest.raises(IngestError):
        parse("grable a\n")  # unknown directive
    with pytest.raises(IngestError):
        parse("table a\ndefault_weight heavy\n")  # non-numeric

    spec = parse("table a text=x,y prestige=p\ndefault_weight 2.5\n")
    assert spec.tables[0].text_columns == ("x", "y")
    assert spec.tables[0].prestige_column == "p"
    assert spec.forward_weight_default == 2.5


def test_tsv_errors(tmp_path):
    (tmp_path / "schema.txt").write_text("table a text=t\n")
    spec = parse_schema(tmp_path / "schema.txt")
    with pytest.raises(IngestError, match="missing data file"):
        ingest(spec, tmp_path)
    (tmp_path / "a.tsv").write_text("id\tt\nrow1\tone\ttoo-many\n")
    with pytest.raises(IngestError, match="a.tsv:2"):
        ingest(spec, tmp_path)
    (tmp_path / "a.tsv").write_text("")
    with pytest.raises(IngestError, match="header"):
        ingest(spec, tmp_path)
    (tmp_path / "a.tsv").write_text("id\tt\nr1\tok\n")
    (tmp_path / "schema.txt").write_text("table a text=missing\n")
    with pytest.raises(IngestError, match="missing"):
        ingest(parse_schema(tmp_path / "schema.txt"), tmp_path)


# --- pruning ----------------------------------------------------------------


def _spec_with_textless(n_relations, textless):
    tables = [TableSpec(f"r{i}", () if i in textless else ("t",), None)
              for i in range(n_relations)]
    return IngestSpec(tables, [], 1.0)


def test_prune_two_link_composition():
    """A key-only node between two neighbors becomes one composed link."""
    b = GraphBuilder()
    a = b.add_node(1.0, 0)
    w = b.add_node(0.0, 1)   # relation 1 is key-only
    c = b.add_node(1.0, 0)
    b.add_link(w, a, 1.0, 2.0)
    b.add_link(w, c, 4.0, 8.0)
    g, remap = prune_transitive(b.build(), _spec_with_textless(2, {1}))

    assert g.node_count == 2
    assert remap[a] == 0 and remap[c] == 1 and remap[w] == -1
    links = list(g.links())
    assert len(links) == 1
    # a->c costs backward(w->a) + forward(w->c) = 2 + 4; c->a costs 8 + 1
    a_out = {t: wt for _, t, wt in g.out_edges(int(remap[a]))}
    c_out = {t: wt for _, t, wt in g.out_edges(int(remap[c]))}
    assert a_out == {int(remap[c]): 6.0}
    assert c_out == {int(remap[a]): 9.0}


def test_prune_preserves_distances(rng):
    """Shortest distances between surviving nodes are unchanged.

    Weights are quarter multiples so all path sums are exact floats and the
    equality can be literal.
    """
    for _ in range(20):
        n = rng.randint(4, 14)
        b = GraphBuilder()
        types = [rng.choice([0, 1]) for _ in range(n)]
        for i in range(n):
            b.add_node(1.0, types[i])
        for i in range(1, n):
            t = rng.randrange(i)
            u, v = (i, t) if rng.random() < 0.5 else (t, i)
            b.add_link(u, v, rng.choice(WEIGHT_GRID), rng.choice(WEIGHT_GRID))
        for _ in range(n // 2):
            u, v = rng.randrange(n), rng.randrange(n)
            if u != v:
                b.add_link(u, v, rng.choice(WEIGHT_GRID),
                           rng.choice(WEIGHT_GRID))
        g = b.build()
        pruned, remap = prune_transitive(g, _spec_with_textless(2, {1}))

        survivors = [i for i in range(n) if types[i] == 0]
        assert [remap[i] >= 0 for i in range(n)] == \
               [types[i] == 0 for i in range(n)]
        before = graph_adjacency(g)
        after = graph_adjacency(pruned)
        for s in survivors:
            db = dijkstra_oracle(before, s)
            da = dijkstra_oracle(after, int(remap[s]))
            for t in survivors:
                expect = db.get(t)
                got = da.get(int(remap[t]))
                if expect is None:
                    assert got is None
                else:
                    assert got == expect, (s, t, expect, got)


def test_prune_skips_self_compositions():
    """Two links from a removed node to one neighbor breed no self-loop."""
    b = GraphBuilder()
    a = b.add_node(1.0, 0)
    w = b.add_node(0.0, 1)
    b.add_link(w, a, 1.0, 1.0)
    b.add_link(w, a, 2.0, 2.0)
    g, _ = prune_transitive(b.build(), _spec_with_textless(2, {1}))
    assert g.node_count == 1
    assert g.slot_count == 0


def test_prune_keeps_textual_relations_intact(rng):
    g = random_graph(rng, 12)
    pruned, remap = prune_transitive(g, _spec_with_textless(1, set()))
    assert pruned.node_count == g.node_count
    assert sorted((u, v, wf, wb) for u, v, wf, wb, _, _ in pruned.links()) == \
           sorted((u, v, wf, wb) for u, v, wf, wb, _, _ in g.links())
    assert list(remap) == list(range(g.node_count))


def test_apply_remap_drops_removed_nodes():
    from embanks.graph import NodeMeta
    meta = NodeMeta(["a", "b"], np.array([0, 1, 0], dtype=np.uint16),
                    ["x", "y", "z"], ["k1", "k2", "k3"])
    out = apply_remap(meta, np.array([0, -1, 1]))
    assert out.node_text == ["x", "z"]
    assert out.node_key == ["k1", "k3"]
    assert list(out.node_relation) == [0, 0]


def test_build_graph_pipeline(tmp_path):
    corpus = _write_corpus(tmp_path)
    spec = parse_schema(corpus / "schema.txt")
    g, meta, warnings = build_graph(spec, corpus)
    # visits are key-only and pruned away
    assert g.node_count == 4
    assert meta.node_key == ["p1", "p2", "c1", "c2"]
    assert len(warnings) == 2
    g.validate()
    # v1 composed person p1 with city c2, both directions present
    targets = {t for _, t, _ in g.out_edges(0)}
    assert 3 in targets and 2 in targets

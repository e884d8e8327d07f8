import itertools

import numpy as np
import pytest
from fractions import Fraction

from deltareg import graphs as G

SEEDS = [0x5EED, 0xBEEF, 0xACE5, 17, 99]


def random_bipartite(nl, nr, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(u, v) for u in range(nl) for v in range(nr) if rng.random() < p]
    return G.BipartiteGraph.from_edges(G.VertexClass("A", nl), G.VertexClass("B", nr), edges)


def test_density_complete_and_empty():
    a, b = G.VertexClass("A", 4), G.VertexClass("B", 4)
    assert G.density(G.BipartiteGraph.complete(a, b)) == 1
    assert G.density(G.BipartiteGraph.empty(a, b)) == 0


def test_density_exact_rational():
    g = random_bipartite(6, 7, 0.4, 3)
    assert G.density(g) == Fraction(g.edge_count(), 42)


@pytest.mark.parametrize("seed", SEEDS)
def test_codegree_matches_neighborhood_intersection(seed):
    g = random_bipartite(16, 16, 0.5, seed)
    rng = np.random.default_rng(seed + 1)
    for _ in range(10):
        v, w = rng.integers(0, 16, size=2)
        brute = len(set(g.neighbors(int(v)).tolist()) & set(g.neighbors(int(w)).tolist()))
        assert G.codegree(g, int(v), int(w)) == brute


def test_codegree_identity_and_zero():
    g = random_bipartite(8, 8, 0.5, 1)
    assert G.codegree(g, 3, 3) == len(g.neighbors(3))
    h = G.BipartiteGraph.from_edges(G.VertexClass("A", 4), G.VertexClass("B", 4), [(0, 0), (1, 1)])
    assert G.codegree(h, 0, 1) == 0


@pytest.mark.parametrize("seed", SEEDS)
def test_edges_between_matches_double_loop(seed):
    g = random_bipartite(12, 12, 0.45, seed)
    rng = np.random.default_rng(seed + 2)
    S = rng.choice(12, size=5, replace=False)
    T = rng.choice(12, size=7, replace=False)
    naive = sum(1 for u in S for v in T if g.has_edge(int(u), int(v)))
    assert G.edges_between(g, S, T) == naive
    assert G.edges_between(g, [], T) == 0
    assert G.edges_between(g, range(12), range(12)) == g.edge_count()


def test_edges_between_range_check():
    g = random_bipartite(4, 4, 0.5, 0)
    with pytest.raises(IndexError):
        G.edges_between(g, [5], [0])


def test_aux_graph_k2_isomorphic():
    cs = G.VertexClassSet([("V1", 3), ("V2", 4)])
    edges = [[0, 1], [2, 3], [1, 0]]
    h = G.KPartiteKGraph(cs, edges)
    for axis in (1, 2):
        av = G.aux_graph(h, axis)
        assert av.edge_count() == h.edge_count()
    a1 = G.aux_graph(h, 2)
    for (u, v) in [(0, 1), (2, 3), (1, 0)]:
        assert a1.graph.has_edge(u, v)


def test_aux_graph_single_edge_axis3():
    cs = G.VertexClassSet([("V1", 2), ("V2", 2), ("V3", 2)])
    h = G.KPartiteKGraph(cs, [[0, 1, 1]])
    av = G.aux_graph(h, 3)
    assert av.edge_count() == 1
    left = av.product.encode((0, 1))
    assert av.graph.has_edge(left, 1)


def test_aux_graph_axis_out_of_range():
    cs = G.VertexClassSet([("V1", 2), ("V2", 2)])
    h = G.KPartiteKGraph(cs, [[0, 0]])
    with pytest.raises(ValueError):
        G.aux_graph(h, 3)


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_aux_edge_count_invariant(axis):
    rng = np.random.default_rng(6)
    cs = G.VertexClassSet([("V1", 3), ("V2", 3), ("V3", 3)])
    edges = [t for t in itertools.product(range(3), repeat=3) if rng.random() < 0.4]
    h = G.KPartiteKGraph(cs, np.array(edges).reshape(-1, 3))
    assert G.aux_graph(h, axis).edge_count() == h.edge_count()


def test_lift_round_trip_enumerated():
    # 2x2x2 instance with 3 edges: tuple set checked by enumeration
    cs = G.VertexClassSet([("V1", 2), ("V2", 2), ("V3", 2)])
    h = G.KPartiteKGraph(cs, [[0, 0, 0], [0, 1, 1], [1, 1, 0]])
    av = G.aux_graph(h, 3)
    lifted = G.lift_graph_to_kgraph(av.graph, av.product)
    assert lifted == h
    expected = {(0, 0, 0), (0, 1, 1), (1, 1, 0)}
    got = {tuple(int(x) for x in row) for row in lifted.edges_arr}
    assert got == expected


def test_lift_empty():
    prod = G.ProductClass.of([G.VertexClass("V1", 2), G.VertexClass("V2", 2)])
    g = G.BipartiteGraph.empty(G.VertexClass(prod.name, prod.size), G.VertexClass("V3", 2))
    h = G.lift_graph_to_kgraph(g, prod)
    assert h.edge_count() == 0


@pytest.mark.parametrize("m", [1, 2, 3])
def test_blowup(m):
    g = random_bipartite(5, 6, 0.5, 8)
    bg = G.blowup(g, m)
    assert bg.edge_count() == m * m * g.edge_count()
    assert G.density(bg) == G.density(g)
    if m == 2:
        single = G.BipartiteGraph.from_edges(G.VertexClass("A", 1), G.VertexClass("B", 1), [(0, 0)])
        k22 = G.blowup(single, 2)
        assert k22.edge_count() == 4


def test_blowup_zero_rejected():
    g = random_bipartite(3, 3, 0.5, 0)
    with pytest.raises(ValueError):
        G.blowup(g, 0)


@pytest.mark.parametrize("seed", SEEDS)
def test_serialization_round_trips(seed):
    g = random_bipartite(10, 13, 0.37, seed)
    assert G.bipartite_from_binary(G.bipartite_to_binary(g)) == g
    assert G.bipartite_from_text(G.bipartite_to_text(g)) == g
    assert G.graph_hash(g) == G.graph_hash(G.bipartite_from_binary(G.bipartite_to_binary(g)))


def test_kgraph_text_round_trip():
    cs = G.VertexClassSet([("V1", 3), ("V2", 2), ("V3", 4)])
    h = G.KPartiteKGraph(cs, [[0, 0, 0], [2, 1, 3], [1, 1, 2]])
    assert G.kgraph_from_text(G.kgraph_to_text(h)) == h


def test_product_class_codec():
    prod = G.ProductClass.of([G.VertexClass("A", 3), G.VertexClass("B", 4), G.VertexClass("C", 2)])
    assert prod.size == 24
    for idx in range(24):
        assert prod.encode(prod.decode(idx)) == idx
    arr = np.arange(24)
    assert np.array_equal(prod.encode_array(prod.decode_array(arr)), arr)


def test_vertex_class_set_disjoint_contiguous():
    cs = G.VertexClassSet([("A", 3), ("B", 5)])
    assert cs.classes[0].offset == 0 and cs.classes[1].offset == 3
    assert cs.class_of(4) == 1
    with pytest.raises(ValueError):
        G.VertexClassSet([("A", 3), ("A", 2)])
    with pytest.raises(ValueError):
        G.VertexClass("X", 0)


def test_kgraph_binary_round_trip():
    cs = G.VertexClassSet([("V1", 3), ("V2", 2), ("V3", 4)])
    h = G.KPartiteKGraph(cs, [[0, 0, 0], [2, 1, 3], [1, 1, 2]])
    back = G.kgraph_from_binary(G.kgraph_to_binary(h))
    assert back == h
    assert [c.name for c in back.classes.classes] == ["V1", "V2", "V3"]
    empty = G.KPartiteKGraph(cs, np.empty((0, 3), dtype=np.int64))
    assert G.kgraph_from_binary(G.kgraph_to_binary(empty)) == empty


def test_aux_graph_empty_source():
    cs = G.VertexClassSet([("V1", 2), ("V2", 3), ("V3", 2)])
    h = G.KPartiteKGraph(cs, np.empty((0, 3), dtype=np.int64))
    for axis in (1, 2, 3):
        assert G.aux_graph(h, axis).edge_count() == 0

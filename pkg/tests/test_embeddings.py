import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapkit.conegeom import cone_formula
from gapkit.embeddings import (
    CONE_L1_LOWER, CONE_L1_UPPER, TRUNCATION_LOW, BudgetError, TreeMeasureError, certify_cone_l1,
    cone_l1_embed, good_tree_measure, helix, l1_distances, l1_half_snowflake, quotient_graph,
    snowflake_cone_embed, sparse_graph_l1, tau_embedding, tensor_identity, tensor_rows,
    tree_l1_coordinates, tree_polytope_measure, truncate_l1, truncation_ratios, walsh_distance,
    walsh_truncation,
)
from gapkit.embeddings import _tree_block
from gapkit.multigraph import GRID, GraphError, Multigraph, SimplicialPoint, cycle_graph, path_graph


def cube(k):
    return np.array(list(itertools.product([0, 1], repeat=k)))


def test_walsh_single_bit():
    V = walsh_truncation([[0], [1]], math.pi)
    assert l1_distances(V)[0, 1] == pytest.approx(math.pi * (1 - math.exp(-1 / math.pi)), abs=1e-12)
    assert l1_distances(V)[0, 1] == pytest.approx(0.85647, abs=1e-5)


@pytest.mark.parametrize("k", [1, 4, 8])
@pytest.mark.parametrize("M", [1.0, math.pi, 10.0])
def test_walsh_closed_form(k, M):
    Z = cube(k) if k <= 4 else np.random.default_rng(k).integers(0, 2, size=(40, k))
    V = walsh_truncation(Z, M)
    np.testing.assert_allclose(np.abs(V).sum(1), M, rtol=1e-12)
    h = np.abs(Z[:, None, :] - Z[None, :, :]).sum(-1)
    np.testing.assert_allclose(l1_distances(V), walsh_distance(h, M), atol=1e-10)


def test_walsh_weighted_and_budget():
    w = np.array([0.5, 2.0, 1.5])
    Z = cube(3)
    V = walsh_truncation(Z, 2.0, w)
    h = (np.abs(Z[:, None, :] - Z[None, :, :]) * w).sum(-1)
    np.testing.assert_allclose(l1_distances(V), walsh_distance(h, 2.0), atol=1e-12)
    with pytest.raises(BudgetError):
        walsh_truncation(np.zeros((2, 17), dtype=int), 1.0)
    with pytest.raises(ValueError):
        walsh_truncation([[0, 2]], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 20))
def test_truncation_bracket(seed, M):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 3)) * rng.uniform(0.1, 10)
    T = truncate_l1(X, M, 0.05)
    r = truncation_ratios(X, T)
    assert r.max() <= 1 + 1e-12
    assert r.min() >= TRUNCATION_LOW / 1.05 - 1e-12


def test_truncation_vectors_match_closed_form():
    X = np.random.default_rng(0).normal(size=(6, 2))
    T = truncate_l1(X, 3.0, 0.1)
    V = T.vectors()
    np.testing.assert_allclose(l1_distances(V), T.distances(), atol=1e-9)
    np.testing.assert_allclose(np.abs(V).sum(1), 3.0, rtol=1e-12)


def test_cone_l1_extreme_pairs():
    emb = cone_l1_embed([0.0, 1.0, 2.0], [[0.0], [5.0], [5.0]], eps=0.01)
    # cusp to a unit point, and two radii over one base point: both ratio pi
    assert emb.pair_distances(0, 1) / emb.cone_distances(0, 1) == pytest.approx(math.pi)
    assert emb.pair_distances(1, 2) / emb.cone_distances(1, 2) == pytest.approx(math.pi)


def test_cone_l1_vectors_match_closed_form():
    rng = np.random.default_rng(1)
    emb = cone_l1_embed(rng.uniform(0, 3, 8), rng.normal(size=(8, 2)), eps=0.05)
    i, j = np.triu_indices(8, 1)
    np.testing.assert_allclose(l1_distances(emb.vectors())[i, j], emb.pair_distances(i, j), atol=1e-9)


def test_cone_l1_ratio_bracket():
    rng = np.random.default_rng(2)
    n = 60
    radii = np.where(rng.random(n) < 0.1, 0.0, rng.exponential(2, n))
    emb = cone_l1_embed(radii, rng.normal(size=(n, 2)) * rng.uniform(0.01, 4, (n, 1)), eps=0.01)
    i, j = np.triu_indices(n, 1)
    rep = certify_cone_l1(emb, i, j)
    assert rep["upper_ok"] and rep["lower_ok"]
    assert rep["distortion"] <= CONE_L1_UPPER / CONE_L1_LOWER * 1.01


def test_helix_examples():
    H = helix([0.0, 1.0, 4.0], 0.5)
    D = np.sqrt(((H[:, None] - H[None, :]) ** 2).sum(-1))
    np.testing.assert_allclose([D[0, 1], D[0, 2], D[1, 2]], [1, 2, math.sqrt(3)], atol=1e-9)
    with pytest.raises(ValueError):
        helix([0.0], 0.0)


def test_tau_embedding_bracket():
    Y = np.random.default_rng(3).normal(size=(30, 2)) * 3
    T = tau_embedding(Y, 0.5)
    np.testing.assert_allclose(np.linalg.norm(T, axis=1), math.pi ** 0.5 / math.sqrt(2), rtol=1e-9)
    d = np.sqrt(((T[:, None] - T[None, :]) ** 2).sum(-1))
    e = np.sqrt(((Y[:, None] - Y[None, :]) ** 2).sum(-1))
    iu = np.triu_indices(30, 1)
    r = d[iu] / np.minimum(math.pi ** 0.5, e[iu])
    assert r.max() <= 1 + 1e-9 and r.min() >= math.sqrt(1 - 1 / math.e) - 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_tensor_identity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 3))
    x, y = rng.normal(size=(2, 4))
    lhs = float(np.sum((np.outer(a, x) - np.outer(b, y)) ** 2))
    assert lhs == pytest.approx(tensor_identity(a, b, x, y), rel=1e-9, abs=1e-9)
    assert tensor_rows(a[None], x[None]).shape == (1, 12)


def test_snowflake_cone_bounds():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(10, 2))
    dX = np.abs(X[:, None] - X[None, :]).sum(-1)
    f = l1_half_snowflake(X)
    radii = rng.exponential(1, 40)
    idx = rng.integers(10, size=40)
    rep = snowflake_cone_embed(radii, idx, dX, f, 0.5, 1.0)
    assert rep.upper_ok and rep.lower_ok
    V = rep.vectors
    D = np.sqrt(((V[:, None] - V[None, :]) ** 2).sum(-1))
    np.testing.assert_allclose(D, rep.distances, atol=1e-7)
    with pytest.raises(ValueError):
        snowflake_cone_embed(radii, idx, dX, 3 * f, 0.5, 1.0)


def test_half_snowflake_is_exact():
    X = np.random.default_rng(5).normal(size=(15, 3))
    f = l1_half_snowflake(X)
    d = np.sqrt(((f[:, None] - f[None, :]) ** 2).sum(-1))
    np.testing.assert_allclose(d, np.sqrt(l1_distances(X)), atol=1e-7)


def test_tree_measure_on_tree_is_the_tree():
    g = path_graph(6)
    dist = tree_polytope_measure(g, delta=0.5)
    assert len(dist) == 1 and dist.weights == [Fraction(1)]


@pytest.mark.parametrize("k", [3, 5, 8])
def test_cycle_marginals(k):
    dist = tree_polytope_measure(cycle_graph(k), delta=1 / (k - 1))
    assert dist.marginals() == [Fraction(k - 1, k)] * k


def test_theta_graph_lp_block():
    # two vertices joined by three paths of length 2
    g = Multigraph.from_edges(5, [(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)])
    # densest ratio |E(S)|/(|S|-1) is 6/4
    dist = tree_polytope_measure(g, delta=0.5)
    assert dist.info["precondition"] == "validated"
    assert sum(dist.weights) == 1
    assert min(dist.marginals()) >= Fraction(2, 3) - Fraction(1, 10 ** 9)
    assert dist.info["lp_blocks"] == 1
    with pytest.raises(TreeMeasureError):
        tree_polytope_measure(g, lower=0.9)


def test_product_coupling_matches_marginals():
    g = Multigraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])
    a = tree_polytope_measure(g, delta=0.5, coupling="product")
    b = tree_polytope_measure(g, delta=0.5)
    assert a.marginals() == b.marginals()
    assert len(a) == 9 and len(b) == 3


def test_tree_measure_rejects_bad_inputs():
    with pytest.raises(GraphError):
        tree_polytope_measure(Multigraph.from_edges(4, [(0, 1), (2, 3)]), delta=0.5)
    with pytest.raises(ValueError):
        tree_polytope_measure(cycle_graph(4))


def test_quotient_examples():
    g = Multigraph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    q = quotient_graph(g, 4)
    assert q.graph.n == 2 and len(q.graph.edge_instances) == 1
    t = path_graph(5)
    assert quotient_graph(t, 10).graph.n == 5
    # two triangles joined by a path of length 5
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (7, 9)]
    q = quotient_graph(Multigraph.from_edges(10, edges), 3.5)
    assert q.graph.n == 6 and len(q.cycles) == 2
    with pytest.raises(GraphError):
        quotient_graph(Multigraph.from_edges(10, edges), 5)


def test_good_tree_marginals():
    # triangles at both ends of a path, with a 7-cycle hanging off the middle
    path = [(k, k + 1) for k in range(2, 8)]
    loop = [(4, 11), (11, 12), (12, 13), (13, 14), (14, 6)]
    edges = [(0, 1), (1, 2), (0, 2)] + path + [(8, 9), (9, 10), (8, 10)] + loop
    g = Multigraph.from_edges(15, edges)
    delta = 0.1
    dist = good_tree_measure(g, delta)
    marg = dist.marginals()
    quo = dist.info["quotient"]
    on = np.zeros(len(marg), dtype=bool)
    for ce in quo.cycle_edges:
        on[ce] = True
        assert all(marg[e] == Fraction(2, 3) for e in ce)
    low = Fraction(1 - 3 * delta) / Fraction(1 + delta)
    assert all(marg[e] >= low - Fraction(1, 10 ** 9) for e in np.flatnonzero(~on))
    for T in dist.trees:
        for ce in quo.cycle_edges:
            assert len(np.intersect1d(T, ce)) == len(ce) - 1


def test_tree_coordinates_are_isometric():
    g = path_graph(7)
    X = tree_l1_coordinates(7, g.edge_instances, root=3)
    np.testing.assert_array_equal(l1_distances(X), np.abs(np.subtract.outer(range(7), range(7))))


def test_sparse_embedding_tree_input():
    rep = sparse_graph_l1(path_graph(20), delta=0.1, samples=60, seed=0)
    assert rep.trees == 1
    assert rep.distortion <= math.e / (math.e - 1) + 1e-6


def test_sparse_embedding_budget():
    g = cycle_graph(12)
    rep = sparse_graph_l1(g, delta=0.05, samples=40, seed=1)
    assert rep.distortion >= 1 and rep.fitted_C == pytest.approx(rep.distortion / (1 + 0.05 * rep.diam))
    with pytest.raises(TreeMeasureError):
        sparse_graph_l1(g, delta=0.05, samples=40, max_trees=2)


def test_cone_formula_used_by_embedding():
    emb = cone_l1_embed([1.0, 2.0], [[0.0], [1.0]])
    assert emb.cone_distances(0, 1) == pytest.approx(float(cone_formula(1.0, 1.0, 2.0)))


def lifted_tree_distances(g, tree, points, U, M):
    """Oracle: build the cut-open 1-complex explicitly and run Dijkstra."""
    edges = g.edge_instances
    H = nx.Graph()
    H.add_nodes_from(("v", v) for v in range(g.n))
    on = {}
    for i, p in enumerate(points):
        if p.vertex is None:
            on.setdefault(p.edge, []).append((p.offset / GRID, i))
    for e, (u, v) in enumerate(edges):
        marks = sorted(on.get(e, []))
        if e in tree:
            chain = [(0.0, ("v", u))] + [(a, ("p", i)) for a, i in marks] + [(1.0, ("v", v))]
            for (a, x), (b, y) in zip(chain, chain[1:]):
                H.add_edge(x, y, w=b - a)
        else:
            left = [(0.0, ("v", u))] + [(a, ("p", i)) for a, i in marks if a <= U[e]]
            right = [(a, ("p", i)) for a, i in marks if a > U[e]] + [(1.0, ("v", v))]
            for chain in (left, right):
                for (a, x), (b, y) in zip(chain, chain[1:]):
                    H.add_edge(x, y, w=b - a)
    key = [("v", p.vertex) if p.vertex is not None else ("p", i) for i, p in enumerate(points)]
    D = np.zeros((len(points), len(points)))
    for i, k in enumerate(key):
        dist = nx.single_source_dijkstra_path_length(H, k, weight="w")
        D[i] = [dist[x] for x in key]
    return walsh_distance(D, M)


def test_split_average_matches_sampled_splits():
    g = Multigraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
    E = g.edge_instances
    tree = [0, 1, 2, 3]
    rng = np.random.default_rng(0)
    pts = [SimplicialPoint.on_edge(4, 0.2), SimplicialPoint.on_edge(4, 0.7), SimplicialPoint.on_edge(5, 0.5),
           SimplicialPoint.on_edge(1, 0.3), SimplicialPoint.at_vertex(2)]
    phi, _ = _tree_block(g, np.array(tree), pts, 3.0, 3.0)
    samples = 3000
    acc = np.zeros_like(phi)
    for _ in range(samples):
        acc += lifted_tree_distances(g, tree, pts, rng.random(len(E)), 3.0)
    np.testing.assert_allclose(phi, acc / samples, atol=0.04)

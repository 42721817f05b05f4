import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gapkit.combinators import (
    IterationRecipe, averaging_constant, cesaro, cesaro_mean_matrix, edge_completion, iteration_m, replacement,
    select_base_graph, star_transform, zigzag, zigzag_iteration,
)
from gapkit.multigraph import GraphError, Multigraph, cycle_graph, loop_graph, validate
from gapkit.randgraph import pairing_rotation
from gapkit.spectral import extreme_eigenvalues, gamma_plus_line


def random_regular(n, d, seed):
    return Multigraph.from_rotation(pairing_rotation(n, d, np.random.default_rng(seed)))


def zigzag_matrix(g1, g2):
    """(I x B) P (I x B) with P the port permutation of Rot1 and B the normalized g2."""
    n1, d1, _ = g1.rot.shape
    idx = np.arange(n1 * d1)
    target = g1.rot[:, :, 0].ravel() * d1 + g1.rot[:, :, 1].ravel()
    P = sp.csr_matrix((np.ones(len(idx)), (idx, target)), shape=(n1 * d1,) * 2)
    B = sp.kron(sp.identity(n1), g2.dense() / g2.degree)
    return (B @ P @ B).toarray()


def test_zigzag_example_sizes():
    g1 = random_regular(10, 4, 0)
    z = zigzag(g1, cycle_graph(4, loops=True))
    assert z.n == 40 and z.degree == 9
    validate(z, 9)


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 12), st.sampled_from([3, 4, 5]), st.integers(0, 10_000))
def test_zigzag_matches_matrix_form(n, d, seed):
    if n * d % 2:
        n += 1
    g1 = random_regular(n, d, seed)
    g2 = cycle_graph(d, loops=True) if d % 2 else random_regular(d, 3, seed + 1)
    z = zigzag(g1, g2)
    np.testing.assert_allclose(z.dense() / z.degree, zigzag_matrix(g1, g2), atol=1e-12)


def test_zigzag_of_loop_graphs_is_loop_graph():
    z = zigzag(loop_graph(5, 3), loop_graph(3, 2))
    assert z.loops.sum() == z.n * 4


def test_zigzag_mismatch_rejected():
    with pytest.raises(GraphError):
        zigzag(random_regular(10, 4, 0), cycle_graph(5, loops=True))
    with pytest.raises(GraphError):
        zigzag(Multigraph.from_edges(3, [(0, 1), (1, 2), (0, 2)]), cycle_graph(3))


def test_replacement_example():
    g1 = random_regular(12, 9, 1)
    r = replacement(g1, cycle_graph(9))
    assert r.n == 108 and r.degree == 3
    validate(r, 3)


def test_replacement_port_shortage():
    with pytest.raises(GraphError):
        replacement(loop_graph(1, 2), cycle_graph(9))


def test_edge_completion_examples():
    c = edge_completion(cycle_graph(9), 3)
    assert c.degree == 3 and c.loops.tolist() == [1] * 9
    g = random_regular(8, 3, 2)
    assert (edge_completion(g, 3).mult != g.mult).count_nonzero() == 0
    with pytest.raises(GraphError):
        edge_completion(g, 2)


def test_edge_completion_gamma_factor_two():
    g = random_regular(16, 3, 4)
    while True:
        try:
            base = gamma_plus_line(g)
            break
        except GraphError:
            g = random_regular(16, 3, int(g.n + g.mult.sum()))
    assert gamma_plus_line(edge_completion(g, 7)) <= 2 * base + 1e-9


def test_cesaro_examples():
    g = random_regular(10, 3, 5)
    one = cesaro(g, 1)
    assert one.degree == 1 and one.loops.tolist() == [1] * 10
    two = cesaro(g, 2)
    assert two.degree == 6
    np.testing.assert_array_equal(two.dense() - 3 * np.eye(10, dtype=int), g.dense())
    assert cesaro(g, 3).degree == 27


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 14), st.integers(1, 4), st.integers(0, 10_000))
def test_cesaro_mean(n, m, seed):
    g = random_regular(n + n % 2, 3, seed)
    a = cesaro(g, m)
    np.testing.assert_allclose(a.dense() / a.degree, cesaro_mean_matrix(g, m), atol=1e-12)


def test_iteration_m_exact():
    assert iteration_m(27, 3) == 1
    assert iteration_m(728, 3) == 1
    assert iteration_m(729, 3) == 2
    assert iteration_m(64, 4) == 1


def test_iteration_sizes():
    base, info = select_base_graph(27, 3)
    assert info["lambda2"] < 1
    res = zigzag_iteration(IterationRecipe(base, 2))
    assert [g.n for g in res.G] == [2187, 2187 * 27]
    assert [w.degree for w in res.W] == [9, 9]
    assert zigzag_iteration(IterationRecipe(base, 0)).G == []
    # with m = 1 the average is the identity, so no finite K exists
    assert res.records[0]["K_measured"] is None and res.records[1]["K_measured"] == np.inf


def test_averaging_constant():
    g = random_regular(30, 4, 3)
    a = gamma_plus_line(cesaro(g, 3))
    assert averaging_constant(g, cesaro(g, 3), 3) == pytest.approx(a / max(1, gamma_plus_line(g) / 3))
    assert averaging_constant(g, cesaro(g, 1), 1) == np.inf


def test_iteration_precondition():
    with pytest.raises(GraphError):
        IterationRecipe(random_regular(20, 3, 0), 1)


def test_star_transform():
    g = random_regular(20, 4, 3)
    res = star_transform(g, 4)
    assert res.graph.degree == 3
    assert res.graph.n == 36 * 4 * 20
    assert res.provenance["reference_output_vertices"] == 18 * 4 * 20
    with pytest.raises(GraphError):
        star_transform(random_regular(7, 4, 0), 4)


def test_expansion_of_first_iterate():
    base, _ = select_base_graph(27, 3)
    G1 = zigzag_iteration(IterationRecipe(base, 1)).G[0]
    assert extreme_eigenvalues(G1)[0] < 0.999

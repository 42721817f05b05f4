from fractions import Fraction
from itertools import combinations

import numpy as np
from hypothesis import given, settings, strategies as st

from gapkit.density import edges_within, max_density, max_density_minus_one, peeling_order
from gapkit.multigraph import Multigraph, complete_graph, cycle_graph


def brute(g, minus_one=False):
    best = Fraction(0)
    for k in range(2 if minus_one else 1, g.n + 1):
        for S in combinations(range(g.n), k):
            best = max(best, Fraction(edges_within(g, S), k - 1 if minus_one else k))
    return best


def test_closed_forms():
    assert max_density(complete_graph(4)).density == Fraction(3, 2)
    assert max_density_minus_one(complete_graph(4)).density == 2
    assert max_density(complete_graph(5)).density == 2
    assert max_density_minus_one(complete_graph(5)).density == Fraction(5, 2)
    assert max_density(cycle_graph(7)).density == 1
    assert max_density_minus_one(cycle_graph(7)).density == Fraction(7, 6)


def test_witness_attains_density():
    g = Multigraph.from_edges(7, [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6)])
    r = max_density(g)
    assert Fraction(edges_within(g, r.witness), len(r.witness)) == r.density == Fraction(3, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.floats(0.2, 0.8), st.integers(0, 10_000))
def test_matches_enumeration(n, p, seed):
    rng = np.random.default_rng(seed)
    E = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    g = Multigraph.from_edges(n, E)
    assert max_density(g).density == brute(g)
    assert max_density_minus_one(g).density == brute(g, True)


def test_multigraph_loops_and_parallels():
    g = Multigraph.from_edges(3, [(0, 1, 3), (1, 2), (2, 2, 1)])
    assert max_density(g).density == brute(g) == Fraction(5, 3)


def test_peeling_sets_are_consistent():
    g = Multigraph.from_edges(6, [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3), (3, 4), (4, 5)])
    for size, e, S in peeling_order(g):
        assert len(S) == size
        assert edges_within(g, S) == e

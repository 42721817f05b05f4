import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapkit.metric import FiniteMetric
from gapkit.multigraph import GraphError, Multigraph, complete_graph, cycle_graph, loop_graph
from gapkit.randgraph import uniform_simple_sample
from gapkit.spectral import (
    averages, cheeger_check, gamma_cut_exact, gamma_line, gamma_plus_line, gamma_search,
    l1_extrapolation_check, line_ratios, poincare_ratio, ratio_plus, second_eigenvector, spectrum,
)


def brute_gamma(g, X, plus=False):
    """Independent oracle: loop over every map and apply the definitions directly."""
    n, d = g.n, g.degree
    A = g.dense()
    D2 = X.d ** 2
    best = 0.0
    maps = list(itertools.product(range(X.n), repeat=n))
    pairs = itertools.product(maps, maps) if plus else ((f, f) for f in maps)
    for f, h in pairs:
        K = D2[np.ix_(f, h)]
        full = K.sum() / n ** 2
        edge = (A * K).sum() / (n * d) if plus else 0.5 * (A * K).sum() / (n * d / 2)
        if edge == 0:
            if full > 0:
                return math.inf
            continue
        best = max(best, full / edge)
    return best


def test_spectrum_closed_forms():
    np.testing.assert_allclose(spectrum(cycle_graph(4)), [1, 0, 0, -1], atol=1e-12)
    np.testing.assert_allclose(spectrum(complete_graph(4)), [1, -1 / 3, -1 / 3, -1 / 3], atol=1e-12)
    np.testing.assert_allclose(spectrum(loop_graph(5)), np.ones(5))
    k = 11
    ref = np.sort(np.cos(2 * np.pi * np.arange(k) / k))[::-1]
    np.testing.assert_allclose(spectrum(cycle_graph(k)), ref, atol=1e-12)


def test_gamma_closed_forms():
    assert gamma_plus_line(cycle_graph(9)) == pytest.approx(1 / (1 - math.cos(math.pi / 9)))
    assert gamma_plus_line(cycle_graph(9)) <= 648
    assert gamma_line(complete_graph(4)) == pytest.approx(0.75)
    two = Multigraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    with pytest.raises(GraphError):
        gamma_line(two)
    with pytest.raises(GraphError):
        gamma_plus_line(cycle_graph(8))


def test_ratio_examples():
    X = FiniteMetric([[0, 1], [1, 0]])
    assert poincare_ratio(cycle_graph(5), X, [0] * 5) == 0
    assert poincare_ratio(complete_graph(4), X, [0, 0, 1, 1]) == pytest.approx(0.75)
    two = Multigraph.from_edges(4, [(0, 1), (2, 3)])
    two_reg = Multigraph.from_edges(4, [(0, 1, 1), (2, 3, 1)])
    assert poincare_ratio(two_reg, X, [0, 0, 1, 1]) == math.inf
    assert two.degree == 1


def test_cut_oracle_examples():
    assert gamma_cut_exact(complete_graph(4)) == pytest.approx(0.75)
    assert gamma_cut_exact(cycle_graph(4)) == pytest.approx(1.0)
    assert gamma_cut_exact(Multigraph.from_edges(4, [(0, 1), (2, 3)])) == math.inf


@pytest.mark.parametrize("g", [cycle_graph(5), complete_graph(4), cycle_graph(6)])
def test_exhaustive_matches_brute_force(g):
    X = FiniteMetric.path(3)
    rep = gamma_search(g, X, mode="exhaustive")
    assert rep.exact
    assert rep.gamma_estimate == pytest.approx(brute_gamma(g, X), rel=1e-12)
    two = FiniteMetric.path(2)
    assert gamma_search(g, two, mode="exhaustive").gamma_estimate == pytest.approx(gamma_cut_exact(g))


def test_plus_exhaustive_matches_brute_force():
    g = complete_graph(4)
    X = FiniteMetric.path(2)
    rep = gamma_search(g, X, mode="exhaustive", plus=True)
    assert rep.gamma_estimate == pytest.approx(brute_gamma(g, X, plus=True), rel=1e-12)
    assert gamma_search(g, X, mode="exhaustive").gamma_estimate <= rep.gamma_estimate + 1e-12


def test_single_point_metric_degenerate():
    rep = gamma_search(cycle_graph(5), FiniteMetric([[0.0]]))
    assert rep.gamma_estimate == 0 and rep.degenerate


def test_local_search_is_lower_bound():
    g = cycle_graph(12)
    X = FiniteMetric.path(5)
    rep = gamma_search(g, X, mode="local", restarts=10, seed=1)
    assert not rep.exact
    assert rep.gamma_estimate <= gamma_line(g) + 1e-9
    assert rep.recompute(g, X) == pytest.approx(rep.gamma_estimate)


@settings(max_examples=30, deadline=None)
@given(st.integers(6, 60), st.integers(0, 10_000))
def test_rayleigh_identity(n, seed):
    g, _ = uniform_simple_sample(n + n % 2, 3, seed=seed)
    try:
        gl = gamma_line(g)
    except GraphError:
        return
    lam2, v = second_eigenvector(g)
    assert poincare_ratio(g, None, v) == pytest.approx(gl, rel=1e-9)
    F = np.random.default_rng(seed).normal(size=(200, g.n))
    assert line_ratios(g, F).max() <= gl * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 20), st.integers(0, 10_000))
def test_edge_average_at_most_four_full(n, seed):
    rng = np.random.default_rng(seed)
    g, _ = uniform_simple_sample(n + n % 2, 3, seed=seed)
    X = FiniteMetric.from_points(rng.normal(size=(5, 2)))
    f = rng.integers(5, size=g.n)
    full, edge = averages(g, X, f)
    assert edge <= 4 * full + 1e-12
    h = rng.integers(5, size=g.n)
    assert ratio_plus(g, X, f, h) >= 0


def test_cheeger_check_examples():
    with pytest.raises(GraphError):
        cheeger_check(complete_graph(4), FiniteMetric([[0.0]]))
    rep = cheeger_check(complete_graph(4), FiniteMetric.path(2))
    assert rep["ok"] and rep["gamma"] == pytest.approx(0.75)
    assert rep["cheeger_scale"] == pytest.approx(math.sqrt(3) / 2)
    grid = cheeger_check(cycle_graph(6), FiniteMetric.path(3), coords=np.arange(3.0))
    assert grid["line_ok"]


def test_l1_extrapolation_quotient_finite():
    rep = l1_extrapolation_check(cycle_graph(7), configs=2, points=3, restarts=5)
    assert 0 < rep["quotient"] < math.inf

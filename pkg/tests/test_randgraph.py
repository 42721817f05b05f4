import math

import numpy as np
import pytest

from gapkit.multigraph import GraphError, Multigraph, bfs_metrics, complete_graph, cycle_graph, girth, path_graph
from gapkit.randgraph import (
    RejectionBudgetError, adversarial_permutation, battery_parameters, cycle_surgery, edge_containment,
    exact_expansion, geodesic_hull, kleinberg_trial, l_class_battery, laplacian_gap, pairing_sample,
    sparse_delta, sparse_instance, sparsity_check, structure_decomposition, sweep_expansion,
    triple_edge_frequency, uniform_simple_sample,
)


def connected_sample(n, d, seed):
    while True:
        g, _ = uniform_simple_sample(n, d, seed)
        if bfs_metrics(g)[2]:
            return g
        seed += 10_000


def test_triple_edge_frequency():
    # 2 of the 5 matchings of six half-edges on two vertices avoid loops
    p, se = triple_edge_frequency(20_000, seed=0)
    assert abs(p - 0.4) <= 4 * se


def test_edge_containment_bound():
    res = edge_containment(12, 3, [(0, 1), (2, 3)], 20_000, seed=1)
    assert res["frequency"] <= res["bound"] + 3 * res["stderr"]
    with pytest.raises(GraphError):
        edge_containment(12, 3, [(0, 0)], 10)
    with pytest.raises(GraphError):
        edge_containment(4, 3, [(0, 1), (1, 2), (2, 3)], 10)


def test_simple_sampler():
    g, tries = uniform_simple_sample(50, 3, seed=2)
    assert g.is_simple and g.degree == 3 and tries >= 1
    assert pairing_sample(5, 4, seed=0).degree == 4
    with pytest.raises(GraphError):
        uniform_simple_sample(5, 3)
    with pytest.raises(RejectionBudgetError):
        uniform_simple_sample(40, 12, seed=0, max_tries=1)


def test_sparsity_examples():
    assert sparsity_check(path_graph(30), 0.2, 0.1).verdict == "member"
    # K4 hanging from a long path: density 3/2 on four vertices
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] + [(k, k + 1) for k in range(3, 103)]
    g = Multigraph.from_edges(104, edges)
    v = sparsity_check(g, 1 / 3, 0.25)
    assert v.verdict == "violator" and sorted(v.witness.tolist()) == [0, 1, 2, 3]
    v = sparsity_check(g, 1 / 3, 0.25, exact=False)
    assert v.verdict == "violator"
    assert sparsity_check(g, 1 / 3, 0.6).verdict == "member"


def test_surgery_disjoint_cycles():
    edges = [(0, 1), (1, 2), (0, 2)] + [(k, k + 1) for k in range(2, 10)] + [(10, 11), (11, 12), (10, 12)]
    g = Multigraph.from_edges(13, edges)
    res = cycle_surgery(g, 4, r=5)
    assert res.I == [(0, 1), (10, 11)]
    assert res.girth_L is None and res.checks["L_connected"]
    assert res.checks["cycles_far"] and res.checks["diam_ok"]


def test_surgery_overlap():
    with pytest.raises(GraphError):
        cycle_surgery(complete_graph(4), 4)
    res = cycle_surgery(complete_graph(4), 4, allow_overlap=True)
    assert len(set(res.I)) == 4 == len(res.cycles)
    assert res.checks["overlap"]


def test_surgery_random_graph_girth():
    g = connected_sample(300, 3, 3)
    res = cycle_surgery(g, 7, allow_overlap=True)
    assert len(res.I) == len(res.cycles)
    assert res.girth_L is None or res.girth_L >= 7
    assert girth(res.L) >= 7


def test_expansion_tools():
    assert exact_expansion(cycle_graph(6)) == pytest.approx(2 / 3)
    assert laplacian_gap(complete_graph(4)) == pytest.approx(4)
    val, S = sweep_expansion(cycle_graph(12), np.random.default_rng(0))
    assert val == pytest.approx(2 / 6) and len(S) == 6


def test_geodesic_hull_checks():
    g = connected_sample(200, 3, 4)
    T = [0, 50, 100]
    hull = geodesic_hull(g, T, T, 1)
    c = hull.checks
    assert c["lower_ok"] and c["U_ball_ok"] and c["H_connected"] and c["diam_ok"] and c["stretch_ok"]
    with pytest.raises(GraphError):
        geodesic_hull(g, [1, 2, 3], [0], 0)


def test_battery_parameters():
    p = battery_parameters(1000, 3)
    assert p["delta"] == 0.25 and p["t"] == 3 and p["delta_clamped"] and p["t_clamped"]
    assert sparse_delta(3 ** 21, 3, 1 / 3) == pytest.approx(1.0)


def test_battery_refutes_a_cycle():
    bat = l_class_battery(cycle_graph(200), K=2.0)
    assert bat.L_diam_ok is False and bat.expansion == "fail"


def test_battery_on_random_graph():
    g = connected_sample(200, 3, 5)
    bat = l_class_battery(g, K=20.0, hull_samples=1)
    assert bat.connected and bat.I_size == bat.short_cycles
    assert bat.L_connected and bat.expansion == "pass"
    assert bat.sparsity["verdict"] in ("member", "violator", "undetermined")
    assert len(bat.hull_c1) == 1


def test_structure_decomposition():
    g = connected_sample(120, 3, 6)
    rep = structure_decomposition(g, t=5, samples=120)
    assert rep.checks["I_cover"] and rep.checks["II_gap_ok"]


def test_kleinberg_dependent_control_is_worse():
    n = 128
    rng = np.random.default_rng(7)
    G = connected_sample(n, 3, 7)
    H = connected_sample(n, 3, 8)
    DH = bfs_metrics(H)[0]
    ind = kleinberg_trial(G, H, rng.permutation(n), c=1.0, DH=DH)
    dep = kleinberg_trial(G, G, np.arange(n), c=1.0)
    assert dep.rhs == pytest.approx(1.5)
    assert dep.ratio > 3 * ind.ratio
    # the N_H radius ln(n)/16 is below one edge at this size
    assert ind.N_H == 0 <= 1.5 * n ** (17 / 16) and ind.counting_ok
    adv = adversarial_permutation(G, DH, rng, steps=3000)
    assert sorted(adv.tolist()) == list(range(n))
    assert kleinberg_trial(G, H, adv, 1.0, DH).rhs <= ind.rhs
    with pytest.raises(GraphError):
        kleinberg_trial(G, cycle_graph(10), np.arange(n), 1.0)


def test_sparse_instance():
    g, delta = sparse_instance(100, 3, seed=0)
    assert 0.04 <= delta < 1 / 3
    assert len(g.edge_instances) == 102
    assert math.isfinite(bfs_metrics(g)[1])

"""Exact densest subgraphs by parametric min cut, plus greedy peeling."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from .multigraph import GraphError, Multigraph


@dataclass
class DensityResult:
    density: Fraction
    witness: np.ndarray  # vertex set attaining the density

    def __float__(self) -> float:
        return float(self.density)


def _cut_network(g: Multigraph, p: int, q: int, forced: int | None = None):
    """Network whose min cut minimises 2(p|S| - q|E(S)|) plus a constant.

    The source side minus the source is S. Loops count twice in the degree so
    that 2|E(S)| = sum_S deg - e(S, S^c) holds with them.
    """
    deg = np.asarray(g.mult.sum(axis=1)).ravel().astype(np.int64) + g.loops
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n))
    G.add_node("s")
    G.add_node("t")
    for v in range(g.n):
        a = 2 * p - q * int(deg[v])
        if a > 0:
            G.add_edge(v, "t", capacity=a)
        elif a < 0:
            G.add_edge("s", v, capacity=-a)
    for u, v, k in g.edge_list():
        if u != v:
            G.add_edge(u, v, capacity=q * k)
            G.add_edge(v, u, capacity=q * k)
    if forced is not None:
        # no capacity attribute means infinite capacity
        if G.has_edge("s", forced):
            G.remove_edge("s", forced)
        G.add_edge("s", forced)
    return G


def _min_set(g: Multigraph, ratio: Fraction, forced: int | None = None) -> np.ndarray:
    G = _cut_network(g, ratio.numerator, ratio.denominator, forced)
    _, (side, _) = nx.minimum_cut(G, "s", "t")
    return np.array(sorted(v for v in side if v != "s"), dtype=np.int64)


def edges_within(g: Multigraph, S) -> int:
    S = np.asarray(S, dtype=np.int64)
    if S.size == 0:
        return 0
    sub = g.mult[S][:, S]
    return int((sub.sum() + sub.diagonal().sum()) // 2)


def max_density(g: Multigraph) -> DensityResult:
    """max_S |E(S)| / |S| exactly, by Dinkelbach iteration on min cuts."""
    if g.n == 0:
        raise GraphError("empty graph")
    S = np.arange(g.n)
    best = Fraction(edges_within(g, S), g.n)
    while True:
        T = _min_set(g, best)
        if T.size == 0:
            return DensityResult(best, S)
        val = Fraction(edges_within(g, T), T.size)
        if val <= best:
            return DensityResult(best, S)
        best, S = val, T


def max_density_minus_one(g: Multigraph) -> DensityResult:
    """max over |S| >= 2 of |E(S)| / (|S| - 1), exactly; n min cuts per round."""
    if g.n < 2:
        raise GraphError("need at least two vertices")
    S = np.arange(g.n)
    best = Fraction(edges_within(g, S), g.n - 1)
    improved = True
    while improved:
        improved = False
        for v in range(g.n):
            T = _min_set(g, best, forced=v)
            if T.size < 2:
                continue
            val = Fraction(edges_within(g, T), T.size - 1)
            if val > best:
                best, S, improved = val, T, True
                break
    return DensityResult(best, S)


def peeling_order(g: Multigraph) -> list[tuple[int, int, np.ndarray]]:
    """Greedy min-degree peeling; ``(size, edges, vertices)`` for each nested set."""
    import heapq

    deg = np.asarray(g.mult.sum(axis=1)).ravel().astype(np.int64)
    alive = np.ones(g.n, dtype=bool)
    edges = int((g.mult.sum() + g.loops.sum()) // 2)
    heap = [(int(deg[v]), v) for v in range(g.n)]
    heapq.heapify(heap)
    order = []
    sizes = [(g.n, edges)]
    ip, ix, data = g.mult.indptr, g.mult.indices, g.mult.data
    while heap:
        dv, v = heapq.heappop(heap)
        if not alive[v] or dv != deg[v]:
            continue
        alive[v] = False
        order.append(v)
        edges -= int(deg[v])
        for w, k in zip(ix[ip[v]:ip[v + 1]], data[ip[v]:ip[v + 1]]):
            if w != v and alive[w]:
                deg[w] -= k
                heapq.heappush(heap, (int(deg[w]), int(w)))
        sizes.append((g.n - len(order), edges))
    # each nested set is a suffix of the removal order
    removed = np.array(order, dtype=np.int64)
    return [(size, e, removed[g.n - size:]) for size, e in sizes if size > 0]

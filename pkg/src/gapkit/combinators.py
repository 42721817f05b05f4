"""Graph products and averaging: zigzag, replacement, edge completion, Cesaro means.

All products work on rotation maps and are vectorised, so iterates with
millions of vertices are built in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .multigraph import (
    GraphError,
    Multigraph,
    cycle_graph,
    is_connected,
    validate,
)


def _require_rotation(g: Multigraph, name: str) -> np.ndarray:
    if g.rot is None:
        raise GraphError(f"{name} needs a rotation map")
    return g.rot


def zigzag(g1: Multigraph, g2: Multigraph) -> Multigraph:
    """Zigzag product: vertices (v, k), ports (i, j), degree d2^2.

    Rot((v,k),(i,j)) = ((w,l'),(j',i')) where (k',i') = Rot2(k,i),
    (w,l) = Rot1(v,k') and (l',j') = Rot2(l,j).
    """
    r1 = _require_rotation(g1, "zigzag")
    r2 = _require_rotation(g2, "zigzag")
    n1, d1, _ = r1.shape
    n2, d2, _ = r2.shape
    if n2 != d1:
        raise GraphError(f"zigzag needs |V(g2)| = deg(g1), got {n2} and {d1}")
    v = np.arange(n1)[:, None, None, None]
    k = np.arange(n2)[None, :, None, None]
    i = np.arange(d2)[None, None, :, None]
    j = np.arange(d2)[None, None, None, :]
    kp, ip = r2[k, i, 0], r2[k, i, 1]
    w, l = r1[v, kp, 0], r1[v, kp, 1]
    lp, jp = r2[l, j, 0], r2[l, j, 1]
    shape = (n1, n2, d2, d2)
    rot = np.empty((n1 * n2, d2 * d2, 2), dtype=np.int64)
    rot[:, :, 0] = np.broadcast_to(w * n2 + lp, shape).reshape(n1 * n2, d2 * d2)
    rot[:, :, 1] = np.broadcast_to(jp * d2 + ip, shape).reshape(n1 * n2, d2 * d2)
    return Multigraph.from_rotation(rot)


def replacement(g1: Multigraph, g2: Multigraph) -> Multigraph:
    """Replacement product: a copy of g2 on each cloud plus one port-matching edge."""
    r1 = _require_rotation(g1, "replacement")
    if g2.degree is None:
        raise GraphError("replacement needs a regular g2")
    n1, d1, _ = r1.shape
    if g2.n != d1:
        raise GraphError(f"replacement needs |V(g2)| = deg(g1), got {g2.n} and {d1}")
    r2 = g2.with_rotation().rot
    n2, d2 = g2.n, g2.degree
    rot = np.empty((n1, n2, d2 + 1, 2), dtype=np.int64)
    v = np.arange(n1)[:, None, None]
    rot[:, :, :d2, 0] = v * n2 + r2[None, :, :, 0]
    rot[:, :, :d2, 1] = r2[None, :, :, 1]
    rot[:, :, d2, 0] = r1[:, :, 0] * n2 + r1[:, :, 1]
    rot[:, :, d2, 1] = d2
    return Multigraph.from_rotation(rot.reshape(n1 * n2, d2 + 1, 2))


def edge_completion(g: Multigraph, D: int) -> Multigraph:
    """D-regular completion: floor(D/d) copies of each edge plus the rest as loops."""
    d = g.degree
    if d is None:
        raise GraphError("edge completion needs a regular graph")
    if D < d:
        raise GraphError(f"target degree {D} is below the degree {d}")
    g = g.with_rotation()
    q, r = divmod(D, d)
    rot = np.empty((g.n, D, 2), dtype=np.int64)
    for c in range(q):
        rot[:, c * d:(c + 1) * d, 0] = g.rot[:, :, 0]
        rot[:, c * d:(c + 1) * d, 1] = g.rot[:, :, 1] + c * d
    rot[:, q * d:, 0] = np.arange(g.n)[:, None]
    rot[:, q * d:, 1] = np.arange(q * d, D)[None, :]
    return Multigraph.from_rotation(rot)


def cesaro(g: Multigraph, m: int) -> Multigraph:
    """m-th Cesaro average: E(u,v) = sum_t d^(m-1-t) W_t(u,v), W_t = t-step walk counts.

    The result is m d^(m-1)-regular and its normalized adjacency is the mean of
    A^0, ..., A^(m-1).
    """
    d = g.degree
    if d is None:
        raise GraphError("Cesaro average needs a regular graph")
    if m < 1:
        raise GraphError("m must be positive")
    total = m * d ** (m - 1)
    if total >= 2 ** 62:
        raise OverflowError(f"walk counts up to {total} overflow 64-bit multiplicities")
    A = g.mult.astype(np.int64)
    W = sp.identity(g.n, dtype=np.int64, format="csr")
    E = W * d ** (m - 1)
    for t in range(1, m):
        W = (W @ A).tocsr()
        E = E + W * d ** (m - 1 - t)
    return Multigraph(g.n, E.tocsr())


def cesaro_mean_matrix(g: Multigraph, m: int) -> np.ndarray:
    """(1/m) sum_{t<m} A^t computed in floating point (reference for tests)."""
    A = g.dense() / g.degree
    acc = np.zeros_like(A)
    P = np.eye(g.n)
    for _ in range(m):
        acc += P
        P = P @ A
    return acc / m


# the 3-regular pipeline


@dataclass
class StarResult:
    graph: Multigraph
    provenance: dict


def completion_hook(g: Multigraph, d: int) -> tuple[Multigraph, dict]:
    """Default first step: edge completion to degree 4d, vertex count kept."""
    gp = edge_completion(g, 4 * d)
    return gp, {
        "hook": "edge_completion",
        "deviation": "vertex count not halved; gamma_+ of the result is measured, not bounded",
        "vertices": gp.n,
        "reference_vertices": g.n // 2,
    }


def star_transform(g: Multigraph, d: int,
                   hook: Callable[[Multigraph, int], tuple[Multigraph, dict]] | None = None) -> StarResult:
    """3-regular graph from a d-regular one: hook, zigzag with the looped 4d-cycle, replacement with C_9."""
    if d < 3:
        raise GraphError("degree must be at least 3")
    if g.degree != d:
        raise GraphError(f"input is not {d}-regular")
    if g.n % 2 or g.n < 6:
        raise GraphError("vertex count must be even and at least 6")
    gp, info = (hook or completion_hook)(g, d)
    if gp.degree != 4 * d:
        raise GraphError("hook must return a 4d-regular graph")
    g2 = zigzag(gp, cycle_graph(4 * d, loops=True))
    gs = replacement(g2, cycle_graph(9))
    expected = 36 * d * gp.n
    if gs.n != expected or gs.degree != 3:
        raise AssertionError("pipeline size identity failed")
    prov = dict(info)
    prov.update({
        "input_vertices": g.n,
        "zigzag_vertices": g2.n,
        "zigzag_degree": g2.degree,
        "output_vertices": gs.n,
        "reference_output_vertices": 18 * d * g.n,
        "output_degree": gs.degree,
    })
    return StarResult(gs, prov)


# zigzag iteration


def iteration_m(n: int, d: int) -> int:
    """floor(log n / (3 log d)) in exact integer arithmetic."""
    m = 0
    while d ** (3 * (m + 1)) <= n:
        m += 1
    return m


@dataclass
class IterationRecipe:
    base: Multigraph
    depth: int
    m: int = field(init=False)

    def __post_init__(self):
        d, n = self.base.degree, self.base.n
        if d is None:
            raise GraphError("base graph must be regular")
        if d < 3 or n < d ** 3:
            raise GraphError(f"need n >= d^3 with d >= 3, got n={n}, d={d}")
        if self.base.rot is None:
            raise GraphError("base graph needs a rotation map")
        self.m = iteration_m(n, d)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def d(self) -> int:
        return self.base.degree


@dataclass
class IterationResult:
    W: list[Multigraph]
    G: list[Multigraph]
    records: list[dict]


def averaging_constant(W: Multigraph, avg: Multigraph, m: int) -> float:
    """Smallest K with gamma_+(A_m(W)) <= K max(1, gamma_+(W)/m) on the real line; inf if undefined."""
    from .spectral import gamma_plus_line

    try:
        before = gamma_plus_line(W)
        after = gamma_plus_line(avg)
    except GraphError:
        return float("inf")
    return after / max(1.0, before / m)


def zigzag_iteration(recipe: IterationRecipe, keep_w: bool = True, k_limit: int = 5000) -> IterationResult:
    """W_1 = C_{d^2}(H), W_{j+1} = C_n(A_m(W_j)) zigzag H, G_j = (W_j zigzag C_{d^2}^o) r C_9.

    For j >= 2 the record carries the measured averaging constant K of W_{j-1}
    when that graph has at most ``k_limit`` vertices.
    """
    H, n, d, m = recipe.base, recipe.n, recipe.d, recipe.m
    if m * d ** (2 * (m - 1)) > n:
        raise GraphError("m d^(2(m-1)) exceeds n; the completion step is undefined")
    Ws, Gs, records = [], [], []
    small = cycle_graph(d * d, loops=True)
    nine = cycle_graph(9)
    W = None
    for j in range(1, recipe.depth + 1):
        K = None
        if j == 1:
            W = edge_completion(H, d * d)
        else:
            avg = cesaro(W, m)
            if W.n <= k_limit:
                K = averaging_constant(W, avg, m)
            W = zigzag(edge_completion(avg, n), H)
        G = replacement(zigzag(W, small), nine)
        if W.n != n ** j or W.degree != d * d:
            raise AssertionError(f"W_{j} has {W.n} vertices and degree {W.degree}")
        if G.n != 9 * d * d * n ** j or G.degree != 3:
            raise AssertionError(f"G_{j} has {G.n} vertices and degree {G.degree}")
        records.append({
            "j": j,
            "W_vertices": W.n,
            "W_degree": W.degree,
            "G_vertices": G.n,
            "G_degree": G.degree,
            "W_connected": is_connected(W),
            "G_connected": is_connected(G),
            "K_measured": K,
        })
        if keep_w:
            Ws.append(W)
        Gs.append(G)
    return IterationResult(Ws, Gs, records)


def select_base_graph(n: int, d: int, trials: int = 50, seed: int = 0) -> tuple[Multigraph, dict]:
    """Best (smallest lambda_2) random d-regular graph out of ``trials`` connected samples.

    When n d is odd one half-edge is left unmatched and becomes a self-loop.
    """
    from .randgraph import pairing_rotation
    from .spectral import extreme_eigenvalues

    rng = np.random.default_rng(seed)
    best, best_info = None, None
    attempts = 0
    while attempts < 50 * trials and (best is None or best_info["trials"] < trials):
        attempts += 1
        g = Multigraph.from_rotation(pairing_rotation(n, d, rng, allow_odd=True))
        if not is_connected(g):
            continue
        lam2, lamn = extreme_eigenvalues(g)
        if -lamn >= 1 - 1e-12:
            continue
        count = 1 if best_info is None else best_info["trials"] + 1
        if best is None or lam2 < best_info["lambda2"]:
            best = g
            best_info = {"lambda2": lam2, "lambda_n": lamn,
                         "gamma_plus": 1.0 / (1.0 - max(lam2, -lamn))}
        best_info["trials"] = count
    if best is None:
        raise GraphError("no connected non-bipartite sample found")
    validate(best, d)
    return best, best_info

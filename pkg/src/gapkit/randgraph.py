"""Random regular graphs: pairing model, uniform simple graphs, sparsity,
cycle surgery, property batteries, geodesic hulls, the A1/A2 split of the
complex, and permutation Poincare trials.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy.sparse import csgraph

from .density import edges_within, max_density, peeling_order
from .multigraph import (
    MAX_CYCLE_LENGTH,
    GraphError,
    Multigraph,
    SimplicialPoint,
    bfs_from,
    bfs_metrics,
    girth,
    is_connected,
    random_simplicial_points,
    short_cycles,
    simplicial_distance_matrix,
)


class RejectionBudgetError(RuntimeError):
    def __init__(self, tries: int):
        super().__init__(f"no simple graph after {tries} pairings")
        self.tries = tries


# pairing model


def pairing_rotation(n: int, d: int, rng: np.random.Generator, allow_odd: bool = False) -> np.ndarray:
    """Rotation map of a uniformly random perfect matching of [n] x [d].

    With ``allow_odd`` and n d odd, one half-edge stays unmatched and becomes a
    self-loop (a fixed point of the rotation).
    """
    if n < 1 or d < 1:
        raise GraphError("n and d must be positive")
    if (n * d) % 2 and not allow_odd:
        raise GraphError("n d must be even")
    perm = rng.permutation(n * d)
    rot = np.empty((n, d, 2), dtype=np.int64)
    a = perm[0:-1:2] if (n * d) % 2 else perm[0::2]
    b = perm[1::2]
    rot[a // d, a % d, 0], rot[a // d, a % d, 1] = b // d, b % d
    rot[b // d, b % d, 0], rot[b // d, b % d, 1] = a // d, a % d
    if (n * d) % 2:
        z = perm[-1]
        rot[z // d, z % d] = (z // d, z % d)
    return rot


def pairing_sample(n: int, d: int, seed=None) -> Multigraph:
    return Multigraph.from_rotation(pairing_rotation(n, d, np.random.default_rng(seed)))


def pairing_batch(n: int, d: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Vertex pairs of ``samples`` independent pairings, shape (samples, nd/2, 2), sorted within pairs."""
    if (n * d) % 2:
        raise GraphError("n d must be even")
    perms = rng.permuted(np.tile(np.arange(n * d), (samples, 1)), axis=1) // d
    pairs = perms.reshape(samples, n * d // 2, 2)
    return np.sort(pairs, axis=2)


def triple_edge_frequency(samples: int, seed=None) -> tuple[float, float]:
    """Frequency of a triple edge for n = 2, d = 3, with its standard error."""
    pairs = pairing_batch(2, 3, samples, np.random.default_rng(seed))
    hit = (pairs[:, :, 0] != pairs[:, :, 1]).all(axis=1)
    p = hit.mean()
    return float(p), float(math.sqrt(p * (1 - p) / samples))


def edge_containment(n: int, d: int, F, samples: int, seed=None) -> dict:
    """Monte Carlo Pr[F is contained in the pairing multigraph] against (2d/n)^|F|."""
    F = [tuple(sorted(map(int, f))) for f in F]
    if len(set(F)) != len(F) or any(u == v for u, v in F):
        raise GraphError("F must be a set of distinct non-loop pairs")
    if len(F) >= n * d / 4:
        raise GraphError("|F| must be below nd/4")
    rng = np.random.default_rng(seed)
    hits, done = 0, 0
    chunk = max(1, min(samples, 2_000_000 // max(1, n * d)))
    while done < samples:
        k = min(chunk, samples - done)
        pairs = pairing_batch(n, d, k, rng)
        codes = pairs[:, :, 0] * n + pairs[:, :, 1]
        ok = np.ones(k, dtype=bool)
        for u, v in F:
            ok &= (codes == u * n + v).any(axis=1)
        hits += int(ok.sum())
        done += k
    p = hits / samples
    return {"frequency": p, "stderr": math.sqrt(max(p * (1 - p), 1.0 / samples) / samples),
            "bound": (2 * d / n) ** len(F), "samples": samples}


def uniform_simple_sample(n: int, d: int, seed=None, max_tries: int = 100_000) -> tuple[Multigraph, int]:
    """Uniform simple d-regular graph by rejection from the pairing model; returns (graph, tries)."""
    if (n * d) % 2 or d >= n:
        raise GraphError("need n d even and d < n")
    rng = np.random.default_rng(seed)
    for tries in range(1, max_tries + 1):
        g = Multigraph.from_rotation(pairing_rotation(n, d, rng))
        if g.is_simple:
            return g, tries
    raise RejectionBudgetError(max_tries)


# sparsity


@dataclass
class SparsityVerdict:
    verdict: str  # member, violator or undetermined
    method: str
    limit: float
    delta: float
    density: Fraction | None = None
    witness: np.ndarray | None = None

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "method": self.method, "limit": self.limit, "delta": self.delta}
        if self.density is not None:
            out["density"] = str(self.density)
        if self.witness is not None:
            out["witness"] = [int(v) for v in self.witness]
        return out


def _violates(g: Multigraph, S, delta: float, limit: float) -> bool:
    S = np.unique(np.asarray(S, dtype=np.int64))
    return 0 < S.size <= limit and edges_within(g, S) >= (1 + delta) * S.size


def _cycle_union_candidates(g: Multigraph, cycles, reach: int):
    """C1 u C2 u (a shortest path between them) for cycles within ``reach`` of each other."""
    owner: dict[int, list[int]] = {}
    for c, C in enumerate(cycles):
        for v in C.vertices:
            owner.setdefault(v, []).append(c)
    nb = g.neighbors
    for c, C in enumerate(cycles):
        # multi-source BFS from C with parents
        dist = {v: 0 for v in C.vertices}
        parent = {v: None for v in C.vertices}
        frontier = list(C.vertices)
        seen_pairs = set()
        depth = 0
        while frontier and depth <= reach:
            for v in frontier:
                for c2 in owner.get(v, []):
                    if c2 > c and c2 not in seen_pairs:
                        seen_pairs.add(c2)
                        path, w = [], v
                        while w is not None:
                            path.append(w)
                            w = parent[w]
                        yield set(C.vertices) | set(cycles[c2].vertices) | set(path)
            nxt = []
            for v in frontier:
                for w in nb[v]:
                    if w not in dist:
                        dist[w] = depth + 1
                        parent[w] = v
                        nxt.append(w)
            frontier = nxt
            depth += 1


def sparsity_check(g: Multigraph, eps: float, delta: float, exact: bool = True) -> SparsityVerdict:
    """Membership in the class of graphs with |E(S)| < (1+delta)|S| whenever |S| <= n^{1-eps}.

    Certifies membership by the degree bound or the exact global densest
    subgraph; otherwise searches for a small violator by peeling and around
    short cycles. Never returns a wrong verdict.
    """
    if not g.is_simple:
        raise GraphError("sparsity check needs a simple graph")
    limit = g.n ** (1 - eps)
    dmax = int(g.degrees.max()) if g.n else 0
    if Fraction(dmax, 2) < 1 + Fraction(delta):
        return SparsityVerdict("member", "degree", limit, delta, Fraction(dmax, 2))
    dens = None
    if exact:
        res = max_density(g)
        dens = res.density
        if dens < 1 + Fraction(delta):
            return SparsityVerdict("member", "densest-subgraph", limit, delta, dens)
        if _violates(g, res.witness, delta, limit):
            return SparsityVerdict("violator", "densest-subgraph", limit, delta, dens, res.witness)
    for size, e, S in peeling_order(g):
        if size <= limit and e >= (1 + delta) * size:
            return SparsityVerdict("violator", "peeling", limit, delta, dens, np.sort(S))
    L = min(MAX_CYCLE_LENGTH, int(math.floor(min(limit, 1 / delta))) + 1)
    if L >= 3:
        cycles = [C for C in short_cycles(g, L + 1) if len(C) >= 3]
        for C in cycles:
            if not C.induced and _violates(g, C.vertices, delta, limit):
                return SparsityVerdict("violator", "cycle", limit, delta, dens, np.array(sorted(C.vertices)))
        for S in _cycle_union_candidates(g, cycles, reach=max(0, int(limit))):
            if _violates(g, list(S), delta, limit):
                return SparsityVerdict("violator", "cycle-union", limit, delta, dens, np.array(sorted(S)))
    return SparsityVerdict("undetermined", "search", limit, delta, dens)


# cycle surgery


@dataclass
class SurgeryResult:
    I: list[tuple[int, int]]
    L: Multigraph
    t: int
    cycles: list
    chosen: list[tuple[int, int]]
    girth_L: int | None
    checks: dict = field(default_factory=dict)


def cycle_surgery(g: Multigraph, t: int, r: int | None = None, allow_overlap: bool = False) -> SurgeryResult:
    """Delete one representative edge from every cycle shorter than t.

    The representative is the lexicographically smallest edge of the cycle. With
    ``allow_overlap``, overlapping cycles get distinct representatives from a
    bipartite matching (smallest edges preferred); otherwise overlap is an error.
    """
    if not g.is_simple:
        raise GraphError("surgery needs a simple graph")
    cycles = short_cycles(g, t)
    seen = set()
    overlap = False
    for C in cycles:
        if seen & set(C.vertices):
            overlap = True
        seen |= set(C.vertices)
    if overlap and not allow_overlap:
        raise GraphError("short cycles overlap")
    if overlap:
        B = nx.Graph()
        for c, C in enumerate(cycles):
            for rank, e in enumerate(sorted(C.edges())):
                B.add_edge(("c", c), ("e", e), weight=-rank)
        match = nx.max_weight_matching(B, maxcardinality=True)
        rep = {}
        for a, b in match:
            if a[0] == "e":
                a, b = b, a
            rep[a[1]] = b[1]
        if len(rep) != len(cycles):
            raise GraphError("short cycles admit no distinct representative edges")
        chosen = [rep[c] for c in range(len(cycles))]
    else:
        chosen = [min(C.edges()) for C in cycles]
    L = g.remove_edges(chosen) if chosen else g
    rest = short_cycles(L, t)
    if rest:
        raise AssertionError("surgery left a short cycle")
    if len(set(chosen)) != len(cycles):
        raise AssertionError("representatives are not distinct")
    acyclic = len(L.edge_instances) == L.n - 1 and is_connected(L)
    res = SurgeryResult(chosen, L, t, cycles, chosen, None if acyclic else girth(L))
    res.checks["overlap"] = overlap
    res.checks["L_connected"] = is_connected(L)
    if r is not None and len(cycles) >= 2 and not overlap:
        D, diam_g, _ = bfs_metrics(g)
        dmin = min(D[np.ix_(list(a.vertices), list(b.vertices))].min()
                   for i, a in enumerate(cycles) for b in cycles[i + 1:])
        res.checks["cycle_distance"] = float(dmin)
        res.checks["cycles_far"] = bool(dmin >= r)
        if dmin >= r and res.checks["L_connected"]:
            _, diam_l, _ = bfs_metrics(L)
            bound = (t + r - 1) / (r + 1) * diam_g + r * (t - 2) / (r + 1)
            res.checks.update(diam_L=diam_l, diam_G=diam_g, diam_bound=bound,
                              diam_ok=bool(diam_l <= bound + 1e-9))
    return res


# expansion


def exact_expansion(g: Multigraph) -> float:
    """min over 0 < |S| <= n/2 of e(S, S^c) / |S|, by enumeration (n <= 24)."""
    n = g.n
    if n > 24:
        raise GraphError("exact expansion is limited to 24 vertices")
    E = np.array([(u, v) for u, v, k in g.edge_list() for _ in range(k) if u != v], dtype=np.int64)
    best = math.inf
    chunk = 1 << 18
    for start in range(1, 1 << n, chunk):
        S = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        size = np.bitwise_count(S).astype(np.int64)
        keep = size <= n // 2
        S, size = S[keep], size[keep]
        if S.size == 0:
            continue
        cut = np.zeros(S.size, dtype=np.int64)
        for u, v in E:
            cut += ((S >> u) & 1) ^ ((S >> v) & 1)
        best = min(best, float((cut / size).min()))
    return best


def laplacian_gap(g: Multigraph) -> float:
    """Second smallest eigenvalue of the combinatorial Laplacian (loops ignored)."""
    A = g.mult.astype(np.float64).toarray()
    np.fill_diagonal(A, 0)
    Lap = np.diag(A.sum(1)) - A
    return float(np.linalg.eigvalsh(Lap)[1])


def sweep_expansion(g: Multigraph, rng: np.random.Generator, restarts: int = 20) -> tuple[float, np.ndarray]:
    """Smallest e(S,S^c)/|S| over Fiedler sweeps and BFS balls; an upper bound on the expansion."""
    A = g.mult.astype(np.float64).toarray()
    np.fill_diagonal(A, 0)
    Lap = np.diag(A.sum(1)) - A
    _, vecs = np.linalg.eigh(Lap)
    orders = [np.argsort(vecs[:, 1]), np.argsort(-vecs[:, 1])]
    for _ in range(restarts):
        orders.append(np.argsort(bfs_from(g, int(rng.integers(g.n))) + rng.random(g.n) * 0.5))
    best, best_S = math.inf, None
    deg = A.sum(1)
    for order in orders:
        inside = np.zeros(g.n, dtype=bool)
        cut = 0.0
        for k, v in enumerate(order[: g.n // 2]):
            cut += deg[v] - 2 * A[v, inside].sum()
            inside[v] = True
            ratio = cut / (k + 1)
            if ratio < best:
                best, best_S = ratio, order[: k + 1].copy()
    return best, best_S


# geodesic hulls


@dataclass
class HullResult:
    U: np.ndarray
    H: Multigraph
    index: np.ndarray  # H vertex -> g vertex
    checks: dict


def geodesic_hull(g: Multigraph, S, T, r: int, hub: int | None = None) -> HullResult:
    """U = union of B(x, 3r) and a shortest x-hub path over x in T, with its induced subgraph."""
    S, T = sorted(set(map(int, S))), sorted(set(map(int, T)))
    if not T:
        raise GraphError("T must be nonempty")
    D, diam, connected = bfs_metrics(g)
    if not connected:
        raise GraphError("geodesic hull needs a connected graph")
    if S and D[np.ix_(S, T)].min(axis=1).max() > r:
        raise GraphError("S is not covered by r-balls around T")
    hub = T[0] if hub is None else int(hub)
    _, pred = csgraph.breadth_first_order(g.adjacency(), hub, directed=False)
    U = set()
    for x in T:
        U |= set(np.flatnonzero(D[x] <= 3 * r).tolist())
        w = x
        while w != hub and w >= 0:
            U.add(int(w))
            w = int(pred[w])
        U.add(hub)
    H, idx = g.induced(U)
    d = int(g.degrees.max())
    DH, diam_h, h_conn = bfs_metrics(H)
    pos = np.searchsorted(idx, S)
    dG = D[np.ix_(S, S)]
    dH = DH[np.ix_(pos, pos)]
    off = ~np.eye(len(S), dtype=bool)
    stretch = float((dH[off] / dG[off]).max()) if off.any() else 1.0
    size_bound = len(T) * (d * (d - 1) ** (3 * r - 1) + diam)
    # full ball count; the bound above drops all but the outer shell of each ball
    ball = 1 + (d * ((d - 1) ** (3 * r) - 1) // (d - 2) if d > 2 else d * 3 * r)
    ball_bound = len(T) * (ball + diam)
    stretch_bound = 2 * (diam / r + 1)
    checks = {
        "U": len(idx), "U_bound": size_bound, "U_ok": len(idx) <= size_bound,
        "U_ball_bound": ball_bound, "U_ball_ok": len(idx) <= ball_bound,
        "H_connected": h_conn, "diam_H": diam_h, "diam_bound": 6 * r + 2 * diam,
        "diam_ok": h_conn and diam_h <= 6 * r + 2 * diam,
        "lower_ok": bool((dH >= dG - 1e-12).all()),
        "stretch": stretch, "stretch_bound": stretch_bound, "stretch_ok": stretch <= stretch_bound + 1e-12,
    }
    return HullResult(idx, H, idx, checks)


# batteries


def battery_parameters(n: int, d: int) -> dict:
    """delta = 21/log_d n and t = floor(log_d n / 63), clamped to delta <= 1/4 and t >= 3."""
    logd = math.log(n) / math.log(d)
    delta_raw, t_raw = 21 / logd, int(math.floor(logd / 63))
    return {"delta_raw": delta_raw, "t_raw": t_raw, "delta": min(0.25, delta_raw), "t": max(3, t_raw),
            "delta_clamped": delta_raw > 0.25, "t_clamped": t_raw < 3}


def sparse_delta(n: int, d: int, eps: float) -> float:
    """7 log d / (eps log n)."""
    return 7 * math.log(d) / (eps * math.log(n))


@dataclass
class PropertyBattery:
    n: int
    d: int
    K: float
    connected: bool
    diameter: float
    lambda2: float
    params: dict
    short_cycles: int
    sqrt_n: float
    I_size: int | None = None
    I_ok: bool | None = None
    L_connected: bool | None = None
    L_diameter: float | None = None
    L_diam_ok: bool | None = None
    L_girth: int | None = None
    diam_girth_ok: bool | None = None
    expansion: str = "undetermined"
    expansion_value: float | None = None
    sparsity: dict | None = None
    hull_c1: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def l_class_battery(h: Multigraph, K: float, eps: float = 1 / 3, seed: int = 0,
                    hull_samples: int = 0, sparsity_exact: bool = False) -> PropertyBattery:
    """Finitely checkable parts of membership in the L class, with a trichotomy on expansion."""
    rng = np.random.default_rng(seed)
    d = h.degree
    if d is None or not h.is_simple:
        raise GraphError("battery needs a simple regular graph")
    n = h.n
    from .spectral import extreme_eigenvalues

    D, diam, connected = bfs_metrics(h)
    lam2 = extreme_eigenvalues(h)[0] if connected else 1.0
    p = battery_parameters(n, d)
    t = p["t"]
    cyc = short_cycles(h, t)
    bat = PropertyBattery(n, d, K, connected, diam, lam2, p, len(cyc), math.sqrt(n))
    if p["t_clamped"] or p["delta_clamped"]:
        bat.notes.append("parameters clamped at this size")
    try:
        surg = cycle_surgery(h, t, allow_overlap=True)
    except GraphError as exc:
        bat.notes.append(f"surgery: {exc}")
        return bat
    L = surg.L
    bat.I_size = len(surg.I)
    bat.I_ok = len(surg.I) <= math.sqrt(n)
    bat.L_connected = is_connected(L)
    logd = math.log(n) / math.log(d)
    if bat.L_connected:
        _, dl, _ = bfs_metrics(L)
        bat.L_diameter = dl
        bat.L_diam_ok = dl <= K * logd
        bat.L_girth = surg.girth_L
        bat.diam_girth_ok = None if surg.girth_L is None else dl <= K * surg.girth_L
        if n <= 24:
            val = exact_expansion(L)
            bat.expansion_value = val
            bat.expansion = "pass" if val >= 1 / K else "fail"
        else:
            mu = laplacian_gap(L)
            if mu / 2 >= 1 / K:
                bat.expansion, bat.expansion_value = "pass", mu / 2
            else:
                val, _ = sweep_expansion(L, rng)
                bat.expansion_value = val
                bat.expansion = "fail" if val < 1 / K else "undetermined"
    else:
        bat.expansion = "fail"
    bat.sparsity = sparsity_check(h, eps, sparse_delta(n, d, eps), exact=sparsity_exact).to_json()
    for _ in range(hull_samples if bat.L_connected else 0):
        bat.hull_c1.append(hull_embedding_check(L, int(math.isqrt(n)), rng))
    return bat


def hull_embedding_check(L: Multigraph, size: int, rng: np.random.Generator, r: int = 2) -> dict:
    """Measured L1 distortion of a random vertex set S of L through its geodesic hull."""
    from .embeddings import TreeMeasureError, sparse_graph_l1

    S = rng.choice(L.n, size=max(2, size), replace=False)
    hull = geodesic_hull(L, S, S, r)
    H = hull.H
    rho = max_density(H).density
    excess = float(rho) - 1
    out = {"S": len(S), "U": int(len(hull.U)), "stretch": hull.checks["stretch"], "excess": excess}
    if not 0 <= excess < 1 / 3 or not hull.checks["H_connected"]:
        out["c1"] = None
        return out
    pos = np.searchsorted(hull.index, S)
    pts = [SimplicialPoint.at_vertex(int(v)) for v in pos]
    try:
        rep = sparse_graph_l1(H, max(excess, 0.02), points=pts)
    except (GraphError, TreeMeasureError) as exc:
        out["c1"] = None
        out["error"] = str(exc)
        return out
    DL, _, _ = bfs_metrics(L)
    dL = DL[np.ix_(S, S)]
    iu = np.triu_indices(len(S), 1)
    ratio = rep.distances[iu] / dL[iu]
    out["c1"] = float(ratio.max() / ratio.min())
    return out


# the split of Sigma(H) around deleted edges


@dataclass
class StructureReport:
    t: float
    sigma: float
    deleted: list
    A1: np.ndarray  # membership of the sample points
    A2: np.ndarray
    checks: dict


def _distance_to_edges(g: Multigraph, D: np.ndarray, points, edge_ids) -> np.ndarray:
    """Distance in Sigma(G) from each point to the union of the given edges."""
    if not len(edge_ids):
        return np.full(len(points), np.inf)
    ends = np.unique(g.edge_instances[edge_ids].ravel())
    dv = D[:, ends].min(axis=1)
    marked = set(int(e) for e in edge_ids)
    out = np.empty(len(points))
    for i, p in enumerate(points):
        if p.vertex is not None:
            out[i] = dv[p.vertex]
        elif p.edge in marked:
            out[i] = 0.0
        else:
            u, v = g.edge_instances[p.edge]
            s = p.offset / (1 << 20)
            out[i] = min(s + dv[u], 1 - s + dv[v])
    return out


def structure_decomposition(h: Multigraph, t: int | None = None, samples: int = 300,
                            seed: int = 0) -> StructureReport:
    """A1 = t-neighbourhood of the deleted edges, A2 = complement of the t/2-neighbourhood."""
    from .conegeom import cone_formula

    rng = np.random.default_rng(seed)
    if t is None:
        t = battery_parameters(h.n, h.degree or 3)["t"]
    surg = cycle_surgery(h, t, allow_overlap=True)
    L = surg.L
    g_L = girth(L)
    sigma = 2 * math.pi / g_L
    D, diam, _ = bfs_metrics(h)
    index = {(int(u), int(v)): k for k, (u, v) in enumerate(h.edge_instances)}
    deleted = [index[e] for e in surg.I]
    pts = random_simplicial_points(h, samples, rng)
    dist = _distance_to_edges(h, D, pts, deleted)
    A1 = dist <= t
    A2 = dist > t / 2
    checks = {"I_cover": bool((A1 | A2).all())}
    dS = simplicial_distance_matrix(h, pts, D)
    only1, only2 = A1 & ~A2, A2 & ~A1
    gap = float(dS[np.ix_(only1, only2)].min()) if only1.any() and only2.any() else math.inf
    checks.update(gap=gap, II_gap_ok=bool(gap >= t / 2 - 1e-12))
    iu = np.triu_indices(len(pts), 1)
    keep = dS[iu] > 0
    slice_d = cone_formula(sigma * dS[iu][keep], 1 / math.sqrt(2), 1 / math.sqrt(2))
    ratio = slice_d / dS[iu][keep]
    checks["V_slice_distortion"] = float(ratio.max() / ratio.min())
    if A2.sum() >= 2 and is_connected(L):
        Lindex = {(int(u), int(v)): k for k, (u, v) in enumerate(L.edge_instances)}
        sub = [p for p, a in zip(pts, A2) if a]
        mapped = [p if p.vertex is not None else
                  SimplicialPoint(edge=Lindex[tuple(map(int, h.edge_instances[p.edge]))], offset=p.offset)
                  for p in sub]
        dG = dS[np.ix_(A2, A2)]
        dL = simplicial_distance_matrix(L, mapped)
        off = dG > 0
        r = dL[off] / dG[off]
        checks.update(A2_ratio_min=float(r.min()) if r.size else 1.0,
                      A2_ratio_max=float(r.max()) if r.size else 1.0,
                      A2_comparison_ok=bool(r.size == 0 or (r.min() >= 1 - 1e-12 and r.max() <= 3 + 1e-12)))
    return StructureReport(t, sigma, surg.I, A1, A2, checks)


# permutation Poincare trials


@dataclass
class KleinbergResult:
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    close_pairs: int  # |E_G intersect N_H|
    N_H: int
    counting_ok: bool


def kleinberg_trial(gG: Multigraph, gH: Multigraph, perm, c: float, DH: np.ndarray | None = None) -> KleinbergResult:
    """(1/n^2) sum_ij d_H(pi i, pi j)^2 <= c (1/n) sum_{E_G} d_H(pi i, pi j)^2, and the N_H count."""
    n = gG.n
    if gH.n != n:
        raise GraphError("graphs must have the same size")
    if DH is None:
        DH, _, connected = bfs_metrics(gH)
        if not connected:
            raise GraphError("H must be connected")
    perm = np.asarray(perm, dtype=np.int64)
    lhs = float((DH ** 2).sum() / n ** 2)
    E = gG.edge_instances
    de = DH[perm[E[:, 0]], perm[E[:, 1]]]
    rhs = float((de ** 2).sum() / n)
    radius = math.log(n) / 16
    close = int((de <= radius).sum())
    NH = int(((DH <= radius) & (DH > 0)).sum() // 2)
    return KleinbergResult(lhs, rhs, lhs / rhs if rhs > 0 else math.inf, lhs <= c * rhs,
                           close, NH, close <= 4 * n / 3)


def adversarial_permutation(gG: Multigraph, DH: np.ndarray, rng: np.random.Generator,
                            steps: int = 20000) -> np.ndarray:
    """Swap descent on sum_{E_G} d_H(pi i, pi j)^2 from a random start."""
    n = gG.n
    perm = rng.permutation(n)
    nb = gG.neighbors
    D2 = DH ** 2

    def local(v, pv):
        return sum(D2[pv, perm[w]] for w in nb[v])

    for _ in range(steps):
        a, b = rng.integers(n, size=2)
        if a == b:
            continue
        pa, pb = perm[a], perm[b]
        before = local(a, pa) + local(b, pb)
        perm[a], perm[b] = pb, pa
        after = local(a, pb) + local(b, pa)
        if after > before:
            perm[a], perm[b] = pa, pb
    return perm


# sparse test instances


def sparse_instance(n: int, chords: int, seed=None, floor: float = 0.04,
                    max_tries: int = 200) -> tuple[Multigraph, float]:
    """Random recursive tree plus random chords, with a delta it is (1+delta)-sparse for.

    delta = max(floor, exact max density - 1); instances whose short cycles
    would not contract cleanly are resampled.
    """
    from .embeddings import quotient_graph

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        parent = [int(rng.integers(i)) for i in range(1, n)]
        E = {(p, i + 1) for i, p in enumerate(parent)}
        while len(E) < n - 1 + chords:
            u, v = sorted(rng.integers(n, size=2).tolist())
            if u != v:
                E.add((u, v))
        g = Multigraph.from_edges(n, sorted(E))
        delta = max(floor, float(max_density(g).density) - 1)
        if delta >= 1 / 3:
            continue
        try:
            quotient_graph(g, 1 / (3 * delta))
        except GraphError:
            continue
        return g, delta
    raise GraphError("no admissible sparse instance found")

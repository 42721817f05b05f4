"""Explicit embeddings into L1 and L2.

Walsh-function truncation of the cube, its composition with a grid
discretisation of finite L1 sets, cones over L1 into L1, snowflaked cones
into L2, and the L1 embedding of the 1-dimensional complex of a sparse graph
through averages of truncated tree metrics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from .conegeom import cone_formula
from .multigraph import (
    GRID,
    Cycle,
    GraphError,
    Multigraph,
    bfs_from,
    bfs_metrics,
    is_connected,
    random_simplicial_points,
    short_cycles,
    simplicial_distance_matrix,
)

MAX_WALSH_BITS = 16
TENSOR_LIMIT = 150  # explicit tensor vectors up to this many points
PRODUCT_LIMIT = 4096  # good-tree measures stay a true product up to this support
EXACT_PRECONDITION_LIMIT = 40

CONE_L1_UPPER = math.pi * math.sqrt(5.0) / 2.0
CONE_L1_LOWER = math.pi * (math.e - 1) / math.sqrt(4 * math.pi ** 2 * math.e ** 2 + (math.e - 1) ** 2)
CONE_L1_DISTORTION = 11.17
TRUNCATION_LOW = 1.0 - 1.0 / math.e


class BudgetError(ValueError):
    pass


class TreeMeasureError(ValueError):
    pass


# Walsh truncation


def walsh_distance(h, M: float):
    """M (1 - e^{-h/M}): the truncated distance at cube distance h."""
    return -M * np.expm1(-np.asarray(h, dtype=np.float64) / M)


def walsh_truncation(points, M: float, weights=None) -> np.ndarray:
    """Rows Phi(z) in R^{2^k} for 0/1 rows z; coordinate A carries c_A W_A(z).

    With bit weights w_b, lambda_b = (1 + e^{-w_b/M}) / 2 and
    c_A = M prod_{b not in A} lambda_b prod_{b in A} (1 - lambda_b), so that
    ||Phi(z)||_1 = M and ||Phi(x) - Phi(y)||_1 = M (1 - e^{-sum_{x_b != y_b} w_b / M}).
    """
    Z = np.asarray(points, dtype=np.int64)
    if Z.ndim != 2:
        raise ValueError("points must be a 2-D 0/1 array")
    k = Z.shape[1]
    if k > MAX_WALSH_BITS:
        raise BudgetError(f"{k} cube dimensions exceed the 2^{MAX_WALSH_BITS} coordinate budget")
    if not np.isin(Z, (0, 1)).all():
        raise ValueError("points must have 0/1 entries")
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=np.float64)
    lam = (1.0 + np.exp(-w / M)) / 2.0
    A = np.arange(1 << k, dtype=np.int64)
    bits = (A[:, None] >> np.arange(k)) & 1
    coef = M * np.prod(np.where(bits == 1, 1.0 - lam, lam), axis=1)
    z = (Z << np.arange(k)).sum(axis=1)
    parity = np.bitwise_count(A[None, :] & z[:, None]) & 1
    return coef[None, :] * (1 - 2 * parity.astype(np.float64))


def l1_distances(V) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    return np.abs(V[:, None, :] - V[None, :, :]).sum(-1)


# grid discretisation


@dataclass
class CubeDiscretization:
    """Rounding to the grid eta Z^dims, rescaled so that d/(1+eps) <= d' <= d.

    Rounding moves each coordinate by at most eta/2, so the grid distance is
    within dims*eta = kappa*d_min of the true one, kappa = eps/(2+eps).
    Dividing by c = 1 + kappa lands every pair in [d/(1+eps), d].
    """

    origin: np.ndarray
    eta: float
    scale: float
    eps: float

    @classmethod
    def fit(cls, points, eps: float) -> "CubeDiscretization":
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        X = np.asarray(points, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if not np.isfinite(X).all():
            raise ValueError("coordinates must be finite")
        dims = X.shape[1]
        distinct = np.unique(X, axis=0)
        kappa = eps / (2.0 + eps)
        if len(distinct) < 2:
            return cls(X.min(axis=0), 1.0, 1.0 + kappa, eps)
        dist, _ = cKDTree(distinct).query(distinct, k=2, p=1)
        dmin = float(dist[:, 1].min())
        return cls(X.min(axis=0), kappa * dmin / dims, 1.0 + kappa, eps)

    def quantize(self, points) -> np.ndarray:
        X = np.asarray(points, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        return np.rint((X - self.origin) / self.eta).astype(np.int64)

    def distance(self, qa, qb) -> np.ndarray:
        return np.abs(np.asarray(qa) - np.asarray(qb)).sum(-1) * (self.eta / self.scale)

    def cube_bits(self, Q) -> tuple[np.ndarray, np.ndarray]:
        """Threshold bits with weights: one bit per gap between consecutive values.

        This is the unary cube embedding with runs of identical columns merged.
        """
        Q = np.asarray(Q, dtype=np.int64)
        cols, weights = [], []
        for j in range(Q.shape[1]):
            vals = np.unique(Q[:, j])
            for lo, hi in zip(vals[:-1], vals[1:]):
                cols.append(Q[:, j] >= hi)
                weights.append((hi - lo) * self.eta / self.scale)
        bits = np.array(cols, dtype=np.int64).T.reshape(Q.shape[0], len(cols))
        return bits, np.array(weights)


@dataclass
class TruncatedL1:
    """A finite L1 set pushed through grid rounding and Walsh truncation at M."""

    disc: CubeDiscretization
    Q: np.ndarray
    M: float

    def cube_distances(self) -> np.ndarray:
        return self.disc.distance(self.Q[:, None, :], self.Q[None, :, :])

    def distances(self) -> np.ndarray:
        """Pairwise L1 distances of the truncated vectors, in closed form."""
        return walsh_distance(self.cube_distances(), self.M)

    def pair_distances(self, i, j) -> np.ndarray:
        return walsh_distance(self.disc.distance(self.Q[i], self.Q[j]), self.M)

    def vectors(self) -> np.ndarray:
        bits, w = self.disc.cube_bits(self.Q)
        return walsh_truncation(bits, self.M, w)


def truncate_l1(points, M: float, eps: float) -> TruncatedL1:
    """T with (1-1/e)/(1+eps) <= ||T(x)-T(y)||_1 / min(M, ||x-y||_1) <= 1 and ||T(x)||_1 = M."""
    disc = CubeDiscretization.fit(points, eps)
    return TruncatedL1(disc, disc.quantize(points), float(M))


def truncation_ratios(points, T: TruncatedL1) -> np.ndarray:
    """Off-diagonal ratios ||T(x)-T(y)||_1 / min(M, ||x-y||_1) over distinct pairs."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    d = l1_distances(X)
    iu = np.triu_indices(len(X), 1)
    keep = d[iu] > 0
    return T.distances()[iu][keep] / np.minimum(T.M, d[iu][keep])


# cones over L1


@dataclass
class ConeL1Embedding:
    """F(s, x) = s T_pi(x) on finitely many cone points (s_i, x_i)."""

    radii: np.ndarray
    base: np.ndarray
    trunc: TruncatedL1

    def pair_distances(self, i, j) -> np.ndarray:
        """||F(p_i) - F(p_j)||_1 in closed form.

        Walsh coordinates agree in sign on a set of total weight M(1+e^{-h/M})/2
        and disagree on the rest, giving |s-t| times the first plus (s+t) times the second.
        """
        M = self.trunc.M
        h = self.trunc.disc.distance(self.trunc.Q[i], self.trunc.Q[j])
        e = np.exp(-h / M)
        s, t = self.radii[i], self.radii[j]
        return np.abs(s - t) * M * (1 + e) / 2 + (s + t) * M * (1 - e) / 2

    def cone_distances(self, i, j) -> np.ndarray:
        dX = np.abs(self.base[i] - self.base[j]).sum(-1)
        return cone_formula(dX, self.radii[i], self.radii[j])

    def vectors(self) -> np.ndarray:
        return self.radii[:, None] * self.trunc.vectors()


def cone_l1_embed(radii, base, eps: float = 0.01) -> ConeL1Embedding:
    s = np.asarray(radii, dtype=np.float64)
    X = np.asarray(base, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if (s < 0).any():
        raise ValueError("radii must be nonnegative")
    return ConeL1Embedding(s, X, truncate_l1(X, math.pi, eps))


def certify_cone_l1(emb: ConeL1Embedding, i, j) -> dict:
    """Ratio range of ||F(p)-F(q)||_1 / d_cone over the given pairs."""
    i, j = np.asarray(i), np.asarray(j)
    dc = emb.cone_distances(i, j)
    keep = dc > 0
    r = emb.pair_distances(i[keep], j[keep]) / dc[keep]
    eps = emb.trunc.disc.eps
    return {
        "pairs": int(keep.sum()),
        "ratio_min": float(r.min()),
        "ratio_max": float(r.max()),
        "distortion": float(r.max() / r.min()),
        "upper": CONE_L1_UPPER,
        "lower": CONE_L1_LOWER / (1 + eps),
        "upper_ok": bool(r.max() <= CONE_L1_UPPER * (1 + 1e-12)),
        "lower_ok": bool(r.min() >= CONE_L1_LOWER / (1 + eps) * (1 - 1e-12)),
    }


# snowflakes into L2


def gram_embedding(K, tol: float = 1e-9) -> np.ndarray:
    """Rows V with V V^T = K, from the eigendecomposition of a PSD Gram matrix."""
    K = np.asarray(K, dtype=np.float64)
    K = (K + K.T) / 2
    w, U = np.linalg.eigh(K)
    scale = max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    if w.size and w.min() < -tol * scale:
        raise ValueError(f"Gram matrix is indefinite (eigenvalue {w.min():.3g})")
    return U * np.sqrt(np.clip(w, 0.0, None))[None, :]


def helix(s, alpha: float) -> np.ndarray:
    """Points h(s) in L2 with h(0) = 0 and ||h(s) - h(t)||_2 = |s - t|^alpha."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    s = np.asarray(s, dtype=np.float64)
    a = 2 * alpha
    K = (np.abs(s)[:, None] ** a + np.abs(s)[None, :] ** a - np.abs(s[:, None] - s[None, :]) ** a) / 2
    return gram_embedding(K)


def tau_embedding(Y, alpha: float) -> np.ndarray:
    """Gaussian-kernel map with ||tau(y)||_2 = pi^alpha / sqrt 2 and

    sqrt(1 - 1/e) <= ||tau(x) - tau(y)||_2 / min(pi^alpha, ||x - y||_2) <= 1.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    c = math.pi ** (2 * alpha)
    sq = ((Y[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    return gram_embedding(c / 2 * np.exp(-sq / c))


def tensor_rows(a, x) -> np.ndarray:
    """Row-wise tensor products a_i (x) x_i, flattened."""
    a, x = np.asarray(a), np.asarray(x)
    return np.einsum("ia,ib->iab", a, x).reshape(a.shape[0], -1)


def tensor_identity(a, b, x, y) -> float:
    """Right side of ||a(x)x - b(x)y||^2 written through norms and differences."""
    na, nb, nx_, ny = (float(np.dot(v, v)) for v in (a, b, x, y))
    dab, dxy = float(np.sum((a - b) ** 2)), float(np.sum((x - y) ** 2))
    return na * nx_ + nb * ny - 0.5 * (na + nb - dab) * (nx_ + ny - dxy)


def snowflake_upper_constant(alpha: float) -> float:
    """pi^a (2^{2a/(1-a)} + 1)^{1-a} / 2^{a+1/2}, evaluated in log form; 4 pi / 2^{3/2} at a = 1."""
    if alpha >= 1:
        log2_term = 2.0
    else:
        x = 2 * alpha / (1 - alpha)
        log2_term = 2 * alpha + (1 - alpha) * math.log2(1 + 2.0 ** -x)
    return math.pi ** alpha * 2.0 ** (log2_term - alpha - 0.5)


def snowflake_lower_constant(alpha: float, D: float) -> float:
    """C with d_cone^alpha <= C ||phi(p) - phi(q)||_2."""
    A = math.pi ** (2 * alpha) * math.e * D ** 2 / (math.e - 1)
    return D * (2 * math.e / (math.e - 1)) ** (alpha / 2) * math.sqrt(max(1.0, 3 ** alpha / A))


@dataclass
class SnowflakeReport:
    alpha: float
    D: float
    distances: np.ndarray
    cone_alpha: np.ndarray
    ratio_min: float
    ratio_max: float
    distortion: float
    upper_constant: float
    lower_constant: float
    upper_ok: bool
    lower_ok: bool
    vectors: np.ndarray | None = None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "alpha", "D", "ratio_min", "ratio_max", "distortion",
            "upper_constant", "lower_constant", "upper_ok", "lower_ok")}


def snowflake_cone_embed(radii, base_index, dX, f, alpha: float, D: float,
                         explicit: bool | None = None) -> SnowflakeReport:
    """phi(s, x) = h_alpha(s) (x) tau_alpha(f(x)) on cone points (radii[i], base_index[i]).

    ``dX`` is the base metric and ``f`` (rows) must satisfy
    d^alpha / D <= ||f(x) - f(y)||_2 <= d^alpha; this is checked.
    """
    s = np.asarray(radii, dtype=np.float64)
    idx = np.asarray(base_index, dtype=np.int64)
    dX = np.asarray(dX, dtype=np.float64)
    F = np.asarray(f, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    fd = np.sqrt(((F[:, None, :] - F[None, :, :]) ** 2).sum(-1))
    iu = np.triu_indices(len(dX), 1)
    pos = dX[iu] > 0
    if pos.any():
        r = fd[iu][pos] / dX[iu][pos] ** alpha
        if r.max() > 1 + 1e-9 or r.min() < 1 / D - 1e-9:
            raise ValueError("f does not satisfy its distortion certificate")
    H = helix(s, alpha)
    T = tau_embedding(F[idx], alpha)
    # <a(x)x, b(x)y> = <a, b><x, y>
    G = (H @ H.T) * (T @ T.T)
    nrm = np.diag(G)
    dist = np.sqrt(np.clip(nrm[:, None] + nrm[None, :] - 2 * G, 0.0, None))
    vectors = None
    if explicit or (explicit is None and len(s) <= TENSOR_LIMIT):
        vectors = tensor_rows(H, T)
    cone = cone_formula(dX[idx[:, None], idx[None, :]], s[:, None], s[None, :]) ** alpha
    ju = np.triu_indices(len(s), 1)
    keep = cone[ju] > 0
    ratios = dist[ju][keep] / cone[ju][keep]
    up, lo = snowflake_upper_constant(alpha), snowflake_lower_constant(alpha, D)
    return SnowflakeReport(
        alpha=alpha, D=D, distances=dist, cone_alpha=cone,
        ratio_min=float(ratios.min()), ratio_max=float(ratios.max()),
        distortion=float(ratios.max() / ratios.min()),
        upper_constant=up, lower_constant=lo,
        upper_ok=bool(ratios.max() <= up * (1 + 1e-9)),
        lower_ok=bool(ratios.min() * lo >= 1 - 1e-9),
        vectors=vectors,
    )


def l1_half_snowflake(points) -> np.ndarray:
    """Rows in L2 with ||f(x) - f(y)||_2 = ||x - y||_1^{1/2}, via the negative-type Gram matrix."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    X = X - X[0]
    nrm = np.abs(X).sum(-1)
    return gram_embedding((nrm[:, None] + nrm[None, :] - l1_distances(X)) / 2)


# spanning-tree measures


@dataclass
class SpanningTreeDistribution:
    """Finitely supported measure on spanning trees, trees given as edge-index arrays."""

    n: int
    edges: np.ndarray
    trees: list[np.ndarray]
    weights: list[Fraction]
    info: dict = field(default_factory=dict)

    def validate(self) -> None:
        if len(self.trees) != len(self.weights):
            raise TreeMeasureError("trees and weights differ in length")
        if sum(self.weights, Fraction(0)) != 1:
            raise TreeMeasureError("weights do not sum to 1")
        if any(w <= 0 for w in self.weights):
            raise TreeMeasureError("weights must be positive")
        for T in self.trees:
            if not is_spanning_tree(self.n, self.edges[T]):
                raise TreeMeasureError("support contains a non-tree")

    def marginals(self) -> list[Fraction]:
        out = [Fraction(0)] * len(self.edges)
        for T, w in zip(self.trees, self.weights):
            for e in T:
                out[e] += w
        return out

    def __len__(self) -> int:
        return len(self.trees)


def is_spanning_tree(n: int, edges) -> bool:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) != n - 1:
        return False
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        ru, rv = find(int(u)), find(int(v))
        if ru == rv:
            return False
        parent[ru] = rv
    return True


def _exact_weights(w) -> list[Fraction]:
    fr = [Fraction(float(x)).limit_denominator(10 ** 12) for x in w]
    total = sum(fr, Fraction(0))
    return [x / total for x in fr]


def comonotone_coupling(parts: list[tuple[list[np.ndarray], list[Fraction]]]):
    """Couple measures by sharing one uniform variable; marginals of each part are kept."""
    cum = []
    for _, ws in parts:
        acc, c = Fraction(0), []
        for w in ws:
            acc += w
            c.append(acc)
        cum.append(c)
    cuts = sorted(set(x for c in cum for x in c))
    trees, weights = [], []
    pos = [0] * len(parts)
    prev = Fraction(0)
    for b in cuts:
        chosen = []
        for k, (ts, _) in enumerate(parts):
            while cum[k][pos[k]] < b:
                pos[k] += 1
            chosen.append(ts[pos[k]])
        trees.append(np.concatenate(chosen) if chosen else np.zeros(0, dtype=np.int64))
        weights.append(b - prev)
        prev = b
    return trees, weights


def product_coupling(parts):
    trees, weights = [], []
    for combo in product(*[list(zip(ts, ws)) for ts, ws in parts]):
        trees.append(np.concatenate([t for t, _ in combo]) if combo else np.zeros(0, dtype=np.int64))
        w = Fraction(1)
        for _, x in combo:
            w *= x
        weights.append(w)
    return trees, weights


def _block_lp(nv: int, bedges: np.ndarray, lower: float, rng: np.random.Generator,
              max_rounds: int) -> tuple[list[np.ndarray], list[Fraction], float]:
    """Max-min marginal tree measure on one 2-connected block by column generation.

    The master LP maximises t subject to sum_T w_T [e in T] >= t and sum w = 1;
    pricing is a maximum spanning tree under the dual edge prices.
    """
    m = len(bedges)
    G = nx.MultiGraph()
    G.add_nodes_from(range(nv))
    for k, (u, v) in enumerate(bedges):
        G.add_edge(int(u), int(v), key=k)

    def tree_for(price) -> np.ndarray:
        for (u, v, k) in G.edges(keys=True):
            G[u][v][k]["w"] = float(price[k])
        T = nx.maximum_spanning_tree(G, weight="w")
        return np.array(sorted(k for _, _, k in T.edges(keys=True)), dtype=np.int64)

    cols = [tree_for(rng.random(m)) for _ in range(min(m, 8))]
    for _ in range(max_rounds):
        K = len(cols)
        A = np.zeros((m, K))
        for c, T in enumerate(cols):
            A[T, c] = 1.0
        res = linprog(
            np.r_[np.zeros(K), -1.0],
            A_ub=np.c_[-A, np.ones(m)], b_ub=np.zeros(m),
            A_eq=np.r_[np.ones(K), 0.0][None, :], b_eq=[1.0],
            bounds=[(0, None)] * K + [(None, None)], method="highs",
        )
        if res.status != 0:
            raise TreeMeasureError(f"master LP failed: {res.message}")
        tstar = -res.fun
        y = -res.ineqlin.marginals
        T = tree_for(y)
        if y[T].sum() <= tstar + 1e-10:
            break
        cols.append(T)
    else:
        raise TreeMeasureError("column generation did not terminate")
    if tstar < lower - 1e-9:
        raise TreeMeasureError(f"no tree measure with marginals >= {lower:.6g} (best {tstar:.6g})")
    w = res.x[:-1]
    keep = [c for c in range(len(cols)) if w[c] > 1e-13]
    return [cols[c] for c in keep], _exact_weights(w[keep]), tstar


def tree_polytope_measure(g: Multigraph, delta: float | None = None, lower: float | None = None,
                          seed: int = 0, coupling: str = "comonotone") -> SpanningTreeDistribution:
    """Spanning-tree measure with every edge marginal at least ``lower`` (default 1/(1+delta)).

    Blocks are handled separately: a bridge has marginal 1, a cycle block gets
    the uniform measure, other blocks go through the max-min LP. Block measures
    are joined by a coupling that keeps each block's marginals.
    """
    if lower is None:
        if delta is None:
            raise ValueError("give delta or lower")
        lower = 1.0 / (1.0 + delta)
    if not is_connected(g):
        raise GraphError("tree measures need a connected graph")
    if g.loops.any():
        raise GraphError("loops lie in no spanning tree")
    edges = g.edge_instances
    info = {"lower": lower, "blocks": 0, "lp_blocks": 0, "coupling": coupling}
    if g.n <= EXACT_PRECONDITION_LIMIT and g.n >= 2:
        from .density import max_density_minus_one

        rho = max_density_minus_one(g).density
        info["precondition"] = "validated" if 1 / rho >= lower - 1e-12 else "fails"
        info["max_density_minus_one"] = float(rho)
    else:
        info["precondition"] = "assumed"
    if g.n == 1:
        return SpanningTreeDistribution(1, edges, [np.zeros(0, dtype=np.int64)], [Fraction(1)], info)
    H = nx.Graph()
    H.add_nodes_from(range(g.n))
    by_pair: dict[tuple[int, int], list[int]] = {}
    for k, (u, v) in enumerate(edges):
        H.add_edge(int(u), int(v))
        by_pair.setdefault((int(u), int(v)), []).append(k)
    rng = np.random.default_rng(seed)
    parts = []
    for comp in nx.biconnected_component_edges(H):
        verts = sorted({int(x) for e in comp for x in e})
        idx = np.array(sorted(k for u, v in comp for k in by_pair[(min(u, v), max(u, v))]),
                       dtype=np.int64)
        info["blocks"] += 1
        if len(idx) == 1:
            parts.append(([idx], [Fraction(1)]))
        elif len(idx) == len(verts):
            c = len(idx)
            parts.append(([np.delete(idx, i) for i in range(c)], [Fraction(1, c)] * c))
        else:
            info["lp_blocks"] += 1
            relabel = {v: i for i, v in enumerate(verts)}
            bedges = np.array([[relabel[int(u)], relabel[int(v)]] for u, v in edges[idx]])
            ts, ws, _ = _block_lp(len(verts), bedges, lower, rng, max_rounds=20 * len(idx) + 200)
            parts.append(([idx[t] for t in ts], ws))
    if coupling == "product":
        trees, weights = product_coupling(parts)
    else:
        trees, weights = comonotone_coupling(parts)
    dist = SpanningTreeDistribution(g.n, edges, trees, weights, info)
    dist.validate()
    marg = dist.marginals()
    if min(marg) < Fraction(lower) - Fraction(1, 10 ** 9):
        raise TreeMeasureError("marginal bound lost in the decomposition")
    if info["precondition"] == "assumed":
        warnings.warn("the |E(S)| <= (1+delta)(|S|-1) condition was not checked on this graph",
                      stacklevel=2)
    return dist


# quotient by short cycles


@dataclass
class Quotient:
    graph: Multigraph
    vmap: np.ndarray  # host vertex -> quotient vertex
    cycles: list[Cycle]
    edge_map: np.ndarray  # quotient edge instance -> host edge instance
    cycle_edges: list[np.ndarray]  # host edge instances on each cycle
    t: float


def _threshold(t: float) -> int:
    """Integer T with: length < t iff length < T."""
    return int(math.ceil(t))


def quotient_graph(g: Multigraph, t: float) -> Quotient:
    """Contract every cycle shorter than t to a single vertex."""
    if not g.is_simple:
        raise GraphError("quotient needs a simple graph")
    if not is_connected(g):
        raise GraphError("quotient needs a connected graph")
    edges = g.edge_instances
    if len(edges) == g.n - 1:
        cycles = []
    else:
        cycles = short_cycles(g, _threshold(t))
    owner = np.full(g.n, -1, dtype=np.int64)
    for c, C in enumerate(cycles):
        if not C.induced:
            raise GraphError(f"short cycle {C.vertices} has a chord")
        vs = np.array(C.vertices)
        if (owner[vs] >= 0).any():
            raise GraphError("short cycles overlap")
        owner[vs] = c
    free = np.flatnonzero(owner < 0)
    vmap = np.empty(g.n, dtype=np.int64)
    vmap[free] = np.arange(len(free))
    on_cycle = owner >= 0
    vmap[on_cycle] = len(free) + owner[on_cycle]
    nq = len(free) + len(cycles)
    index = {(int(u), int(v)): k for k, (u, v) in enumerate(edges)}
    cycle_edges = [np.array(sorted(index[e] for e in C.edges()), dtype=np.int64) for C in cycles]
    qedges = {}
    for k, (u, v) in enumerate(edges):
        if owner[u] >= 0 and owner[u] == owner[v]:
            continue
        a, b = sorted((int(vmap[u]), int(vmap[v])))
        if (a, b) in qedges:
            raise GraphError("contraction creates a parallel edge")
        qedges[(a, b)] = k
    q = Multigraph.from_edges(nq, list(qedges))
    edge_map = np.array([qedges[(int(a), int(b))] for a, b in q.edge_instances], dtype=np.int64)
    gamma = int(on_cycle.sum())
    if q.n != g.n - gamma + len(cycles) or len(q.edge_instances) != len(edges) - gamma:
        raise AssertionError("quotient size identities failed")
    for c in range(len(cycles)):
        dist = bfs_from(q, len(free) + c, limit=int(math.floor(t + 1)))
        others = dist[len(free):]
        others = np.delete(others, c)
        if ((others >= 0) & (others <= t + 1)).any():
            raise GraphError("contracted cycles are within distance t + 1")
    return Quotient(q, vmap, cycles, edge_map, cycle_edges, t)


def good_tree_measure(g: Multigraph, delta: float, seed: int = 0) -> SpanningTreeDistribution:
    """Measure on spanning trees containing all but one edge of every cycle shorter than 1/(3 delta).

    Quotient-tree measure times an independent uniform choice of dropped edge per
    short cycle; a comonotone coupling replaces the product when its support is too large.
    """
    if not 0 < delta < 1 / 3:
        raise ValueError("delta must lie in (0, 1/3)")
    quo = quotient_graph(g, 1.0 / (3.0 * delta))
    lower = (1 - 3 * delta) / (1 + delta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sigma = tree_polytope_measure(quo.graph, lower=lower, seed=seed)
    parts = [([quo.edge_map[T] for T in sigma.trees], sigma.weights)]
    for ce in quo.cycle_edges:
        c = len(ce)
        parts.append(([np.delete(ce, i) for i in range(c)], [Fraction(1, c)] * c))
    size = 1
    for ts, _ in parts:
        size *= len(ts)
    if size <= PRODUCT_LIMIT:
        trees, weights, mode = *product_coupling(parts), "product"
    else:
        trees, weights, mode = *comonotone_coupling(parts), "comonotone"
    info = {"quotient": quo, "lower": lower, "coupling": mode, "sigma": sigma.info}
    dist = SpanningTreeDistribution(g.n, g.edge_instances, trees, weights, info)
    dist.validate()
    marg = dist.marginals()
    on_cycle = np.zeros(len(marg), dtype=bool)
    for ce in quo.cycle_edges:
        on_cycle[ce] = True
        if any(marg[e] != Fraction(len(ce) - 1, len(ce)) for e in ce):
            raise TreeMeasureError("cycle marginal is not (|C|-1)/|C|")
    off = [marg[e] for e in np.flatnonzero(~on_cycle)]
    if off and min(off) < Fraction(lower) - Fraction(1, 10 ** 9):
        raise TreeMeasureError("off-cycle marginal below (1-3 delta)/(1+delta)")
    return dist


# trees and the complex


def tree_l1_coordinates(n: int, tree_edges, root: int = 0) -> np.ndarray:
    """Vertex coordinates in R^{n-1}: coordinate e is 1 on the side of e away from the root."""
    tree_edges = np.asarray(tree_edges, dtype=np.int64).reshape(-1, 2)
    A = sp.coo_matrix((np.ones(len(tree_edges)), (tree_edges[:, 0], tree_edges[:, 1])), shape=(n, n))
    order, pred = csgraph.breadth_first_order(A, root, directed=False)
    if len(order) != n:
        raise GraphError("edges do not span")
    col = {}
    for k, (u, v) in enumerate(tree_edges):
        child = int(v) if pred[v] == u else int(u)
        col[child] = k
    X = np.zeros((n, len(tree_edges)))
    for v in order[1:]:
        X[v] = X[pred[v]]
        X[v, col[int(v)]] = 1.0
    return X


def _tree_block(g: Multigraph, tree: np.ndarray, points, M: float, diam: float):
    """Mean over split points of Phi_M(d) and of min(d, diam) for one tree T.

    A non-tree edge e = (u, v) is cut at a uniform U_e: [0, U_e] hangs from u,
    the rest from v. A point at position a on e therefore hangs from u with
    probability 1 - a and from v with probability a, and two points a < b on e
    are separated with probability b - a. The mean is an exact finite mixture,
    so the block is still an L1 metric.
    """
    edges = g.edge_instances
    in_tree = np.zeros(len(edges), dtype=bool)
    in_tree[tree] = True
    m = len(points)
    ends = np.zeros((m, 2), dtype=np.int64)
    offs = np.zeros((m, 2))
    prob = np.zeros((m, 2))
    edge = np.full(m, -1, dtype=np.int64)
    pos = np.zeros(m)
    for i, p in enumerate(points):
        if p.vertex is not None:
            ends[i] = p.vertex
            continue
        e = p.edge
        a = p.offset / GRID
        ends[i] = edges[e]
        offs[i] = (a, 1 - a)
        edge[i], pos[i] = e, a
        if not in_tree[e]:
            prob[i] = (1 - a, a)
    rand = edge >= 0
    rand[rand] = ~in_tree[edge[rand]]
    anchors = np.unique(ends)
    te = edges[tree]
    A = sp.coo_matrix((np.ones(len(te)), (te[:, 0], te[:, 1])), shape=(g.n, g.n)).tocsr()
    DT = csgraph.shortest_path(A, directed=False, unweighted=True, indices=anchors)
    row = np.searchsorted(anchors, ends)
    cand = np.empty((2, 2, m, m))
    for a in range(2):
        for b in range(2):
            cand[a, b] = offs[:, a][:, None] + DT[row[:, a]][:, ends[:, b]] + offs[:, b][None, :]
    ri, rj = rand[:, None], rand[None, :]
    same = (edge[:, None] == edge[None, :]) & (edge[:, None] >= 0)
    lo = np.minimum(pos[:, None], pos[None, :])
    gap = np.abs(pos[:, None] - pos[None, :])
    # d_T(u, v) for the edge (u, v) carrying each point; its ends are anchors
    cut = np.where(edge >= 0, DT[row[:, 0], ends[:, 1]], 0.0)
    through = lo + cut[:, None] + (1 - lo - gap)

    def mean(phi):
        W = phi(cand)
        fixed = W.min(axis=(0, 1))
        left = (prob.T[:, :, None] * W.min(axis=1)).sum(0)
        right = (prob.T[:, None, :] * W.min(axis=0)).sum(0)
        both = (prob.T[:, None, :, None] * prob.T[None, :, None, :] * W).sum((0, 1))
        out = np.where(ri & rj, both, np.where(ri, left, np.where(rj, right, fixed)))
        split = (1 - gap) * phi(gap) + gap * phi(through)
        out = np.where(same, np.where(ri & rj, split, phi(gap)), out)
        np.fill_diagonal(out, 0.0)
        return out

    return mean(lambda d: walsh_distance(d, M)), mean(lambda d: np.minimum(d, diam))


@dataclass
class SparseEmbeddingReport:
    points: list
    d_sigma: np.ndarray
    distances: np.ndarray
    expected_tree: np.ndarray  # E_T min(d_T, diam)
    delta: float
    diam: float
    trees: int
    coupling: str
    distortion: float
    ratio_min: float
    ratio_max: float
    expectation_constant: float
    fitted_C: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "delta", "diam", "trees", "coupling", "distortion", "ratio_min", "ratio_max",
            "expectation_constant", "fitted_C")} | {"points": len(self.points)}


def sparse_graph_l1(g: Multigraph, delta: float, samples: int = 200, seed: int = 0,
                    points=None, max_trees: int | None = None) -> SparseEmbeddingReport:
    """Embed sample points of Sigma(G) into L1 through truncated random-tree metrics.

    Each tree T of the good-tree measure is lifted to Sigma(G) by cutting every
    non-tree edge at an independent uniform point; the point x goes to the
    weight-scaled block w_T Phi(F_T(x)), where F_T is the isometric L1 embedding
    of the lifted tree and Phi the Walsh truncation at diam(G). Block distances
    are averaged over the split points in closed form.
    """
    rng = np.random.default_rng(seed)
    if not is_connected(g):
        raise GraphError("sparse embedding needs a connected graph")
    edges = g.edge_instances
    if len(edges) == g.n - 1:
        measure = SpanningTreeDistribution(g.n, edges, [np.arange(len(edges))], [Fraction(1)],
                                           {"coupling": "single"})
    else:
        measure = good_tree_measure(g, delta, seed=seed)
    if max_trees is not None and len(measure) > max_trees:
        raise TreeMeasureError(f"measure has {len(measure)} trees, budget is {max_trees}")
    D, diam, _ = bfs_metrics(g)
    if points is None:
        points = random_simplicial_points(g, samples, rng)
    d_sigma = simplicial_distance_matrix(g, points, D)
    M = max(diam, 1.0)
    emb = np.zeros_like(d_sigma)
    expect = np.zeros_like(d_sigma)
    for T, w in zip(measure.trees, measure.weights):
        phi, capped = _tree_block(g, T, points, M, diam)
        emb += float(w) * phi
        expect += float(w) * capped
    iu = np.triu_indices(len(points), 1)
    keep = d_sigma[iu] > 0
    r = emb[iu][keep] / d_sigma[iu][keep]
    e = expect[iu][keep] / d_sigma[iu][keep]
    distortion = float(r.max() / r.min())
    return SparseEmbeddingReport(
        points=points, d_sigma=d_sigma, distances=emb, expected_tree=expect,
        delta=delta, diam=diam, trees=len(measure), coupling=measure.info.get("coupling", ""),
        distortion=distortion, ratio_min=float(r.min()), ratio_max=float(r.max()),
        expectation_constant=float(e.max()), fitted_C=distortion / (1 + delta * diam),
    )

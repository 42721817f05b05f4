"""Spectral gaps and nonlinear Poincare constants of regular graphs.

For a d-regular graph on n vertices and maps f, h into a metric space X,

    ratio(f)     = mean_{u,v} d(f u, f v)^2 / ( (1/|E|) sum_{edges} d(f u, f v)^2 )
    ratio+(f, h) = mean_{u,v} d(f u, h v)^2 / ( (1/(n d)) sum_{u,v} E(u,v) d(f u, h v)^2 )

with |E| = n d / 2. gamma and gamma_plus are the suprema of these ratios.
0/0 counts as 0 and c/0 with c > 0 as +inf.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import eigsh

from .metric import FiniteMetric
from .multigraph import GraphError, Multigraph

DENSE_LIMIT = 4096
EXHAUSTIVE_LIMIT = 10 ** 7


def spectrum(g: Multigraph) -> np.ndarray:
    """All eigenvalues of the normalized adjacency, in decreasing order."""
    if g.degree is None:
        raise GraphError("spectrum needs a regular graph")
    if g.n > DENSE_LIMIT:
        raise GraphError("full spectrum only for n <= 4096; use extreme_eigenvalues")
    A = g.dense() / g.degree
    return np.linalg.eigvalsh(A)[::-1]


def _components(g: Multigraph) -> int:
    return csgraph.connected_components(g.adjacency(), directed=False)[0]


def extreme_eigenvalues(g: Multigraph) -> tuple[float, float]:
    """``(lambda_2, lambda_n)`` of the normalized adjacency at any size."""
    if g.degree is None:
        raise GraphError("spectrum needs a regular graph")
    if g.n == 1:
        return 1.0, 1.0
    if g.n <= DENSE_LIMIT:
        ev = spectrum(g)
        return float(ev[1]), float(ev[-1])
    A = g.normalized_adjacency().tocsr()
    lam_n = float(eigsh(A, k=1, which="SA", tol=1e-10, return_eigenvectors=False)[0])
    if _components(g) > 1:
        return 1.0, lam_n
    vals = eigsh(A, k=2, which="LA", tol=1e-10, return_eigenvectors=False)
    return float(np.sort(vals)[0]), lam_n


def second_eigenvector(g: Multigraph) -> tuple[float, np.ndarray]:
    if g.n > DENSE_LIMIT:
        raise GraphError("dense eigenvectors only for n <= 4096")
    w, V = np.linalg.eigh(g.dense() / g.degree)
    return float(w[-2]), V[:, -2]


def gamma_line(g: Multigraph) -> float:
    """gamma(G, d_R^2) = 1 / (1 - lambda_2)."""
    lam2, _ = extreme_eigenvalues(g)
    if lam2 >= 1 - 1e-12:
        raise GraphError("graph is disconnected (lambda_2 = 1)")
    return 1.0 / (1.0 - lam2)


def gamma_plus_line(g: Multigraph) -> float:
    """gamma_+(G, d_R^2) = 1 / (1 - max(lambda_2, -lambda_n))."""
    lam2, lamn = extreme_eigenvalues(g)
    if lam2 >= 1 - 1e-12:
        raise GraphError("graph is disconnected (lambda_2 = 1)")
    if -lamn >= 1 - 1e-12:
        raise GraphError("graph has a bipartite component (lambda_n = -1)")
    return 1.0 / (1.0 - max(lam2, -lamn))


# ratios


def _safe_ratio(num: float, den: float, scale: float = 1.0) -> float:
    if den <= 1e-300 * max(scale, 1.0) or den == 0:
        return 0.0 if num <= 1e-300 * max(scale, 1.0) else np.inf
    return num / den


def _sq_matrix(X: FiniteMetric | None, f, h) -> np.ndarray:
    if X is None:
        f = np.asarray(f, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        return (f[:, None] - h[None, :]) ** 2
    f = np.asarray(f, dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    return X.d[np.ix_(f, h)] ** 2


def averages(g: Multigraph, X: FiniteMetric | None, f, h=None) -> tuple[float, float]:
    """(full average, edge average) entering the ratio; ``h=None`` is the one-map case."""
    plus = h is not None
    K = _sq_matrix(X, f, f if h is None else h)
    n, d = g.n, g.degree
    if d is None:
        raise GraphError("Poincare ratios need a regular graph")
    coo = g.mult.tocoo()
    weighted = float(np.sum(coo.data * K[coo.row, coo.col]))
    full = float(K.sum()) / n ** 2
    if plus:
        edge = weighted / (n * d)
    else:
        # edges counted once, |E| = n d / 2; loops contribute zero
        edge = (0.5 * weighted) / (n * d / 2)
    return full, edge


def poincare_ratio(g: Multigraph, X: FiniteMetric | None, f) -> float:
    """The gamma ratio of one map; ``X=None`` means f is real valued."""
    full, edge = averages(g, X, f)
    if full > 0 and edge > 4 * full * (1 + 1e-9):
        raise AssertionError("edge average exceeds four times the full average")
    return _safe_ratio(full, edge, full)


def ratio_plus(g: Multigraph, X: FiniteMetric | None, f, h) -> float:
    """The gamma_+ ratio of a pair of maps."""
    full, edge = averages(g, X, f, h)
    return _safe_ratio(full, edge, full)


def line_ratios(g: Multigraph, F: np.ndarray) -> np.ndarray:
    """gamma ratios of many real maps at once; rows of ``F`` are maps."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    n, d = g.n, g.degree
    Fc = F - F.mean(axis=1, keepdims=True)
    full = 2.0 * (Fc ** 2).sum(axis=1) / n
    coo = sp.triu(g.mult, k=1).tocoo()
    diff = F[:, coo.row] - F[:, coo.col]
    edge = (diff ** 2 @ coo.data) / (n * d / 2)
    out = np.where(edge > 0, full / np.where(edge > 0, edge, 1.0), np.where(full > 0, np.inf, 0.0))
    return out


# search


@dataclass
class PoincareReport:
    gamma_estimate: float
    f: np.ndarray
    h: np.ndarray | None
    mode: str
    exact: bool
    iterations: int = 0
    seed: int | None = None
    degenerate: bool = False
    notes: dict = field(default_factory=dict)

    def recompute(self, g: Multigraph, X: FiniteMetric) -> float:
        if self.h is None:
            return poincare_ratio(g, X, self.f)
        return ratio_plus(g, X, self.f, self.h)

    def to_json(self) -> dict:
        return {
            "gamma_estimate": self.gamma_estimate,
            "f": self.f.tolist(),
            "h": None if self.h is None else self.h.tolist(),
            "mode": self.mode,
            "exact": self.exact,
            "iterations": self.iterations,
            "seed": self.seed,
            "degenerate": self.degenerate,
            "notes": self.notes,
        }


def _edge_arrays(g: Multigraph, with_loops: bool):
    coo = g.mult.tocoo()
    keep = np.ones(len(coo.data), bool) if with_loops else coo.row != coo.col
    return coo.row[keep], coo.col[keep], coo.data[keep].astype(np.float64)


def _exhaustive(g: Multigraph, X: FiniteMetric, plus: bool, chunk: int = 20000):
    n, k, d = g.n, X.n, g.degree
    D2 = X.d ** 2
    r, c, w = _edge_arrays(g, with_loops=plus)
    total = k ** (2 * n if plus else n)
    best, best_idx = -1.0, 0
    width = 2 * n if plus else n
    powers = k ** np.arange(width - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        maps = (idx[:, None] // powers[None, :]) % k
        f = maps[:, :n]
        h = maps[:, n:] if plus else f
        # full sum via value histograms
        cf = np.zeros((len(f), k))
        ch = np.zeros((len(f), k))
        np.add.at(cf, (np.repeat(np.arange(len(f)), n), f.ravel()), 1.0)
        np.add.at(ch, (np.repeat(np.arange(len(f)), n), h.ravel()), 1.0)
        full = np.einsum("ia,ab,ib->i", cf, D2, ch) / n ** 2
        wsum = D2[f[:, r], h[:, c]] @ w
        edge = wsum / (n * d) if plus else (0.5 * wsum) / (n * d / 2)
        ratio = np.where(edge > 1e-300, full / np.where(edge > 1e-300, edge, 1.0),
                         np.where(full > 1e-300, np.inf, 0.0))
        j = int(np.argmax(ratio))
        if ratio[j] > best:
            best, best_idx = float(ratio[j]), int(idx[j])
    maps = (best_idx // powers) % k
    return best, maps[:n], (maps[n:] if plus else None), total


def _local(g: Multigraph, X: FiniteMetric, plus: bool, restarts: int, seed: int,
           max_steps: int):
    n, k, d = g.n, X.n, g.degree
    D2 = X.d ** 2
    rng = np.random.default_rng(seed)
    E = g.mult.astype(np.float64).tocsr()
    E_off = E.copy()
    E_off.setdiag(0)
    E_off.eliminate_zeros()
    norm_full = n ** 2
    # both edge sums run over ordered pairs, so the edge average is sum / (n d)
    norm_edge = n * d
    best = (-1.0, None, None)
    steps_total = 0

    def ratio_of(num, den):
        full, edge = num / norm_full, den / norm_edge
        if edge <= 1e-300:
            return np.inf if full > 1e-300 else 0.0
        return full / edge

    for _ in range(restarts):
        f = rng.integers(k, size=n)
        h = rng.integers(k, size=n) if plus else f
        num = float(D2[np.ix_(f, h)].sum())
        Ef = E if plus else E_off
        den = float((Ef.multiply(D2[np.ix_(f, h)])).sum())
        cur = ratio_of(num, den)
        for _step in range(max_steps):
            steps_total += 1
            if not plus:
                R = D2[:, f].sum(axis=1)  # R[b] = sum_w D2[b, f_w]
                P = E_off @ D2[f, :]  # P[v, x] = sum_w E(v, w) D2[f_w, x]
                a = f
                dnum = 2.0 * (R[None, :] - D2[:, a].T - R[a][:, None])
                dden = 2.0 * (P - P[np.arange(n), a][:, None])
                cand_num = num + dnum
                cand_den = den + dden
                with np.errstate(divide="ignore", invalid="ignore"):
                    cand = np.where(cand_den > 1e-300, (cand_num / norm_full) / (cand_den / norm_edge),
                                    np.where(cand_num > 1e-300, np.inf, 0.0))
                cand[np.arange(n), a] = -np.inf
                j = int(np.argmax(cand))
                v, b = divmod(j, k)
                if not cand[v, b] > cur * (1 + 1e-12) + 1e-15:
                    break
                num, den = float(cand_num[v, b]), float(cand_den[v, b])
                f = f.copy()
                f[v] = b
                h = f
                cur = float(cand[v, b])
            else:
                Rh = D2[:, h].sum(axis=1)
                Rf = D2[f, :].sum(axis=0)
                Ph = E @ D2[h, :]  # Ph[v, x] = sum_w E(v, w) D2[x, h_w]
                Pf = E @ D2[f, :]  # Pf[v, x] = sum_w E(v, w) D2[f_w, x]
                dnum_f = Rh[None, :] - Rh[f][:, None]
                dden_f = Ph - Ph[np.arange(n), f][:, None]
                # moving h_v changes pairs (w, v); the loop term E(v,v) D2[f_v, h_v] is in Pf
                dnum_h = Rf[None, :] - Rf[h][:, None]
                dden_h = Pf - Pf[np.arange(n), h][:, None]
                cn = np.concatenate([num + dnum_f, num + dnum_h])
                cd = np.concatenate([den + dden_f, den + dden_h])
                with np.errstate(divide="ignore", invalid="ignore"):
                    cand = np.where(cd > 1e-300, (cn / norm_full) / (cd / norm_edge),
                                    np.where(cn > 1e-300, np.inf, 0.0))
                cand[np.arange(n), f] = -np.inf
                cand[n + np.arange(n), h] = -np.inf
                j = int(np.argmax(cand))
                row, b = divmod(j, k)
                if not cand[row, b] > cur * (1 + 1e-12) + 1e-15:
                    break
                num, den = float(cn[row, b]), float(cd[row, b])
                if row < n:
                    f = f.copy()
                    f[row] = b
                else:
                    h = h.copy()
                    h[row - n] = b
                cur = float(cand[row, b])
        if cur > best[0]:
            best = (cur, f.copy(), (h.copy() if plus else None))
    return best[0], best[1], best[2], steps_total


def gamma_search(g: Multigraph, X: FiniteMetric, mode: str = "auto", plus: bool = False,
                 restarts: int = 100, seed: int = 0, max_steps: int = 10_000) -> PoincareReport:
    """Largest Poincare ratio over maps V -> X, exactly or by local ascent.

    The result is always a valid lower bound on gamma (or gamma_+) and equals
    it in exhaustive mode.
    """
    if g.degree is None:
        raise GraphError("Poincare constants need a regular graph")
    if X.n == 1:
        zero = np.zeros(g.n, dtype=np.int64)
        return PoincareReport(0.0, zero, zero.copy() if plus else None, "exhaustive", True,
                              degenerate=True)
    size = float(X.n) ** (2 * g.n if plus else g.n)
    if mode == "auto":
        mode = "exhaustive" if size <= EXHAUSTIVE_LIMIT else "local"
    if mode == "exhaustive":
        if size > EXHAUSTIVE_LIMIT:
            raise GraphError(f"exhaustive search over {size:.3g} maps exceeds the limit")
        val, f, h, count = _exhaustive(g, X, plus)
        rep = PoincareReport(val, f, h, "exhaustive", True, iterations=count)
    elif mode == "local":
        val, f, h, steps = _local(g, X, plus, restarts, seed, max_steps)
        rep = PoincareReport(val, f, h, "local", False, iterations=steps, seed=seed)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    again = rep.recompute(g, X)
    if not (np.isinf(again) and np.isinf(val)) and abs(again - val) > 1e-9 * max(1.0, abs(val)):
        raise AssertionError("witness does not reproduce the reported ratio")
    rep.gamma_estimate = again
    return rep


def gamma_cut_exact(g: Multigraph, chunk: int = 1 << 16) -> float:
    """Exact gamma for the two-point metric: maximum over all 2^n cuts."""
    n = g.n
    if n > 24:
        raise GraphError("cut enumeration is limited to n <= 24")
    if n == 1:
        return 0.0
    up = sp.triu(g.mult, k=1).tocoo()
    r, c, w = up.row, up.col, up.data.astype(np.float64)
    m_edges = g.num_edges
    best = 0.0
    total = 1 << (n - 1)  # vertex n-1 fixed outside S, complements are symmetric
    for start in range(1, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
        s = bits.sum(axis=1)
        full = 2.0 * s * (n - s) / n ** 2
        cut = (bits[:, r] != bits[:, c]).astype(np.float64) @ w
        edge = cut / m_edges
        if np.any(edge == 0):
            return np.inf
        best = max(best, float((full / edge).max()))
    return best


def cheeger_check(g: Multigraph, X: FiniteMetric, coords=None, restarts: int = 100,
                  seed: int = 0) -> dict:
    """Compare the evaluated gamma(G, X) with the cut constant and with 1/sqrt(1 - lambda_2).

    Any metric with two distinct points contains a scaled copy of the two-point
    metric, so an exact gamma(G, X) can never fall below the cut constant. When
    ``coords`` places X on the real line, the value cannot exceed gamma(G, d_R^2).
    """
    if X.n < 2:
        raise GraphError("cheeger check needs at least two points")
    lam2, _ = extreme_eigenvalues(g)
    rep = gamma_search(g, X, restarts=restarts, seed=seed)
    cut = gamma_cut_exact(g) if g.n <= 24 else None
    ok = True
    if rep.exact and cut is not None:
        ok = rep.gamma_estimate >= cut - 1e-9 * max(1.0, cut)
    line_ok = None
    if coords is not None:
        line_ok = rep.gamma_estimate <= 1.0 / (1.0 - lam2) + 1e-6
        ok = ok and line_ok
    scale = 1.0 / np.sqrt(1.0 - lam2)
    return {
        "ok": bool(ok),
        "gamma": rep.gamma_estimate,
        "exact": rep.exact,
        "gamma_cut": cut,
        "cheeger_scale": scale,
        "margin": (cut if cut is not None else rep.gamma_estimate) / scale,
        "line_ok": line_ok,
    }


def l1_extrapolation_check(g: Multigraph, configs: int = 5, points: int = 4, dim: int = 2,
                           restarts: int = 20, seed: int = 0) -> dict:
    """Best gamma ratio over random finite L1 configurations, scaled by (1 - lambda_2)^2."""
    rng = np.random.default_rng(seed)
    lam2, _ = extreme_eigenvalues(g)
    best = 0.0
    for i in range(configs):
        X = FiniteMetric.from_points(rng.normal(size=(points, dim)), p=1)
        rep = gamma_search(g, X, restarts=restarts, seed=seed + i)
        best = max(best, rep.gamma_estimate)
    return {"max_ratio": best, "lambda2": lam2, "quotient": best * (1.0 - lam2) ** 2}


def enumerate_maps(n: int, k: int):
    """All maps {0..n-1} -> {0..k-1} as tuples (small brute-force oracle)."""
    return itertools.product(range(k), repeat=n)

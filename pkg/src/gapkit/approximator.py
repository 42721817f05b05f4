"""Average squared distance from O(n) oracle queries.

A 3-regular template graph is cut into n contiguous buckets and its edges are
projected onto bucket pairs; the edge average of d^2 over the projected
multigraph stands in for the full pairwise average.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .multigraph import GraphError, Multigraph, bfs_metrics, is_connected


# template families


@dataclass
class TemplateFamily:
    """Increasing 3-regular graphs; ``M`` bounds consecutive size ratios and |V_1|."""

    name: str
    graphs: list[Multigraph]
    info: list[dict] = field(default_factory=list)

    def __post_init__(self):
        sizes = [g.n for g in self.graphs]
        if not sizes or sizes != sorted(sizes):
            raise GraphError("template sizes must increase")
        for g in self.graphs:
            if g.degree != 3:
                raise GraphError("templates must be 3-regular")
        ratios = [b / a for a, b in zip(sizes, sizes[1:])]
        self.M = max([float(sizes[0])] + ratios)

    @property
    def sizes(self) -> list[int]:
        return [g.n for g in self.graphs]

    def pick(self, n: int) -> int:
        """Index of the smallest template with at least n vertices."""
        for k, g in enumerate(self.graphs):
            if g.n >= n:
                if g.n > self.M * n:
                    raise GraphError(f"template {k} is more than M n for n = {n}")
                return k
        raise GraphError(f"no template with at least {n} vertices")

    @classmethod
    def zigzag(cls, base_n: int = 27, d: int = 3, depth: int = 2, seed: int = 0) -> "TemplateFamily":
        """The base graph followed by the 3-regular iterates G_1..G_depth."""
        from .combinators import IterationRecipe, select_base_graph, zigzag_iteration

        base, binfo = select_base_graph(base_n, d, seed=seed)
        res = zigzag_iteration(IterationRecipe(base, depth), keep_w=False)
        graphs = ([base] if d == 3 else []) + res.G
        info = ([{"kind": "base", **binfo}] if d == 3 else []) + [dict(r, kind="iterate") for r in res.records]
        return cls(f"zigzag-{base_n}-{d}-{depth}", graphs, info)

    @classmethod
    def random(cls, smallest: int = 16, largest: int = 1 << 17, seed: int = 0) -> "TemplateFamily":
        """Seeded random connected 3-regular graphs of sizes smallest * 2^k."""
        from .randgraph import pairing_rotation

        rng = np.random.default_rng(seed)
        graphs, info = [], []
        size = smallest + smallest % 2
        while size <= largest:
            while True:
                g = Multigraph.from_rotation(pairing_rotation(size, 3, rng))
                if g.is_simple and is_connected(g):
                    break
            graphs.append(g)
            info.append({"kind": "random", "n": size})
            size *= 2
        return cls(f"random-{smallest}-{seed}", graphs, info)

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for k, g in enumerate(self.graphs):
            g.save(directory / f"G{k:02d}.json")

    @classmethod
    def load(cls, directory) -> "TemplateFamily":
        directory = Path(directory)
        files = sorted(directory.glob("G*.json"))
        if not files:
            raise GraphError(f"no templates in {directory}")
        return cls(directory.name, [Multigraph.load(f) for f in files])


# the approximator


@dataclass
class UniversalApproximator:
    n: int
    pairs: np.ndarray  # distinct bucket pairs (i <= j)
    counts: np.ndarray  # multiplicity of each pair in E_n
    template: str
    template_size: int
    offsets: np.ndarray  # bucket i is [offsets[i], offsets[i+1])
    M: float

    @property
    def num_edges(self) -> int:
        return int(self.counts.sum())

    def bucket_of(self, v) -> np.ndarray:
        return np.searchsorted(self.offsets, v, side="right") - 1

    def edge_multiset(self) -> np.ndarray:
        return np.repeat(self.pairs, self.counts, axis=0)


def bucket_offsets(N: int, n: int) -> np.ndarray:
    """n contiguous ranges of sizes floor(N/n) or floor(N/n)+1, larger ones first."""
    q, r = divmod(N, n)
    sizes = np.full(n, q, dtype=np.int64)
    sizes[:r] += 1
    return np.r_[0, np.cumsum(sizes)]


def build_universal(family: TemplateFamily, n: int) -> UniversalApproximator:
    if n < 1:
        raise GraphError("n must be positive")
    k = family.pick(n)
    G = family.graphs[k]
    N = G.n
    offsets = bucket_offsets(N, n)
    q, r = divmod(N, n)
    E = G.edge_instances
    # bucket index without a search: the first r buckets have q+1 vertices
    big = r * (q + 1)
    b = np.where(E < big, E // (q + 1), r + (E - big) // max(q, 1))
    b.sort(axis=1)
    codes, counts = np.unique(b[:, 0] * n + b[:, 1], return_counts=True)
    pairs = np.stack([codes // n, codes % n], axis=1)
    u = UniversalApproximator(n, pairs, counts, f"{family.name}[{k}]", N, offsets, family.M)
    if u.num_edges != len(E):
        raise AssertionError("edge projection lost edges")
    if u.num_edges > 1.5 * family.M * n:
        raise AssertionError("|E_n| exceeds (3/2) M n")
    sizes = np.diff(offsets)
    if not np.isin(sizes, (q, q + 1)).all() or sizes.sum() != N:
        raise AssertionError("bucket sizes out of range")
    return u


# oracles and estimators


class DistanceOracle:
    """Distances between n chosen points of a metric given by a matrix, with a call counter."""

    def __init__(self, D: np.ndarray, points=None):
        D = np.asarray(D, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(D, D.T) or np.any(np.diag(D) != 0):
            raise ValueError("distance matrix must be symmetric with zero diagonal")
        self.D = D
        self.points = np.arange(D.shape[0]) if points is None else np.asarray(points, dtype=np.int64)
        self.calls = 0

    @property
    def n(self) -> int:
        return len(self.points)

    def query(self, i: int, j: int) -> float:
        self.calls += 1
        return float(self.D[self.points[i], self.points[j]])

    def query_many(self, i, j) -> np.ndarray:
        i, j = np.asarray(i), np.asarray(j)
        self.calls += int(i.size)
        return self.D[self.points[i], self.points[j]]


@dataclass
class Estimate:
    value: float
    queries: int
    scale: float = 1.0


def estimate_avg_sq(u: UniversalApproximator, oracle: DistanceOracle, scale: float = 1.0) -> Estimate:
    """(s / |E_n|) sum over E_n of d^2, one oracle call per edge of E_n."""
    if oracle.n < u.n:
        raise ValueError("oracle has fewer points than the approximator")
    E = u.edge_multiset()
    before = oracle.calls
    d = oracle.query_many(E[:, 0], E[:, 1])
    return Estimate(scale * float((d ** 2).sum()) / len(E), oracle.calls - before, scale)


def exact_avg_sq(oracle: DistanceOracle, n: int | None = None) -> float:
    """(1/n^2) sum over ordered pairs of d^2, with n^2 queries."""
    n = oracle.n if n is None else n
    i, j = np.divmod(np.arange(n * n), n)
    d = oracle.query_many(i, j)
    return float((d ** 2).sum()) / n ** 2


def sampling_baseline(oracle: DistanceOracle, n: int, pairs: int, seed=None) -> Estimate:
    """Mean of d^2 over uniform random ordered pairs (with replacement)."""
    if pairs < 1:
        raise ValueError("pairs must be positive")
    rng = np.random.default_rng(seed)
    i, j = rng.integers(n, size=pairs), rng.integers(n, size=pairs)
    before = oracle.calls
    d = oracle.query_many(i, j)
    return Estimate(float((d ** 2).mean()), oracle.calls - before)


def projection_identity(family: TemplateFamily, u: UniversalApproximator, D: np.ndarray, points) -> tuple[int, int]:
    """(sum over E_n of d^2, sum over E_G of d^2 for the bucket-constant lift), both as integers."""
    G = family.graphs[int(u.template.rsplit("[", 1)[1][:-1])]
    pts = np.asarray(points, dtype=np.int64)
    D = np.rint(np.asarray(D)).astype(np.int64)
    E = u.edge_multiset()
    lhs = int((D[pts[E[:, 0]], pts[E[:, 1]]] ** 2).sum())
    lift = pts[u.bucket_of(np.arange(G.n))]
    EG = G.edge_instances
    rhs = int((D[lift[EG[:, 0]], lift[EG[:, 1]]] ** 2).sum())
    return lhs, rhs


def trivial_upper_bound(u: UniversalApproximator) -> float:
    """Provable bound on estimate/exact: 4 (n ceil(N/n) / N)^2, which is 4 for equal buckets."""
    big = int(np.diff(u.offsets).max())
    return 4.0 * (u.n * big / u.template_size) ** 2


# experiment harness


def clustered_tuple(D: np.ndarray, n: int, rng: np.random.Generator, clusters: int = 4) -> np.ndarray:
    """n points drawn from BFS balls of radius diam/4 around a few random centres."""
    m = D.shape[0]
    radius = max(1.0, float(D.max()) // 4)
    centres = rng.choice(m, size=clusters, replace=False)
    balls = [np.flatnonzero(D[c] <= radius) for c in centres]
    pick = rng.integers(clusters, size=n)
    return np.array([rng.choice(balls[k]) for k in pick], dtype=np.int64)


COLUMNS = ["trial", "m", "n", "exact", "estimate", "ratio", "queries", "tuple_mode"]


def ratio_experiment(m: int, d: int, n: int, trials: int, seed: int, family: TemplateFamily,
                     modes=("uniform", "clustered"), out=None) -> list[dict]:
    """Per trial: a uniform simple d-regular H on m vertices, tuples of n points, exact and estimated A."""
    from .randgraph import uniform_simple_sample

    if m < n:
        raise ValueError("need m >= n")
    u = build_universal(family, n)
    ss = np.random.SeedSequence([seed, m, d, n])
    rows = []
    for trial, child in enumerate(ss.spawn(trials)):
        rng = np.random.default_rng(child)
        while True:
            H, _ = uniform_simple_sample(m, d, seed=rng)
            D, _, connected = bfs_metrics(H)
            if connected:
                break
        for mode in modes:
            pts = rng.integers(m, size=n) if mode == "uniform" else clustered_tuple(D, n, rng)
            oracle = DistanceOracle(D, pts)
            exact = exact_avg_sq(oracle)
            est = estimate_avg_sq(u, oracle)
            rows.append({"trial": trial, "m": m, "n": n, "exact": exact, "estimate": est.value,
                         "ratio": exact / est.value if est.value > 0 else math.inf,
                         "queries": est.queries, "tuple_mode": mode})
    if out is not None:
        write_rows(rows, out)
    return rows


def write_rows(rows: list[dict], out) -> None:
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        w.writerows(rows)


def spread(ratios) -> float:
    """D_emp: max ratio over min ratio."""
    r = np.asarray(ratios, dtype=np.float64)
    return float(r.max() / r.min())


def spread_slope(groups: dict, boots: int = 1000, seed: int = 0) -> dict:
    """Slope of D_emp against m, with a bootstrap 95% interval over trials."""
    rng = np.random.default_rng(seed)
    ms = sorted(groups)
    x = np.asarray(ms, dtype=np.float64)
    y = np.array([spread(groups[m]) for m in ms])
    slope = float(np.polyfit(x, y, 1)[0])
    samples = []
    for _ in range(boots):
        yb = [spread(rng.choice(groups[m], size=len(groups[m]), replace=True)) for m in ms]
        samples.append(np.polyfit(x, yb, 1)[0])
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return {"m": ms, "spread": y.tolist(), "slope": slope, "ci": (float(lo), float(hi)),
            "zero_in_ci": bool(lo <= 0 <= hi)}

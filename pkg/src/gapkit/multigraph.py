"""Regular multigraphs, rotation maps, girth, short cycles and the complex Sigma(G).

A self-loop contributes 1 to the degree of its vertex. The multiplicity matrix
``mult`` is symmetric, its diagonal counts self-loops, and the degree of ``u`` is
the row sum ``mult[u].sum()``. A rotation map is an involution on
(vertex, port) pairs. A fixed point encodes a single self-loop.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

GRID_BITS = 20
GRID = 1 << GRID_BITS  # offsets on edges live on the 2**-20 grid
MAX_CYCLE_LENGTH = 24


class GraphError(ValueError):
    """Raised when a graph violates an invariant or a precondition."""


class Multigraph:
    """Undirected multigraph with self-loops and an optional rotation map.

    ``rot`` has shape ``(n, d, 2)`` and ``rot[v, i] = (w, j)`` means that port
    ``i`` of ``v`` is joined to port ``j`` of ``w``. Ports are 0-indexed.
    """

    def __init__(self, n: int, mult, rot: np.ndarray | None = None):
        if n <= 0:
            raise GraphError("vertex count must be positive")
        self.n = int(n)
        m = sp.csr_matrix(mult, dtype=np.int64)
        if m.shape != (self.n, self.n):
            raise GraphError(f"multiplicity matrix has shape {m.shape}, expected {(n, n)}")
        m.eliminate_zeros()
        m.sort_indices()
        self.mult = m
        self.rot = None if rot is None else np.asarray(rot, dtype=np.int64)

    # construction

    @classmethod
    def from_edges(cls, n: int, edges, rot=None) -> "Multigraph":
        """Build from ``(u, v)`` or ``(u, v, k)`` items. ``(u, u, k)`` is k loops."""
        rows, cols, vals = [], [], []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            k = int(e[2]) if len(e) > 2 else 1
            if k < 0:
                raise GraphError("negative multiplicity")
            if u == v:
                rows.append(u)
                cols.append(u)
                vals.append(k)
            else:
                rows += [u, v]
                cols += [v, u]
                vals += [k, k]
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.int64).tocsr()
        return cls(n, m, rot)

    @classmethod
    def from_dense(cls, mat, rot=None) -> "Multigraph":
        mat = np.asarray(mat)
        return cls(mat.shape[0], sp.csr_matrix(mat.astype(np.int64)), rot)

    @classmethod
    def from_rotation(cls, rot) -> "Multigraph":
        rot = np.asarray(rot, dtype=np.int64)
        return cls(rot.shape[0], mult_from_rotation(rot), rot)

    # basic queries

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.mult.sum(axis=1)).ravel()

    @cached_property
    def degree(self) -> int | None:
        """Common degree when the graph is regular, else ``None``."""
        deg = self.degrees
        return int(deg[0]) if np.all(deg == deg[0]) else None

    @property
    def num_edges(self) -> float:
        """Edge mass ``n d / 2`` in the convention where a loop is half an edge."""
        return float(self.degrees.sum()) / 2.0

    def dense(self) -> np.ndarray:
        return self.mult.toarray()

    @cached_property
    def loops(self) -> np.ndarray:
        return self.mult.diagonal().astype(np.int64)

    @cached_property
    def is_simple(self) -> bool:
        return not self.loops.any() and (self.mult.data <= 1).all()

    @cached_property
    def neighbors(self) -> list[list[int]]:
        """Distinct neighbours of each vertex, loops excluded, sorted."""
        ip, ix = self.mult.indptr, self.mult.indices
        return [[int(w) for w in ix[ip[v]:ip[v + 1]] if w != v] for v in range(self.n)]

    def edge_list(self) -> list[tuple[int, int, int]]:
        """``(u, v, k)`` with ``u <= v``; loops appear as ``(u, u, k)``."""
        up = sp.triu(self.mult).tocoo()
        order = np.lexsort((up.col, up.row))
        return [(int(up.row[i]), int(up.col[i]), int(up.data[i])) for i in order]

    @cached_property
    def edge_instances(self) -> np.ndarray:
        """One row ``(u, v)`` per edge instance, parallel edges repeated."""
        up = sp.triu(self.mult).tocoo()
        order = np.lexsort((up.col, up.row))
        k = up.data[order].astype(np.int64)
        rows = np.repeat(np.stack([up.row[order], up.col[order]], axis=1), k, axis=0)
        return rows.astype(np.int64).reshape(-1, 2)

    def adjacency(self) -> sp.csr_matrix:
        """Support of the multiplicity matrix without loops, as a 0/1 matrix."""
        a = self.mult.copy()
        a.setdiag(0)
        a.eliminate_zeros()
        a.data[:] = 1
        return a

    def normalized_adjacency(self):
        d = self.degree
        if d is None:
            raise GraphError("normalized adjacency needs a regular graph")
        return self.mult.astype(np.float64) / d

    def with_rotation(self) -> "Multigraph":
        """Same graph carrying a canonical rotation map when it has none."""
        if self.rot is not None:
            return self
        return Multigraph(self.n, self.mult, rotation_from_mult(self))

    def induced(self, vertices) -> tuple["Multigraph", np.ndarray]:
        """Induced subgraph on ``vertices`` and the index map back to ``self``."""
        idx = np.array(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        sub = self.mult[idx][:, idx]
        return Multigraph(len(idx), sub), idx

    def remove_edges(self, edges) -> "Multigraph":
        """Delete one instance of each listed ``(u, v)`` edge."""
        m = self.mult.tolil()
        for u, v in edges:
            if m[u, v] <= 0:
                raise GraphError(f"edge ({u}, {v}) not present")
            m[u, v] -= 1
            if u != v:
                m[v, u] -= 1
        return Multigraph(self.n, m.tocsr())

    def __repr__(self) -> str:
        d = self.degree
        reg = f", {d}-regular" if d is not None else ""
        return f"Multigraph(n={self.n}{reg}, edges={self.num_edges:g})"

    # serialisation

    def to_json(self) -> dict:
        out = {"n": self.n, "edges": [list(e) for e in self.edge_list()]}
        if self.rot is not None:
            n, d, _ = self.rot.shape
            out["rotation"] = [
                [v, i, int(self.rot[v, i, 0]), int(self.rot[v, i, 1])]
                for v in range(n) for i in range(d)
            ]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Multigraph":
        rot = None
        if data.get("rotation"):
            r = np.array(data["rotation"], dtype=np.int64)
            d = int(r[:, 1].max()) + 1
            rot = np.zeros((data["n"], d, 2), dtype=np.int64)
            rot[r[:, 0], r[:, 1]] = r[:, 2:4]
        return cls.from_edges(data["n"], data["edges"], rot)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Multigraph":
        return cls.from_json(json.loads(Path(path).read_text()))


# rotation maps


def mult_from_rotation(rot: np.ndarray) -> sp.csr_matrix:
    n, d, _ = rot.shape
    src = np.repeat(np.arange(n), d)
    dst = rot[:, :, 0].ravel()
    return sp.coo_matrix((np.ones(n * d, dtype=np.int64), (src, dst)), shape=(n, n)).tocsr()


def rotation_from_mult(g: Multigraph) -> np.ndarray:
    """Canonical rotation map: edges in lexicographic order, loops as fixed points."""
    d = g.degree
    if d is None:
        raise GraphError("rotation map needs a regular graph")
    coo = g.mult.tocoo()
    k = coo.data
    row = np.repeat(coo.row, k)
    col = np.repeat(coo.col, k)
    starts = np.repeat(np.cumsum(k) - k, k)
    copy = np.arange(len(row)) - starts
    by_row = np.lexsort((copy, col, row))
    by_col = np.lexsort((copy, row, col))
    # symmetric mult makes the two sorted orders transposes of each other
    partner = np.empty(len(row), dtype=np.int64)
    partner[by_row] = by_col
    port = np.empty(len(row), dtype=np.int64)
    port[by_row] = np.arange(len(row)) - np.repeat(np.arange(g.n) * d, d)
    rot = np.empty((g.n, d, 2), dtype=np.int64)
    rot[row, port, 0] = row[partner]
    rot[row, port, 1] = port[partner]
    return rot


def rotation_is_involution(rot: np.ndarray) -> bool:
    n, d, _ = rot.shape
    w, j = rot[:, :, 0], rot[:, :, 1]
    if (w < 0).any() or (w >= n).any() or (j < 0).any() or (j >= d).any():
        return False
    back = rot[w, j]
    return bool(np.array_equal(back[:, :, 0], np.repeat(np.arange(n)[:, None], d, 1))
                and np.array_equal(back[:, :, 1], np.repeat(np.arange(d)[None, :], n, 0)))


def validate(g: Multigraph, d: int | None = None) -> dict:
    """Check every invariant and raise ``GraphError`` naming the first failure."""
    diff = g.mult - g.mult.T
    if diff.count_nonzero():
        raise GraphError("asymmetric multiplicity matrix")
    if (g.mult.data < 0).any():
        raise GraphError("negative multiplicity")
    deg = g.degrees
    if d is not None and not np.all(deg == d):
        bad = int(np.flatnonzero(deg != d)[0])
        raise GraphError(f"degree mismatch: vertex {bad} has degree {deg[bad]}, expected {d}")
    if g.rot is not None:
        n, pd, _ = g.rot.shape
        if n != g.n or not np.all(deg == pd):
            raise GraphError("rotation map degree does not match multiplicities")
        if not rotation_is_involution(g.rot):
            raise GraphError("rotation map is not an involution")
        if (mult_from_rotation(g.rot) != g.mult).count_nonzero():
            raise GraphError("rotation map inconsistent with multiplicities")
    return {"ok": True, "n": g.n, "regular": g.degree}


# standard small graphs


def cycle_graph(k: int, loops: bool = False) -> Multigraph:
    """The cycle C_k, or C_k with one self-loop per vertex (3-regular)."""
    if k < 3:
        raise GraphError("cycle length must be at least 3")
    v = np.arange(k)
    d = 3 if loops else 2
    rot = np.empty((k, d, 2), dtype=np.int64)
    rot[:, 0, 0], rot[:, 0, 1] = (v + 1) % k, 1
    rot[:, 1, 0], rot[:, 1, 1] = (v - 1) % k, 0
    if loops:
        rot[:, 2, 0], rot[:, 2, 1] = v, 2
    return Multigraph.from_rotation(rot)


def complete_graph(k: int) -> Multigraph:
    return Multigraph.from_dense(np.ones((k, k), dtype=np.int64) - np.eye(k, dtype=np.int64))


def path_graph(k: int) -> Multigraph:
    return Multigraph.from_edges(k, [(i, i + 1) for i in range(k - 1)])


def loop_graph(n: int, d: int = 1) -> Multigraph:
    """Every vertex carries ``d`` self-loops."""
    rot = np.empty((n, d, 2), dtype=np.int64)
    rot[:, :, 0] = np.arange(n)[:, None]
    rot[:, :, 1] = np.arange(d)[None, :]
    return Multigraph.from_rotation(rot)


# distances


def bfs_metrics(g: Multigraph) -> tuple[np.ndarray, float, bool]:
    """All-pairs hop distances (``inf`` across components), diameter, connectivity."""
    D = csgraph.shortest_path(g.adjacency(), method="D", unweighted=True, directed=False)
    finite = D[np.isfinite(D)]
    diam = float(finite.max()) if finite.size else 0.0
    return D, diam, bool(np.isfinite(D).all())


def bfs_from(g: Multigraph, source: int, limit: int | None = None) -> np.ndarray:
    """Hop distances from ``source``; ``-1`` for unreached or beyond ``limit``."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    nb = g.neighbors
    q = deque([source])
    while q:
        u = q.popleft()
        if limit is not None and dist[u] >= limit:
            continue
        for w in nb[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def is_connected(g: Multigraph) -> bool:
    ncomp, _ = csgraph.connected_components(g.adjacency(), directed=False)
    return ncomp == 1


def girth(g: Multigraph) -> int:
    """Shortest cycle length: 1 for a loop, 2 for a parallel edge.

    An acyclic graph returns ``2 * diam`` (largest finite distance).
    """
    if g.loops.any():
        return 1
    off = g.mult.copy()
    off.setdiag(0)
    if (off.data > 1).any():
        return 2
    nb = g.neighbors
    best = np.iinfo(np.int64).max
    dist = np.full(g.n, -1, dtype=np.int64)
    parent = np.full(g.n, -1, dtype=np.int64)
    for r in range(g.n):
        # a cycle through r of length < best needs depth below (best - 1) / 2
        seen = [r]
        dist[r] = 0
        parent[r] = -1
        q = deque([r])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in nb[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    seen.append(w)
                    q.append(w)
                elif w != parent[u]:
                    best = min(best, int(dist[u] + dist[w] + 1))
        dist[seen] = -1
        if best == 3:
            break
    if best == np.iinfo(np.int64).max:
        return int(2 * bfs_metrics(g)[1])
    return best


@dataclass(frozen=True)
class Cycle:
    """A cycle as a canonical vertex sequence; ``induced`` iff |E(C)| = |C|."""

    vertices: tuple[int, ...]
    induced: bool

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[int, int]]:
        vs = self.vertices
        if len(vs) == 1:
            return [(vs[0], vs[0])]
        if len(vs) == 2:
            return [(min(vs), max(vs))] * 2
        return [tuple(sorted((vs[i], vs[(i + 1) % len(vs)]))) for i in range(len(vs))]


def induced_edge_count(g: Multigraph, vertices) -> int:
    idx = np.array(sorted(set(vertices)), dtype=np.int64)
    sub = g.mult[idx][:, idx]
    return int((sub.sum() + sub.diagonal().sum()) // 2)


def short_cycles(g: Multigraph, t: int) -> list[Cycle]:
    """All cycles with fewer than ``t`` vertices, deduplicated up to rotation/reflection."""
    if t < 1:
        raise GraphError("threshold must be at least 1")
    if t - 1 > MAX_CYCLE_LENGTH:
        raise GraphError(f"cycle enumeration capped at length {MAX_CYCLE_LENGTH}")
    found: list[tuple[int, ...]] = []
    if t > 1:
        found += [(int(v),) for v in np.flatnonzero(g.loops)]
    if t > 2:
        up = sp.triu(g.mult, k=1).tocoo()
        found += sorted((int(u), int(v)) for u, v, k in zip(up.row, up.col, up.data) if k >= 2)
    maxlen = t - 1
    if maxlen >= 3:
        nb = g.neighbors
        for s in range(g.n):
            # simple paths s -> ... through vertices > s, closed back to s
            path = [s]
            on_path = {s}
            stack = [iter([w for w in nb[s] if w > s])]
            while stack:
                nxt = next(stack[-1], None)
                if nxt is None:
                    stack.pop()
                    on_path.discard(path.pop())
                    continue
                path.append(nxt)
                on_path.add(nxt)
                if len(path) >= 3 and s in nb[nxt] and path[1] < nxt:
                    found.append(tuple(path))
                if len(path) < maxlen:
                    stack.append(iter([w for w in nb[nxt] if w > s and w not in on_path]))
                else:
                    on_path.discard(path.pop())
    return [Cycle(c, induced_edge_count(g, c) == len(c)) for c in found]


# the one-dimensional complex


@dataclass(frozen=True)
class SimplicialPoint:
    """A vertex, or a point on edge instance ``edge`` at ``offset / 2**20`` from its first end."""

    vertex: int | None = None
    edge: int | None = None
    offset: int = 0

    @classmethod
    def at_vertex(cls, v: int) -> "SimplicialPoint":
        return cls(vertex=int(v))

    @classmethod
    def on_edge(cls, edge: int, t, reverse: bool = False) -> "SimplicialPoint":
        """Point at fraction ``t`` in (0, 1), measured from the second end if ``reverse``."""
        t = Fraction(t) if not isinstance(t, float) else t
        if not 0 < t < 1:
            raise GraphError("edge offsets must lie strictly inside (0, 1)")
        k = int(round(float(t) * GRID)) if isinstance(t, float) else int(round(t * GRID))
        k = min(max(k, 1), GRID - 1)
        if reverse:
            k = GRID - k
        return cls(edge=int(edge), offset=k)

    @property
    def t(self) -> Fraction:
        return Fraction(self.offset, GRID)

    def ends(self, g: Multigraph) -> list[tuple[int, float]]:
        """Endpoints of the carrying cell with the distance to each."""
        if self.vertex is not None:
            return [(self.vertex, 0.0)]
        u, v = g.edge_instances[self.edge]
        s = self.offset / GRID
        return [(int(u), s), (int(v), 1.0 - s)]


def simplicial_distance(g: Multigraph, p: SimplicialPoint, q: SimplicialPoint,
                        D: np.ndarray | None = None) -> float:
    """Geodesic distance in Sigma(G), each edge instance a unit interval."""
    if D is None:
        D, _, connected = bfs_metrics(g)
        if not connected:
            raise GraphError("simplicial distance needs a connected graph")
    best = min(a + D[x, y] + b for x, a in p.ends(g) for y, b in q.ends(g))
    if p.edge is not None and p.edge == q.edge:
        best = min(best, abs(p.offset - q.offset) / GRID)
    return float(best)


def simplicial_distance_matrix(g: Multigraph, points, D: np.ndarray | None = None) -> np.ndarray:
    """Pairwise Sigma(G) distances for a list of points, vectorised over pairs."""
    if D is None:
        D, _, connected = bfs_metrics(g)
        if not connected:
            raise GraphError("simplicial distance needs a connected graph")
    m = len(points)
    ends = np.zeros((m, 2), dtype=np.int64)
    offs = np.zeros((m, 2))
    for i, p in enumerate(points):
        e = p.ends(g)
        if len(e) == 1:
            e = e + e
        ends[i] = [e[0][0], e[1][0]]
        offs[i] = [e[0][1], e[1][1]]
    out = np.full((m, m), np.inf)
    for a in range(2):
        for b in range(2):
            cand = offs[:, a][:, None] + D[np.ix_(ends[:, a], ends[:, b])] + offs[:, b][None, :]
            np.minimum(out, cand, out=out)
    edge_id = np.array([-1 if p.edge is None else p.edge for p in points])
    off = np.array([p.offset for p in points]) / GRID
    same = (edge_id[:, None] == edge_id[None, :]) & (edge_id[:, None] >= 0)
    np.minimum(out, np.where(same, np.abs(off[:, None] - off[None, :]), np.inf), out=out)
    np.fill_diagonal(out, 0.0)
    return out


def random_simplicial_points(g: Multigraph, count: int, rng: np.random.Generator,
                             vertex_fraction: float = 0.3) -> list[SimplicialPoint]:
    """Mix of random vertices and random quantized edge points."""
    pts = []
    m = len(g.edge_instances)
    for _ in range(count):
        if m == 0 or rng.random() < vertex_fraction:
            pts.append(SimplicialPoint.at_vertex(int(rng.integers(g.n))))
        else:
            k = int(rng.integers(1, GRID))
            pts.append(SimplicialPoint(edge=int(rng.integers(m)), offset=k))
    return pts


def edge_sum(g: Multigraph, K) -> float:
    """Half of sum over ordered pairs of E(u, v) K(u, v); each edge counted once."""
    K = np.asarray(K, dtype=np.float64)
    if np.any(np.diag(K) != 0):
        raise GraphError("kernel must vanish on the diagonal")
    coo = g.mult.tocoo()
    return float(0.5 * np.sum(coo.data * K[coo.row, coo.col]))

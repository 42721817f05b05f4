"""Euclidean cones over finite metric spaces and the inequalities they satisfy.

A cone point is ``(s, x)`` with radius ``s >= 0`` and base index ``x``; every
point with ``s == 0`` is the cusp.  Angles are base distances capped at pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import FiniteMetric, MetricError
from .multigraph import Multigraph

CUSP = -1

# ratio brackets certified by the sampled checks
COMPARISON_LOW = 1.0 / 3.0
COMPARISON_HIGH = float(np.sqrt(2.0))
RETRACTION_LIP = float(np.sqrt(3.0) * np.pi)


@dataclass(frozen=True)
class ConePoint:
    s: float
    base: int = CUSP

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("cone radius must be nonnegative")
        if self.s == 0 and self.base != CUSP:
            object.__setattr__(self, "base", CUSP)

    @property
    def is_cusp(self) -> bool:
        return self.s == 0


def cone_formula(dX, s, t):
    """sqrt((s-t)^2 + 2st(1 - cos min(pi, dX))), broadcasting over arrays."""
    dX, s, t = np.asarray(dX, float), np.asarray(s, float), np.asarray(t, float)
    theta = np.minimum(np.pi, dX)
    # 1 - cos(theta) = 2 sin^2(theta/2) avoids cancellation for small angles
    return np.sqrt((s - t) ** 2 + 4.0 * s * t * np.sin(theta / 2.0) ** 2)


def cone_distance(X: FiniteMetric, p: ConePoint, q: ConePoint) -> float:
    if p.is_cusp or q.is_cusp:
        return abs(p.s - q.s)
    return float(cone_formula(X.d[p.base, q.base], p.s, q.s))


def cone_distance_matrix(X: FiniteMetric, s, base) -> np.ndarray:
    """Pairwise cone distances for points (s[i], base[i]); base is ignored where s is 0."""
    s = np.asarray(s, float)
    base = np.asarray(base, dtype=np.int64)
    if (s < 0).any():
        raise ValueError("cone radius must be nonnegative")
    b = np.where(s > 0, base, 0)
    return cone_formula(X.d[np.ix_(b, b)], s[:, None], s[None, :])


def cone_pair_distances(X: FiniteMetric, s, x, t, y) -> np.ndarray:
    """Distances between matched pairs (s[k], x[k]) and (t[k], y[k])."""
    s, t = np.asarray(s, float), np.asarray(t, float)
    x, y = np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)
    return cone_formula(X.d[x, y], s, t)


def cone_metric(X: FiniteMetric, radii) -> tuple[FiniteMetric, list[ConePoint]]:
    """Cone metric on {cusp} plus every (r, x) with r in ``radii`` (positive) and x in X."""
    radii = [float(r) for r in radii if r > 0]
    if not radii or X.n == 0:
        raise MetricError("cone support needs a positive radius and a base point")
    points = [ConePoint(0.0)] + [ConePoint(r, x) for r in radii for x in range(X.n)]
    s = np.array([p.s for p in points])
    b = np.array([max(p.base, 0) for p in points])
    m = FiniteMetric(cone_distance_matrix(X, s, b))
    m.check(1e-12)
    return m, points


def geometric_radii(r0: float = 1.0, k: int = 4, base: float = 2.0) -> np.ndarray:
    """Radii r0 * base^j for j in [-k, k]."""
    return r0 * base ** np.arange(-k, k + 1, dtype=float)


# sampled pairs


@dataclass
class PairSample:
    s: np.ndarray
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    stratum: np.ndarray


STRATA = ("uniform", "near_cusp", "antipodal", "equal_radius")


def sample_pairs(X: FiniteMetric, count: int, rng: np.random.Generator,
                 radii=None) -> PairSample:
    """Mixed strata: uniform radii, one radius near zero, base pairs at maximal
    distance, and equal radii.  Radii are drawn from ``radii`` when given."""
    n = X.n
    k = len(STRATA)
    stratum = np.arange(count) % k
    if radii is None:
        s = np.exp(rng.uniform(-4, 3, count))
        t = np.exp(rng.uniform(-4, 3, count))
    else:
        radii = np.asarray(radii, float)
        s = rng.choice(radii, count)
        t = rng.choice(radii, count)
    x = rng.integers(n, size=count)
    y = rng.integers(n, size=count)
    near = stratum == 1
    t[near] = s[near] * 10.0 ** rng.uniform(-8, -3, near.sum())
    anti = stratum == 2
    far = np.argmax(X.d, axis=1)
    y[anti] = far[x[anti]]
    eq = stratum == 3
    t[eq] = s[eq]
    return PairSample(s, x, t, y, stratum)


def sample_triples(count: int, npts: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(npts, size=(count, 3))


# inequalities


def cosine_sandwich(theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(2 theta^2/pi^2, 1 - cos theta, theta^2/2) on [0, pi]."""
    theta = np.asarray(theta, float)
    return 2 * theta ** 2 / np.pi ** 2, 2 * np.sin(theta / 2) ** 2, theta ** 2 / 2


def comparison_ratio(dX, s, t) -> np.ndarray:
    """d_cone / max{|s-t|, max(s,t) sqrt(2(1-cos theta))}; lies in [1/3, sqrt 2]."""
    theta = np.minimum(np.pi, np.asarray(dX, float))
    s, t = np.asarray(s, float), np.asarray(t, float)
    denom = np.maximum(np.abs(s - t), np.maximum(s, t) * 2 * np.sin(theta / 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        return cone_formula(dX, s, t) / denom


def sinus_lower(dX, s, t) -> np.ndarray:
    """max(s,t) sin(min(pi/2, dX)), a lower bound for the cone distance."""
    return np.maximum(s, t) * np.sin(np.minimum(np.pi / 2, np.asarray(dX, float)))


def rescaling_constant(X: FiniteMetric, f) -> float:
    """sqrt(diam^2 Lip(f)^2 + 2 ||f||_inf^2) for a positive function f on X."""
    f = np.asarray(f, float)
    if (f <= 0).any():
        raise ValueError("rescaling function must be positive")
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.abs(f[:, None] - f[None, :]) / X.d
    np.fill_diagonal(q, 0.0)
    lip = float(np.nanmax(q)) if X.n > 1 else 0.0
    return float(np.sqrt(X.diameter() ** 2 * lip ** 2 + 2 * f.max() ** 2))


def rescaled_lipschitz(X: FiniteMetric, f, pairs: PairSample) -> float:
    """Measured Lipschitz constant of (s, x) -> (f(x) s, x) on sampled pairs."""
    f = np.asarray(f, float)
    before = cone_pair_distances(X, pairs.s, pairs.x, pairs.t, pairs.y)
    after = cone_pair_distances(X, f[pairs.x] * pairs.s, pairs.x, f[pairs.y] * pairs.t, pairs.y)
    ok = before > 0
    return float((after[ok] / before[ok]).max()) if ok.any() else 0.0


def lifted_ratios(X: FiniteMetric, Y: FiniteMetric, f, pairs: PairSample) -> np.ndarray:
    """d_Cone(Y)((s,f x),(t,f y)) / d_Cone(X)((s,x),(t,y)) on sampled pairs."""
    f = np.asarray(f, dtype=np.int64)
    a = cone_pair_distances(X, pairs.s, pairs.x, pairs.t, pairs.y)
    b = cone_pair_distances(Y, pairs.s, f[pairs.x], pairs.t, f[pairs.y])
    ok = a > 0
    return b[ok] / a[ok]


def map_distortion(X: FiniteMetric, Y: FiniteMetric, f) -> tuple[float, float]:
    """(min, max) of d_Y(f x, f y) / d_X(x, y) over distinct pairs."""
    f = np.asarray(f, dtype=np.int64)
    iu = np.triu_indices(X.n, 1)
    a = X.d[iu]
    b = Y.d[f[iu[0]], f[iu[1]]]
    ok = a > 0
    r = b[ok] / a[ok]
    return float(r.min()), float(r.max())


# unions of graph complexes


@dataclass
class FamilyComponent:
    metric: FiniteMetric  # distances in the complex, unscaled
    girth: int
    diam: float  # graph diameter


@dataclass
class GraphFamilyMetric:
    metric: FiniteMetric
    labels: np.ndarray  # component index of every point
    R: float
    cross: float
    scales: list[float]


def family_union(components: list[FamilyComponent], R: float | None = None) -> GraphFamilyMetric:
    """Disjoint union with distances 2 pi d / girth inside a component and 2 pi (R+1) across."""
    ratios = [c.diam / c.girth for c in components]
    if R is None:
        R = max(ratios)
    for i, r in enumerate(ratios):
        if r > R + 1e-12:
            raise MetricError(f"component {i} has diam/girth {r} above R = {R}")
    cross = 2 * np.pi * (R + 1)
    sizes = [c.metric.n for c in components]
    total = sum(sizes)
    d = np.full((total, total), cross)
    labels = np.repeat(np.arange(len(components)), sizes)
    scales = []
    off = 0
    for c, k in zip(components, sizes):
        scale = 2 * np.pi / c.girth
        block = scale * c.metric.d
        if block.max(initial=0.0) > cross + 1e-9:
            raise MetricError("rescaled component exceeds the cross distance")
        d[off:off + k, off:off + k] = block
        scales.append(scale)
        off += k
    m = FiniteMetric(d)
    m.check(1e-12)
    return GraphFamilyMetric(m, labels, float(R), float(cross), scales)


def slice_distortion(component: FamilyComponent, R: float) -> dict:
    """Distortion of x -> (1/sqrt 2, x) from the complex into the cone over the union."""
    scale = 2 * np.pi / component.girth
    d = component.metric.d
    iu = np.triu_indices(component.metric.n, 1)
    a = d[iu]
    ok = a > 0
    b = cone_formula(scale * a, 1 / np.sqrt(2), 1 / np.sqrt(2))
    r = b[ok] / a[ok]
    dist = float(r.max() / r.min()) if ok.any() else 1.0
    bound = np.pi * (R + 1) / 2
    return {"distortion": dist, "bound": float(bound), "ok": bool(dist <= bound * (1 + 1e-12))}


def sigma_component(g: Multigraph, points, girth_value: int | None = None) -> FamilyComponent:
    from .multigraph import bfs_metrics, girth, simplicial_distance_matrix

    D, diam, connected = bfs_metrics(g)
    if not connected:
        raise MetricError("component graph must be connected")
    m = FiniteMetric(simplicial_distance_matrix(g, points, D))
    return FamilyComponent(m, girth_value or girth(g), float(diam))


# retractions and unions of cones


def cusp_retraction(member) -> callable:
    """(s, x) -> (s, x) if x is in the set, else the cusp; acts on (s, base) arrays."""
    member = np.asarray(member, bool)

    def apply(s, base):
        s = np.asarray(s, float)
        base = np.asarray(base, dtype=np.int64)
        keep = member[base] & (s > 0)
        return np.where(keep, s, 0.0), np.where(keep, base, 0)

    return apply


def retraction_sum(X: FiniteMetric, parts, pairs: PairSample) -> tuple[np.ndarray, np.ndarray]:
    """(d_cone, sum over parts of d_cone between retracted points) on sampled pairs."""
    full = cone_pair_distances(X, pairs.s, pairs.x, pairs.t, pairs.y)
    total = np.zeros_like(full)
    for part in parts:
        r = cusp_retraction(part)
        s1, x1 = r(pairs.s, pairs.x)
        t1, y1 = r(pairs.t, pairs.y)
        total += cone_pair_distances(X, s1, x1, t1, y1)
    return full, total


def set_distance(X: FiniteMetric, A, B) -> float:
    A, B = np.asarray(A, bool), np.asarray(B, bool)
    if not A.any() or not B.any():
        return np.inf
    return float(X.d[np.ix_(A, B)].min())


def distance_to_set(X: FiniteMetric, S) -> np.ndarray:
    """d_X(x, S) with the metric capped at pi; infinite when S is empty."""
    S = np.asarray(S, bool)
    if not S.any():
        return np.full(X.n, np.inf)
    return np.minimum(np.pi, X.d[:, S]).min(axis=1)


def union_constant(beta: float) -> float:
    """(kappa lambda)^2 with lambda = sqrt(3) pi and kappa^2 = 72 pi^2 / beta^4."""
    return 216.0 * np.pi ** 4 / beta ** 4


@dataclass
class UnionReport:
    bound: float
    constant: float
    gamma_A: float
    gamma_B: float
    beta: float
    separation: float
    lip_a: float
    lip_b: float
    lip_ok: bool
    sum_sq_ratio: float
    sum_sq_ok: bool
    single_piece: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def union_maps(X: FiniteMetric, A, B):
    """The scaled maps (s,x) -> (d(x, B minus A) s, x) and (d(x, A minus B) s, x)."""
    A, B = np.asarray(A, bool), np.asarray(B, bool)
    da = distance_to_set(X, B & ~A)
    db = distance_to_set(X, A & ~B)
    return da, db


def _capped(X: FiniteMetric) -> FiniteMetric:
    return FiniteMetric(np.minimum(np.pi, X.d))


def cone_over_subset(X: FiniteMetric, S, radii) -> FiniteMetric:
    idx = np.flatnonzero(np.asarray(S, bool))
    sub = FiniteMetric(X.d[np.ix_(idx, idx)])
    return cone_metric(sub, radii)[0]


def union_poincare_bound(M: Multigraph, X: FiniteMetric, A, B, beta: float,
                         radii=None, pairs: int = 100000, seed: int = 0,
                         restarts: int = 20) -> UnionReport:
    """Right side of the two-piece cone Poincare bound with measured gamma_+ values.

    Also certifies on sampled pairs that the two scaled maps are sqrt(3) pi
    Lipschitz and that their squared distances sum to at least beta^4/(72 pi^2)
    times the squared cone distance.
    """
    from .spectral import gamma_search

    A, B = np.asarray(A, bool), np.asarray(B, bool)
    if not (A | B).all():
        raise MetricError("A and B must cover X")
    if not 0 < beta <= np.pi:
        raise MetricError("beta must lie in (0, pi]")
    X = _capped(X)
    sep = set_distance(X, A & ~B, B & ~A)
    single = not (A & ~B).any() or not (B & ~A).any()
    if not single and sep < beta - 1e-12:
        raise MetricError(f"separation {sep} is below beta = {beta}")
    if radii is None:
        radii = geometric_radii(1.0, 2)

    def gamma_plus_of(S):
        C = cone_over_subset(X, S, radii)
        return gamma_search(M, C, plus=True, restarts=restarts, seed=seed).gamma_estimate

    if single:
        whole = A if A.all() else B
        g = gamma_plus_of(whole)
        return UnionReport(g, 1.0, g, g, beta, float(sep), 0.0, 0.0, True, np.inf, True, True)

    gA, gB = gamma_plus_of(A), gamma_plus_of(B)
    c = union_constant(beta)
    rng = np.random.default_rng(seed)
    ps = sample_pairs(X, pairs, rng)
    da, db = union_maps(X, A, B)
    base = cone_pair_distances(X, ps.s, ps.x, ps.t, ps.y)
    a_img = cone_pair_distances(X, da[ps.x] * ps.s, ps.x, da[ps.y] * ps.t, ps.y)
    b_img = cone_pair_distances(X, db[ps.x] * ps.s, ps.x, db[ps.y] * ps.t, ps.y)
    ok = base > 0
    lip_a = float((a_img[ok] / base[ok]).max())
    lip_b = float((b_img[ok] / base[ok]).max())
    ratio = float(((a_img[ok] ** 2 + b_img[ok] ** 2) / base[ok] ** 2).min())
    floor = beta ** 4 / (72 * np.pi ** 2)
    return UnionReport(
        bound=c * (gA + gB), constant=c, gamma_A=gA, gamma_B=gB, beta=beta,
        separation=float(sep), lip_a=lip_a, lip_b=lip_b,
        lip_ok=max(lip_a, lip_b) <= RETRACTION_LIP + 1e-6,
        sum_sq_ratio=ratio, sum_sq_ok=ratio >= floor * (1 - 1e-9), single_piece=False,
    )


def separated_union_bound(M: Multigraph, X: FiniteMetric, parts, radii=None,
                          seed: int = 0, restarts: int = 20) -> dict:
    """2 sup_i gamma_+(M, Cone(A_i)) for pieces at pairwise distance at least pi."""
    from .spectral import gamma_search

    parts = [np.asarray(p, bool) for p in parts]
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if set_distance(X, parts[i], parts[j]) < np.pi - 1e-12:
                raise MetricError("pieces are closer than pi")
    if radii is None:
        radii = geometric_radii(1.0, 2)
    gammas = [gamma_search(M, cone_over_subset(X, p, radii), plus=True,
                           restarts=restarts, seed=seed).gamma_estimate for p in parts]
    return {"bound": 2 * max(gammas), "gammas": gammas}

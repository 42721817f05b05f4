"""Finite metric spaces given by distance matrices."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class MetricError(ValueError):
    pass


class FiniteMetric:
    """An n-point metric; ``d[i, j]`` is the distance between points i and j."""

    def __init__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError("distance matrix must be square")
        self.d = d

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_points(cls, x, p: float = 2.0) -> "FiniteMetric":
        """Metric induced by an l_p norm on the rows of ``x`` (a 1-D array is the line)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        diff = np.abs(x[:, None, :] - x[None, :, :])
        if p == 1:
            return cls(diff.sum(-1))
        if np.isinf(p):
            return cls(diff.max(-1))
        return cls((diff ** p).sum(-1) ** (1.0 / p))

    @classmethod
    def path(cls, k: int) -> "FiniteMetric":
        """The points 0..k-1 on the real line."""
        return cls.from_points(np.arange(k, dtype=np.float64))

    def diameter(self) -> float:
        return float(self.d.max()) if self.n else 0.0

    def check(self, tol: float = 1e-12) -> None:
        """Raise unless symmetric, zero on the diagonal, and the triangle inequality holds."""
        d = self.d
        if not np.allclose(d, d.T, atol=0):
            raise MetricError("distance matrix is not symmetric")
        if np.any(np.diag(d) != 0) or np.any(d < 0):
            raise MetricError("distances must be nonnegative with zero diagonal")
        scale = max(1.0, float(d.max()))
        for j in range(self.n):
            # d[i, k] <= d[i, j] + d[j, k] for all i, k
            if np.any(d > d[:, j][:, None] + d[j][None, :] + tol * scale):
                raise MetricError(f"triangle inequality fails through point {j}")

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d.tolist()}

    @classmethod
    def load(cls, path) -> "FiniteMetric":
        data = json.loads(Path(path).read_text())
        m = cls(data["d"])
        if m.n != data["n"]:
            raise MetricError("declared size does not match the matrix")
        return m

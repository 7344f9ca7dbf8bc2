"""One-dimensional distributions under the 2-Wasserstein metric.

A distribution is stored as its quantile function on the midpoint grid
``p_k = (k - 1/2) / M``. The metric is then the (scaled) Euclidean distance
between quantile vectors, so weighted Frechet means are quantile averages.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import ndtri

from .base import FlatSpace, SpaceError, SpaceId

DEFAULT_M = 100
MONOTONE_TOL = 1e-9


def prob_grid(M=DEFAULT_M) -> np.ndarray:
    if M < 2:
        raise SpaceError(f"grid needs at least 2 nodes, got {M}")
    return (np.arange(1, M + 1) - 0.5) / M


def gaussian_quantiles(mean, sd, grid) -> np.ndarray:
    if sd < 0:
        raise SpaceError(f"standard deviation must be >= 0, got {sd}")
    return mean + sd * ndtri(np.asarray(grid, dtype=float))


def quantile_from_samples(samples, grid) -> np.ndarray:
    """Left-continuous empirical quantile: the order statistic of rank
    ``ceil(p_k * s)``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    s = x.size
    if s == 0:
        raise SpaceError("cannot build quantiles from an empty sample")
    rank = np.ceil(np.asarray(grid) * s).astype(int)
    return x[np.clip(rank, 1, s) - 1]


def quantiles_from_histogram(bin_edges, counts, grid) -> np.ndarray:
    """Quantiles of the piecewise-linear CDF through the cumulative bin masses."""
    edges = np.asarray(bin_edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
        raise SpaceError("need B+1 bin edges for B counts")
    if np.any(np.diff(edges) <= 0):
        raise SpaceError("bin edges must be strictly ascending")
    if np.any(counts < 0):
        raise SpaceError("histogram counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise SpaceError("histogram has no mass")
    cdf = np.concatenate([[0.0], np.cumsum(counts) / total])
    cdf[-1] = 1.0
    p = np.asarray(grid, dtype=float)
    # first bin whose upper cumulative mass reaches p; it has positive mass
    j = np.clip(np.searchsorted(cdf, p, side="left") - 1, 0, counts.size - 1)
    frac = (p - cdf[j]) / (cdf[j + 1] - cdf[j])
    return edges[j] + frac * (edges[j + 1] - edges[j])


class Wasserstein1D(FlatSpace):
    space_id = SpaceId.WASSERSTEIN1D

    def __init__(self, M=DEFAULT_M):
        self.grid = prob_grid(M)
        self.M = M
        self.scale = 1.0 / M

    @property
    def point_shape(self):
        return (self.M,)

    def validate(self, point):
        q = np.asarray(point, dtype=float)
        if q.shape != (self.M,):
            return [f"expected {self.M} quantiles, got shape {q.shape}"]
        if not np.all(np.isfinite(q)):
            return ["non-finite quantile"]
        drops = np.diff(q)
        if np.any(drops < -MONOTONE_TOL):
            k = int(np.argmin(drops))
            return [f"quantiles decrease between nodes {k} and {k + 1}"]
        return []

    def embed(self, points):
        return np.asarray(points, dtype=float).reshape(-1, self.M)

    def unembed(self, coords):
        return np.asarray(coords, dtype=float).reshape(-1, self.M)

    def project(self, coords):
        # pool-adjacent-violators: L2-closest non-decreasing vector
        return np.stack([isotonic_regression(c).x for c in coords])

    def w2_distance(self, a, b):
        return self.distance(a, b)

    def from_samples(self, samples):
        return quantile_from_samples(samples, self.grid)

    def gaussian(self, mean, sd):
        return gaussian_quantiles(mean, sd, self.grid)

    def header(self):
        return {"space": self.space_id.value, "M": self.M}

    def to_row(self, point):
        return np.asarray(point, dtype=float)

    def from_row(self, row):
        return np.asarray(row, dtype=float)

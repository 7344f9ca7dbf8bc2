"""Weighted undirected networks as graph Laplacians under the Frobenius metric."""

from __future__ import annotations

import numpy as np

from .base import FlatSpace, SpaceError, SpaceId


def laplacian_from_edges(edge_weights, V) -> np.ndarray:
    """``L = D - A`` from the row-major upper triangle of the adjacency."""
    w = np.asarray(edge_weights, dtype=float)
    if w.shape != (V * (V - 1) // 2,):
        raise SpaceError(f"expected {V * (V - 1) // 2} edge weights for V={V}, got {w.shape}")
    if np.any(w < 0):
        raise SpaceError("edge weights must be non-negative")
    adj = np.zeros((V, V))
    iu = np.triu_indices(V, 1)
    adj[iu] = w
    adj = adj + adj.T
    return np.diag(adj.sum(axis=1)) - adj


def symmetrize_flows(counts) -> np.ndarray:
    """Upper-triangle edge weights of a directed ``V x V`` flow matrix.

    Each undirected weight is the average of the ``(i, j)`` and ``(j, i)``
    counts; self-loops (the diagonal) are dropped.
    """
    C = np.asarray(counts, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise SpaceError(f"flow matrix must be square, got shape {C.shape}")
    if np.any(C < 0):
        raise SpaceError("flow counts must be non-negative")
    iu = np.triu_indices(C.shape[0], 1)
    return 0.5 * (C[iu] + C.T[iu])


def edges_from_laplacian(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    return -L[np.triu_indices(L.shape[0], 1)]


def frobenius_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise SpaceError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


class NetworkSpace(FlatSpace):
    space_id = SpaceId.NETWORK
    scale = 1.0

    def __init__(self, V, edge_cap=None):
        self.V = V
        self.edge_cap = edge_cap

    @property
    def point_shape(self):
        return (self.V, self.V)

    def validate(self, point):
        L = np.asarray(point, dtype=float)
        if L.shape != (self.V, self.V):
            return [f"expected {self.V}x{self.V} Laplacian, got shape {L.shape}"]
        if not np.all(np.isfinite(L)):
            return ["non-finite entries"]
        size = 1.0 + np.abs(L).max()
        errors = []
        if np.abs(L - L.T).max() > 1e-9 * size:
            errors.append("not symmetric")
        off = L[~np.eye(self.V, dtype=bool)]
        if off.size and off.max() > 1e-12 * size:
            errors.append("positive off-diagonal entry")
        if np.abs(L.sum(axis=1)).max() > 1e-9 * size:
            errors.append("row sums are not zero")
        if not errors and np.linalg.eigvalsh(L).min() < -1e-8 * size:
            errors.append("not positive semidefinite")
        return errors

    def embed(self, points):
        return np.asarray(points, dtype=float).reshape(-1, self.V * self.V)

    def unembed(self, coords):
        L = np.asarray(coords, dtype=float).reshape(-1, self.V, self.V)
        return 0.5 * (L + np.swapaxes(L, -1, -2))

    def project(self, coords):
        L = self.unembed(coords)
        eye = np.eye(self.V, dtype=bool)
        out = np.where(eye, 0.0, np.minimum(L, 0.0))
        idx = np.arange(self.V)
        out[:, idx, idx] = -out.sum(axis=2)
        return out.reshape(coords.shape)

    def frobenius_distance(self, a, b):
        return self.distance(a, b)

    def header(self):
        return {"space": self.space_id.value, "V": self.V}

    def to_row(self, point):
        return edges_from_laplacian(point)

    def from_row(self, row):
        w = np.asarray(row, dtype=float)
        if self.edge_cap is not None and np.any(w > self.edge_cap):
            raise SpaceError(f"edge weight exceeds cap {self.edge_cap}")
        return laplacian_from_edges(w, self.V)

"""Symmetric positive-definite matrices under the power and Bures-Wasserstein metrics."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..linalg import mm
from .base import FlatSpace, MetricSpace, SpaceError, SpaceId, validate_weights

log = logging.getLogger(__name__)

BW_RIDGE = 1e-10
PSD_OUTPUT_TOL = 1e-8


def _tril_to_sym(row, l):
    row = np.asarray(row, dtype=float)
    if row.shape != (l * (l + 1) // 2,):
        raise SpaceError(f"expected {l * (l + 1) // 2} lower-triangle values for l={l}")
    out = np.zeros((l, l))
    out[np.tril_indices(l)] = row
    return out + np.tril(out, -1).T


def _validate_spd(point, l, strict=False):
    A = np.asarray(point, dtype=float)
    if A.shape != (l, l):
        return [f"expected {l}x{l} matrix, got shape {A.shape}"]
    if not np.all(np.isfinite(A)):
        return ["non-finite entries"]
    size = 1.0 + np.abs(A).max()
    if np.abs(A - A.T).max() > 1e-9 * size:
        return ["not symmetric"]
    lo = linalg.sym_eigen(A).values[0]
    if lo < -PSD_OUTPUT_TOL * size:
        return [f"not positive semidefinite (smallest eigenvalue {lo:.3e})"]
    if strict and lo <= 0:
        return ["singular matrix where positive definite is required"]
    return []


class SpdPowerSpace(FlatSpace):
    """Power metric ``d(A, B) = c * ||A^alpha - B^alpha||_F``.

    ``c = 1/alpha`` by default; pass ``scaled=False`` for ``c = 1``. The
    constant rescales every distance but leaves Frechet means unchanged.
    """

    space_id = SpaceId.SPD_POWER

    def __init__(self, l, alpha=0.5, scaled=True):
        if alpha <= 0:
            raise SpaceError("power exponent must be positive")
        self.l = l
        self.alpha = alpha
        self.scaled = scaled
        self.scale = 1.0 / alpha**2 if scaled else 1.0

    @property
    def point_shape(self):
        return (self.l, self.l)

    def _fn(self):
        return "sqrt" if self.alpha == 0.5 else self.alpha

    def validate(self, point):
        return _validate_spd(point, self.l)

    def embed(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.l, self.l)
        return linalg.sym_apply(pts, self._fn()).reshape(len(pts), -1)

    def unembed(self, coords):
        R = np.asarray(coords, dtype=float).reshape(-1, self.l, self.l)
        R = 0.5 * (R + np.swapaxes(R, -1, -2))
        if self.alpha == 0.5:
            out = R @ R
        else:
            out = linalg.sym_apply(R, 1.0 / self.alpha)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def project(self, coords):
        R = np.asarray(coords, dtype=float).reshape(-1, self.l, self.l)
        eig = linalg.sym_eigen(0.5 * (R + np.swapaxes(R, -1, -2)))
        clipped = linalg.reconstruct(np.maximum(eig.values, 1e-8), eig.vectors)
        return clipped.reshape(coords.shape)

    def power_distance(self, a, b):
        return self.distance(a, b)

    def header(self):
        return {"space": self.space_id.value, "l": self.l}

    def to_row(self, point):
        return np.asarray(point, dtype=float)[np.tril_indices(self.l)]

    def from_row(self, row):
        return _tril_to_sym(row, self.l)


@dataclass(frozen=True)
class BwSolveConfig:
    max_iter: int = 200
    tol: float = 1e-10
    unroll_k: int = 20

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 1 <= self.unroll_k <= self.max_iter:
            raise ValueError("unroll_k must lie in [1, max_iter]")


class BarycenterError(SpaceError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _eig(a):
    # inputs in the solver are symmetric by construction; skip the checks
    return linalg.sym_eigen(0.5 * (a + np.swapaxes(a, -1, -2)), check=False)


def bw_sqdist(A, B):
    """Squared Bures-Wasserstein distance between stacks of PSD matrices."""
    rA = linalg.apply_eigen(_eig(A), "sqrt")
    cross = linalg.apply_eigen(_eig(mm(mm(rA, B), rA)), "sqrt")
    tr = np.trace(A, axis1=-2, axis2=-1) + np.trace(B, axis1=-2, axis2=-1)
    return np.maximum(tr - 2.0 * np.trace(cross, axis1=-2, axis2=-1), 0.0)


def _wsum(W, K):
    """``sum_m W[b, m] * K[b, m]`` over stacked matrices."""
    b, m = W.shape
    l = K.shape[-1]
    return (W[:, None, :] @ K.reshape(b, m, l * l))[:, 0].reshape(b, l, l)


def _bw_step(S, W, Y):
    """One fixed-point update for a batch; returns the new iterate and the
    intermediates needed to differentiate through it."""
    eS = _eig(S)
    if np.any(eS.values <= 0):
        raise BarycenterError("singular barycenter iterate")
    R = linalg.apply_eigen(eS, "sqrt")
    Ri = linalg.apply_eigen(eS, "invsqrt")
    C = mm(mm(R[:, None], Y[None]), R[:, None])
    eC = _eig(C)
    K = linalg.apply_eigen(eC, "sqrt")
    T = _wsum(W, K)
    P = mm(T, T)
    S_next = mm(mm(Ri, P), Ri)
    S_next = 0.5 * (S_next + np.swapaxes(S_next, -1, -2))
    return S_next, (eS, R, Ri, eC, K, T, P)


def _bw_step_vjp(G, W, Y, cache):
    """Pull the adjoint ``G`` of the new iterate back to the old iterate and
    to the weights."""
    eS, R, Ri, eC, K, T, P = cache
    G_P = mm(mm(Ri, G), Ri)
    G_Ri = mm(mm(G, Ri), P)
    G_Ri = G_Ri + np.swapaxes(G_Ri, -1, -2)
    G_T = mm(G_P, T)
    G_T = G_T + np.swapaxes(G_T, -1, -2)
    b, m = W.shape
    l = T.shape[-1]
    gw = (K.reshape(b, m, l * l) @ G_T.reshape(b, l * l, 1))[..., 0]
    G_C = W[:, :, None, None] * linalg.dk_from_eigen(eC, "sqrt", G_T[:, None])
    # sum_i G_Ci R Y_i, symmetrized below to add its transpose
    G_R = _wsum(np.ones_like(W), mm(G_C, mm(R[:, None], Y[None])))
    G_R = G_R + np.swapaxes(G_R, -1, -2)
    U = eS.vectors
    Ut = np.swapaxes(U, -1, -2)
    phi_sqrt = linalg.divided_differences(eS.values, "sqrt")
    phi_inv = linalg.divided_differences(eS.values, "invsqrt")
    G_S = mm(mm(U, mm(mm(Ut, G_R), U) * phi_sqrt + mm(mm(Ut, G_Ri), U) * phi_inv), Ut)
    return 0.5 * (G_S + np.swapaxes(G_S, -1, -2)), gw


def bw_barycenter_batch(W, Y, cfg=BwSolveConfig(), keep=0):
    """Weighted BW barycenters for each row of ``W`` over anchors ``Y``.

    Starts from the Euclidean weighted mean and iterates
    ``S <- S^{-1/2} (sum_i w_i (S^{1/2} Y_i S^{1/2})^{1/2})^2 S^{-1/2}``
    until the Frobenius change falls below ``tol * max(1, ||S||_F)``.
    With ``keep > 0`` the caches of the last ``keep`` steps are returned too.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    S0 = (W @ Y.reshape(len(Y), -1)).reshape(-1, *Y.shape[1:])
    S = S0
    history = deque(maxlen=keep) if keep else None
    residuals = []
    for it in range(cfg.max_iter):
        S_next, cache = _bw_step(S, W, Y)
        if history is not None:
            history.append((S, cache))
        res = np.linalg.norm(S_next - S, axis=(-2, -1))
        bound = cfg.tol * np.maximum(1.0, np.linalg.norm(S_next, axis=(-2, -1)))
        residuals.append(float(res.max()))
        S = S_next
        if np.all(res <= bound):
            break
    else:
        raise BarycenterError(
            f"BW barycenter did not converge in {cfg.max_iter} iterations "
            f"(last residual {residuals[-1]:.3e})",
            residual=residuals[-1],
        )
    tail = residuals[-5:]
    if any(b > a * (1 + 1e-6) + 1e-14 for a, b in zip(tail, tail[1:])):
        log.warning("BW barycenter residual increased near convergence: %s", tail)
    return S, history, it + 1


def bw_loss_grad_batch(W, Y, targets, cfg=BwSolveConfig()):
    """Losses ``d_BW^2(mu(w_b), target_b)`` and their gradients in ``w``,
    differentiating through the last ``unroll_k`` fixed-point steps."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    S, history, n_iter = bw_barycenter_batch(W, Y, cfg, keep=cfg.unroll_k)
    eS = _eig(S)
    R = linalg.apply_eigen(eS, "sqrt")
    Ri = linalg.apply_eigen(eS, "invsqrt")
    cross = linalg.apply_eigen(_eig(mm(mm(R, targets), R)), "sqrt")
    tr = np.trace(S, axis1=-2, axis2=-1) + np.trace(targets, axis1=-2, axis2=-1)
    losses = np.maximum(tr - 2.0 * np.trace(cross, axis1=-2, axis2=-1), 0.0)
    # d/dS of d^2(S, Y) is I minus the optimal transport map from S to Y
    G = np.eye(S.shape[-1]) - mm(mm(Ri, cross), Ri)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    grads = np.zeros_like(W)
    for _, cache in reversed(history):
        G, gw = _bw_step_vjp(G, W, Y, cache)
        grads += gw
    if n_iter <= cfg.unroll_k:
        grads += G.reshape(len(G), -1) @ Y.reshape(len(Y), -1).T
    return losses, grads


class BuresWassersteinSpace(MetricSpace):
    """Bures-Wasserstein metric; positively curved, so not Hadamard."""

    space_id = SpaceId.SPD_BW
    hadamard = False

    def __init__(self, l, cfg=None):
        self.l = l
        self.cfg = cfg or BwSolveConfig()

    @property
    def point_shape(self):
        return (self.l, self.l)

    def validate(self, point):
        return _validate_spd(point, self.l)

    def batch_sqdist(self, a, b):
        return bw_sqdist(np.asarray(a, dtype=float), np.asarray(b, dtype=float))

    def bw_distance(self, a, b):
        return self.distance(a, b)

    def prepare(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.l, self.l)
        return pts + BW_RIDGE * np.eye(self.l)

    def batch_mean(self, W, prepared):
        S, _, _ = bw_barycenter_batch(W, prepared, self.cfg)
        return S

    def batch_loss_grad(self, W, prepared, targets):
        return bw_loss_grad_batch(W, prepared, targets, self.cfg)

    def bw_barycenter(self, w, anchors):
        return self.frechet_mean(w, anchors)

    def weighted_average(self, w, anchors):
        w = np.asarray(w, dtype=float)
        clipped = np.maximum(w, 0.0)
        if clipped.sum() <= 0:
            raise SpaceError("degenerate weight mass")
        if np.any(w < 0):
            log.debug("spd-bw: clipped %d negative weights", int((w < 0).sum()))
        return self.frechet_mean(validate_weights(clipped / clipped.sum()), anchors)

    def header(self):
        return {"space": self.space_id.value, "l": self.l}

    def to_row(self, point):
        return np.asarray(point, dtype=float)[np.tril_indices(self.l)]

    def from_row(self, row):
        return _tril_to_sym(row, self.l)

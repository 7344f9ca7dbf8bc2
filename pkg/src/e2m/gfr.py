"""Global Frechet regression: linear-regression weights fed to a weighted
Frechet mean."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .spaces import FlatSpace, MetricSpace, SpaceError

log = logging.getLogger(__name__)

MIN_WEIGHT_MASS = 1e-8


@dataclass
class GfrModel:
    x_mean: np.ndarray
    cov_inv: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    space: MetricSpace


def fit_gfr(X, Y, space: MetricSpace) -> GfrModel:
    """Store the predictor mean and inverse covariance (1/n normalization).

    A near-singular covariance gets a ridge of ``1e-8 * trace / p`` before
    inversion.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise SpaceError(f"X must be 2-D, got shape {X.shape}")
    Y = space.as_points(Y)
    if len(Y) != len(X):
        raise SpaceError(f"{len(X)} predictor rows but {len(Y)} outputs")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / len(X)
    p = cov.shape[0]
    if np.linalg.cond(cov) > 1e12:
        cov = cov + (1e-8 * max(np.trace(cov), 1e-300) / p) * np.eye(p)
    cov_inv = np.linalg.inv(cov)
    return GfrModel(mean, 0.5 * (cov_inv + cov_inv.T), X, Y, space)


def gfr_weights(model: GfrModel, X_train, x):
    """``w_i = 1 + (X_i - mean)^T Sigma^{-1} (x - mean)``; these average to 1."""
    X_train = np.asarray(X_train, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != model.x_mean.shape or X_train.shape[1:] != model.x_mean.shape:
        raise SpaceError("predictor dimension mismatch")
    return 1.0 + (X_train - model.x_mean) @ (model.cov_inv @ (x - model.x_mean))


def gfr_predict(model: GfrModel, x, space=None, Y_train=None):
    space = space or model.space
    Y_train = model.Y if Y_train is None else np.asarray(Y_train, dtype=float)
    w = gfr_weights(model, model.X, x)
    if w.sum() <= MIN_WEIGHT_MASS:
        raise SpaceError("degenerate weight mass")
    return space.weighted_average(w, Y_train)


def gfr_predict_batch(model: GfrModel, Xq):
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    space = model.space
    if not isinstance(space, FlatSpace):
        return np.stack([gfr_predict(model, x) for x in Xq])
    W = 1.0 + (Xq - model.x_mean) @ model.cov_inv @ (model.X - model.x_mean).T
    mass = W.sum(axis=1)
    if np.any(mass <= MIN_WEIGHT_MASS):
        raise SpaceError("degenerate weight mass")
    coords = (W / mass[:, None]) @ space.embed(model.Y)
    repaired = space.project(coords)
    n_fixed = int(np.any(repaired != coords, axis=1).sum())
    if n_fixed:
        log.debug("%s: projected %d infeasible GFR predictions", space.space_id.value, n_fixed)
    return space.unembed(repaired)

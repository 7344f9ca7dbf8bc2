"""Finite-difference checks of the analytic gradients.

Weights live on the simplex, so derivatives are compared along sum-zero
directions ``e_i - 1/m``: the central difference along that direction equals
the ``i``-th entry of the centred analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .spaces import (
    BuresWassersteinSpace,
    MetricSpace,
    NetworkSpace,
    SpdPowerSpace,
    Wasserstein1D,
    laplacian_from_edges,
)

FD_STEP = {"wasserstein1d": 1e-5, "network": 1e-5, "spd-power": 1e-5, "spd-bw": 1e-6}
GRAD_RTOL = {"wasserstein1d": 1e-6, "network": 1e-6, "spd-power": 1e-6, "spd-bw": 1e-3}


def random_points(space: MetricSpace, k, rng):
    """``k`` well-conditioned random points of ``space``."""
    if isinstance(space, Wasserstein1D):
        steps = rng.gamma(2.0, 0.05, size=(k, space.M))
        return rng.normal(0, 1, size=(k, 1)) + np.cumsum(steps, axis=1)
    if isinstance(space, NetworkSpace):
        n_edges = space.V * (space.V - 1) // 2
        return np.stack([laplacian_from_edges(rng.uniform(0, 1, n_edges), space.V) for _ in range(k)])
    if isinstance(space, (SpdPowerSpace, BuresWassersteinSpace)):
        A = rng.normal(size=(k, space.l, space.l))
        return A @ np.swapaxes(A, -1, -2) / space.l + 0.2 * np.eye(space.l)
    raise TypeError(f"no sampler for {type(space).__name__}")


def interior_weights(rng, m):
    """Simplex weights bounded away from the faces, so FD steps stay inside."""
    return 0.5 * rng.dirichlet(np.ones(m)) + 0.5 / m


def simplex_fd(f, w, h):
    """Central differences of ``f`` along ``e_i - 1/m`` for every ``i``."""
    m = len(w)
    out = np.empty(m)
    for i in range(m):
        v = -np.full(m, 1.0 / m)
        v[i] += 1.0
        out[i] = (f(w + h * v) - f(w - h * v)) / (2 * h)
    return out


def centred(g):
    return g - g.mean()


def rel_error(analytic, numeric, floor=1e-8):
    """Max-norm error relative to the larger gradient magnitude."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


@dataclass
class GradCheckReport:
    space: str
    instances: int
    max_rel_error: float
    tolerance: float
    errors: list = field(default_factory=list)

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance

    def as_dict(self):
        return {
            "space": self.space,
            "instances": self.instances,
            "max_rel_error": self.max_rel_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def check_space_gradient(space: MetricSpace, instances=100, m=5, seed=0, h=None, tol=None):
    """Compare ``loss_grad_w`` with central differences on random instances."""
    key = space.space_id.value
    h = h or FD_STEP[key]
    tol = tol or GRAD_RTOL[key]
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(instances):
        pts = random_points(space, m + 1, rng)
        anchors, target = pts[:m], pts[m]
        w = interior_weights(rng, m)
        prepared = space.prepare(anchors)
        tgt = space.prepare(target[None])

        def loss(v):
            return space.batch_loss_grad(v[None], prepared, tgt)[0][0]

        g = space.loss_grad_w(w, anchors, target)
        errors.append(rel_error(centred(g), simplex_fd(loss, w, h)))
    return GradCheckReport(key, instances, float(max(errors)), tol, errors)


def check_entropy_gradient(instances=100, m=6, seed=0, delta=nn.DELTA, h=1e-6, tol=1e-6):
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(instances):
        w = interior_weights(rng, m)
        g = nn.entropy_grad(w, delta)
        errors.append(rel_error(centred(g), simplex_fd(lambda v: nn.entropy(v, delta), w, h)))
    return GradCheckReport("entropy", instances, float(max(errors)), tol, errors)


def check_backprop(instances=10, layer_dims=(4, 7, 5, 3), batch=6, seed=0, h=1e-6, tol=1e-6):
    """Backprop against central differences on every parameter entry.

    The scalar is ``sum <G, w(x)>`` for a random upstream ``G``; dropout is
    on with a fixed mask so its scaling is exercised too.
    """
    rng = np.random.default_rng(seed)
    errors = []
    for t in range(instances):
        params = nn.init_params(list(layer_dims), rng.integers(2**31))
        # nonzero biases keep pre-activations off the ReLU kink when a whole
        # previous layer is zeroed by dropout
        params.biases = [rng.normal(0, 0.5, size=b.shape) for b in params.biases]
        X = rng.normal(size=(batch, layer_dims[0]))
        G = rng.normal(size=(batch, layer_dims[-1]))
        mask_seed = int(rng.integers(2**31))

        def scalar(p):
            w, _ = nn.forward(X, p, 0.3, "train", np.random.default_rng(mask_seed))
            return float((G * w).sum())

        _, cache = nn.forward(X, params, 0.3, "train", np.random.default_rng(mask_seed))
        gW, gb = nn.backprop(cache, G, params)
        analytic, numeric = [], []
        for arrays, grads in ((params.weights, gW), (params.biases, gb)):
            for arr, g in zip(arrays, grads):
                for idx in np.ndindex(arr.shape):
                    old = arr[idx]
                    arr[idx] = old + h
                    up = scalar(params)
                    arr[idx] = old - h
                    down = scalar(params)
                    arr[idx] = old
                    analytic.append(g[idx])
                    numeric.append((up - down) / (2 * h))
        errors.append(rel_error(np.array(analytic), np.array(numeric)))
    return GradCheckReport("mlp-backprop", instances, float(max(errors)), tol, errors)

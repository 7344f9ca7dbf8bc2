"""A small fully connected network with a softmax head, written directly in
numpy, together with the entropy penalty on its output and an Adam optimizer.

Rows of ``X`` are samples. Layer ``k`` computes ``h @ W_k + b_k``; hidden
layers use ReLU followed by inverted dropout in training mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DELTA = 1e-10


class NetworkError(ValueError):
    pass


@dataclass
class MlpParams:
    weights: list
    biases: list

    @property
    def layer_dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        return self.weights + self.biases

    def check(self):
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise NetworkError(f"layer {k} input size {w.shape[0]} does not match previous output")
            if b.shape != (w.shape[1],):
                raise NetworkError(f"bias {k} has shape {b.shape}, expected {(w.shape[1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NetworkError(f"layer {k} has non-finite parameters")


def init_params(layer_dims, seed) -> MlpParams:
    """He-initialized weights (sd ``sqrt(2 / fan_in)``) and zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise NetworkError("need input, at least one hidden layer, and output sizes")
    if min(dims) < 1:
        raise NetworkError(f"layer sizes must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(b) for b in dims[1:]]
    return MlpParams(weights, biases)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    w = e / e.sum(axis=-1, keepdims=True)
    return w / w.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    inputs: list  # input to each affine layer
    pre: list  # hidden pre-activations
    masks: list  # scaled dropout masks (None in eval mode)
    w: np.ndarray
    squeeze: bool = False


def forward(x, params: MlpParams, dropout_rate=0.0, mode="eval", rng=None):
    """Map inputs to simplex weights.

    ``x`` is a ``(p,)`` vector or ``(b, p)`` batch. In ``"train"`` mode hidden
    activations are dropped with probability ``dropout_rate`` and the
    survivors scaled by ``1 / (1 - dropout_rate)``; ``rng`` is a seed or
    ``numpy.random.Generator`` for the masks.
    """
    X = np.asarray(x, dtype=float)
    squeeze = X.ndim == 1
    X = np.atleast_2d(X)
    if not np.all(np.isfinite(X)):
        raise NetworkError("non-finite input")
    if X.shape[1] != params.weights[0].shape[0]:
        raise NetworkError(f"input has {X.shape[1]} features, network expects {params.weights[0].shape[0]}")
    if mode not in ("train", "eval"):
        raise NetworkError(f"unknown mode {mode!r}")
    train = mode == "train" and dropout_rate > 0
    if train:
        if not 0 <= dropout_rate < 1:
            raise NetworkError("dropout rate must lie in [0, 1)")
        rng = np.random.default_rng(rng)
    keep = 1.0 - dropout_rate

    inputs, pre, masks = [], [], []
    h = X
    n_layers = len(params.weights)
    for k in range(n_layers - 1):
        inputs.append(h)
        z = h @ params.weights[k] + params.biases[k]
        pre.append(z)
        h = np.maximum(z, 0.0)
        if train:
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
            masks.append(mask)
        else:
            masks.append(None)
    inputs.append(h)
    logits = h @ params.weights[-1] + params.biases[-1]
    w = softmax(logits)
    cache = ForwardCache(inputs, pre, masks, w, squeeze)
    return (w[0] if squeeze else w), cache


def backprop(cache: ForwardCache, upstream, params: MlpParams):
    """Gradients of ``sum_rows <upstream_row, w_row>`` with respect to all
    weights and biases, returned as ``(weight_grads, bias_grads)``."""
    G = np.atleast_2d(np.asarray(upstream, dtype=float))
    w = cache.w
    if G.shape != w.shape:
        raise NetworkError(f"upstream shape {G.shape} does not match output {w.shape}")
    if len(cache.inputs) != len(params.weights):
        raise NetworkError("cache was produced by a different network")
    # softmax Jacobian diag(w) - w w^T applied row-wise
    dz = w * (G - (w * G).sum(axis=1, keepdims=True))
    n_layers = len(params.weights)
    gW = [None] * n_layers
    gb = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        gW[k] = cache.inputs[k].T @ dz
        gb[k] = dz.sum(axis=0)
        if k == 0:
            break
        dh = dz @ params.weights[k].T
        if cache.masks[k - 1] is not None:
            dh = dh * cache.masks[k - 1]
        dz = dh * (cache.pre[k - 1] > 0)
    return gW, gb


def entropy(w, delta=DELTA):
    """``H(w) = -sum_i w_i log(w_i + delta)``, row-wise for 2-D input."""
    w = np.asarray(w, dtype=float)
    return -(w * np.log(w + delta)).sum(axis=-1)


def entropy_grad(w, delta=DELTA):
    w = np.asarray(w, dtype=float)
    return -np.log(w + delta) - w / (w + delta)


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    k: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise NetworkError("Adam decay rates must lie in [0, 1)")


def adam_step(state: AdamState, params: MlpParams, grads):
    """One Adam update. ``grads`` is ``(weight_grads, bias_grads)``.

    Returns new ``(params, state)``; the inputs are left untouched.
    """
    gW, gb = grads
    flat_g = list(gW) + list(gb)
    flat_p = params.arrays()
    if len(flat_g) != len(flat_p) or any(g.shape != p.shape for g, p in zip(flat_g, flat_p)):
        raise NetworkError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in flat_g):
        raise NetworkError("non-finite gradient")
    m_prev = state.m or [np.zeros_like(p) for p in flat_p]
    v_prev = state.v or [np.zeros_like(p) for p in flat_p]
    k = state.k + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(flat_p, flat_g, m_prev, v_prev):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**k)
        v_hat = v / (1 - b2**k)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    n = len(params.weights)
    new_params = MlpParams(new_p[:n], new_p[n:])
    new_state = AdamState(state.lr, b1, b2, state.eps, k, new_m, new_v)
    return new_params, new_state

"""Simulated regression problems with known conditional Frechet means.

Four data-generating processes are provided: Gaussian distributions observed
through samples, two-block weighted stochastic block model networks, and
Wishart SPD matrices under the power and Bures-Wasserstein metrics. Each
exposes ``draw_X``, ``draw_Y`` and ``truth`` (the conditional Frechet mean).

Gamma predictors use the shape-rate convention: ``Gamma(a, b)`` has mean
``a / b``. ``N(a, b)`` predictors use ``b`` as the variance.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linalg
from .gfr import fit_gfr, gfr_predict_batch
from .model import TrainConfig, mspe, predict_batch, train
from .rng import child_seed, substream
from .spaces import (
    BuresWassersteinSpace,
    NetworkSpace,
    SpdPowerSpace,
    Wasserstein1D,
    laplacian_from_edges,
)
from .spaces.spd import bw_barycenter_batch

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-10


def _gamma(rng, shape, rate, n):
    return rng.gamma(shape, 1.0 / rate, size=n)


def _bern(rng, p, n):
    return (rng.random(n) < p).astype(float)


def wishart_standard(rng, l, df, size):
    """Draws of ``W_l(I, df)`` by the Bartlett decomposition."""
    A = np.zeros((size, l, l))
    for i in range(l):
        A[:, i, i] = np.sqrt(rng.chisquare(df - i, size=size))
        if i:
            A[:, i, :i] = rng.standard_normal((size, i))
    return A @ np.swapaxes(A, -1, -2)


def scale_wishart(W, sd):
    """``D W D`` with ``D = diag(sd)``; ``sd`` is ``(l,)`` or ``(k, l)``."""
    sd = np.asarray(sd, dtype=float)
    return W * sd[..., :, None] * sd[..., None, :]


class DistributionDGP:
    name = "distribution"
    p = 12

    def __init__(self, M=100, s=100):
        self.space = Wasserstein1D(M)
        self.s = s

    def draw_X(self, n, rng):
        cols = [
            rng.uniform(-1, 0, n),
            rng.uniform(-1, 0, n),
            rng.uniform(0, 1, n),
            rng.uniform(0, 1, n),
            _gamma(rng, 2, 2, n),
            _gamma(rng, 3, 2, n),
            _gamma(rng, 4, 2, n),
            _gamma(rng, 5, 2, n),
            _bern(rng, 0.6, n),
            _bern(rng, 0.5, n),
            _bern(rng, 0.4, n),
            _bern(rng, 0.3, n),
        ]
        return np.column_stack(cols)

    @staticmethod
    def mean_fn(X):
        X = np.atleast_2d(X)
        x1, x2, x5, x6, x9 = X[:, 0], X[:, 1], X[:, 4], X[:, 5], X[:, 8]
        return 2 + 2 * np.cos(np.pi * x1) ** 2 + np.sin(np.pi * x2) ** 2 * x9 + np.sqrt(x5 * x6) * (1 - x9)

    @staticmethod
    def sd_fn(X):
        X = np.atleast_2d(X)
        x2, x3, x6, x7, x10 = X[:, 1], X[:, 2], X[:, 5], X[:, 6], X[:, 9]
        theta = 1 + np.cos(np.pi * x2 / 2) + np.sin(np.pi * x3) * x10 + np.sqrt(x6 * x7) * (1 - x10) / 3
        if np.any(theta <= 0):
            bad = int(np.flatnonzero(theta <= 0)[0])
            raise ValueError(f"non-positive theta {theta[bad]!r} at row {bad}")
        return theta

    def draw_latent(self, X, rng):
        """Location and scale of each output distribution."""
        mu = self.mean_fn(X)
        theta = self.sd_fn(X)
        eta = rng.normal(mu, 0.5)
        sigma = rng.gamma(theta**2, 1.0 / theta)
        return eta, sigma

    def draw_Y(self, X, rng):
        eta, sigma = self.draw_latent(X, rng)
        raw = eta[:, None] + sigma[:, None] * rng.standard_normal((len(eta), self.s))
        Y = np.stack([self.space.from_samples(r) for r in raw])
        return Y, raw

    def truth(self, Xq, rng=None, draws=None):
        mu = self.mean_fn(Xq)
        theta = self.sd_fn(Xq)
        return np.stack([self.space.gaussian(m, t) for m, t in zip(mu, theta)])

    def params(self):
        return {"M": self.space.M, "s": self.s, "eta_sd": 0.5, "sigma_law": "Gamma(shape=theta^2, scale=1/theta)"}


class NetworkDGP:
    name = "network"
    p = 9
    V = 10

    def __init__(self, p_within=0.5, p_between=0.2):
        self.space = NetworkSpace(self.V)
        self.p_within = p_within
        self.p_between = p_between
        block = np.repeat([0, 1], self.V // 2)
        iu = np.triu_indices(self.V, 1)
        bi, bj = block[iu[0]], block[iu[1]]
        # 0: within block 1, 1: between, 2: within block 2
        self.edge_kind = np.where(bi != bj, 1, np.where(bi == 0, 0, 2))
        self.edge_prob = np.where(self.edge_kind == 1, p_between, p_within)

    def _draw_X_raw(self, n, rng):
        cols = [
            rng.uniform(0, 1, n),
            rng.uniform(-0.5, 0.5, n),
            rng.uniform(1, 2, n),
            rng.normal(0, 1, n),
            rng.normal(0, 1, n),
            rng.normal(5, np.sqrt(5), n),
            _bern(rng, 0.4, n),
            _bern(rng, 0.3, n),
            _bern(rng, 0.6, n),
        ]
        return np.column_stack(cols)

    def draw_X(self, n, rng):
        X = self._draw_X_raw(n, rng)
        while True:
            a, b = self.shape_params(X)
            bad = np.flatnonzero(np.any(a <= 0, axis=1) | np.any(b <= 0, axis=1))
            if not bad.size:
                return X
            log.info("network DGP: resampling %d predictor rows with degenerate Beta shapes", bad.size)
            X[bad] = self._draw_X_raw(bad.size, rng)

    @staticmethod
    def shape_params(X):
        """Beta shapes per edge kind, each ``(n, 3)`` in the order
        (within block 1, between blocks, within block 2)."""
        X = np.atleast_2d(X)
        s1 = np.sin(np.pi * X[:, 0])
        c2 = np.cos(np.pi * X[:, 1])
        x4s, x5s, x7, x8 = X[:, 3] ** 2, X[:, 4] ** 2, X[:, 6], X[:, 7]
        a1 = 2 * s1 * x8 + c2 * (1 - x8)
        b1 = 2 * x4s * x7 + x5s * (1 - x7)
        a2 = 2 * s1 * x8 + c2 * (1 - x8)
        b2 = x4s * x7 + 2 * x5s * (1 - x7)
        a3 = s1 * x8 + 2 * c2 * (1 - x8)
        b3 = x4s * x7 + 2 * x5s * (1 - x7)
        return np.column_stack([a1, a2, a3]), np.column_stack([b1, b2, b3])

    def draw_Y(self, X, rng):
        a, b = self.shape_params(X)
        A = a[:, self.edge_kind]
        B = b[:, self.edge_kind]
        present = rng.random(A.shape) < self.edge_prob
        weights = np.where(present, rng.beta(A, B), 0.0)
        return np.stack([laplacian_from_edges(w, self.V) for w in weights]), None

    def truth(self, Xq, rng=None, draws=None):
        a, b = self.shape_params(Xq)
        mean_w = (a / (a + b))[:, self.edge_kind] * self.edge_prob
        return np.stack([laplacian_from_edges(w, self.V) for w in mean_w])

    def params(self):
        return {"V": self.V, "p_within": self.p_within, "p_between": self.p_between, "X6": "N(5, var=5)"}


class SpdPowerDGP:
    name = "spd-power"
    p = 12
    l = 5
    df = 6

    def __init__(self, oracle_draws=50_000):
        self.space = SpdPowerSpace(self.l)
        self.oracle_draws = oracle_draws

    def draw_X(self, n, rng):
        cols = [
            rng.uniform(0, 1, n),
            rng.uniform(-0.5, 0.5, n),
            rng.uniform(1, 2, n),
            _gamma(rng, 3, 2, n),
            _gamma(rng, 4, 2, n),
            _gamma(rng, 5, 2, n),
            rng.normal(0, 1, n),
            rng.normal(0, 1, n),
            rng.normal(0, 1, n),
            _bern(rng, 0.4, n),
            _bern(rng, 0.5, n),
            _bern(rng, 0.6, n),
        ]
        return np.column_stack(cols)

    @staticmethod
    def scale_diag(X):
        X = np.atleast_2d(X)
        x1, x2, x4, x5, x6 = X[:, 0], X[:, 1], X[:, 3], X[:, 4], X[:, 5]
        x7, x8, x9, x10, x11 = X[:, 6], X[:, 7], X[:, 8], X[:, 9], X[:, 10]
        s11 = (np.sin(np.pi * x1) * x10 + np.cos(np.pi * x2) * (1 - x10)) ** 2
        s22 = np.sin(np.pi * x1) ** 2 * np.cos(np.pi * x2) ** 2
        s33 = ((x4 / x5) / 10 * x11 + np.sqrt(x5 / x4) / 10 * (1 - x11)) ** 2
        s44 = np.abs(x7 * x8) / 25
        s55 = np.abs(x9 / x6) / 9
        diag = np.column_stack([s11, s22, s33, s44, s55])
        low = diag < SIGMA_FLOOR
        if np.any(low):
            log.info("spd-power DGP: raised %d scale entries to %g", int(low.sum()), SIGMA_FLOOR)
            diag = np.maximum(diag, SIGMA_FLOOR)
        return diag

    def draw_Y(self, X, rng):
        sd = np.sqrt(self.scale_diag(X))
        W = wishart_standard(rng, self.l, self.df, len(sd))
        return scale_wishart(W, sd), None

    def truth(self, Xq, rng, draws=None):
        """``(E[Y^{1/2} | X = x])^2`` by Monte Carlo.

        The same standard Wishart draws are reused for every query point.
        """
        draws = draws or self.oracle_draws
        W = wishart_standard(rng, self.l, self.df, draws)
        sds = np.sqrt(self.scale_diag(Xq))
        out = []
        for sd in sds:
            root = linalg.sym_apply(scale_wishart(W, sd), "sqrt").mean(axis=0)
            out.append(root @ root)
        return np.stack(out)

    def params(self):
        return {"l": self.l, "df": self.df, "oracle_draws": self.oracle_draws, "Sigma33": "first listed Sigma44 expression"}


class SpdBwDGP:
    name = "spd-bw"
    p = 5
    l = 2
    df = 3

    def __init__(self, oracle_draws=2000, sigma_fn=None):
        self.space = BuresWassersteinSpace(self.l)
        self.oracle_draws = oracle_draws
        self.sigma_fn = sigma_fn or self.sigmas

    def draw_X(self, n, rng):
        return np.column_stack(
            [
                rng.uniform(0, 1, n),
                rng.uniform(-0.5, 0.5, n),
                rng.uniform(1, 2, n),
                _bern(rng, 0.6, n),
                _bern(rng, 0.5, n),
            ]
        )

    @staticmethod
    def sigmas(X):
        X = np.atleast_2d(X)
        x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
        s11 = np.sin(np.pi * x1) * x4 + np.cos(np.pi * x2) * (1 - x4)
        s22 = np.sin(np.pi * x2) * np.cos(np.pi * x3)
        return np.column_stack([s11, s22])

    def _draw(self, sd, rng, size):
        Y = scale_wishart(wishart_standard(rng, self.l, self.df, size), np.abs(sd))
        lo = linalg.sym_eigen(Y).values[..., 0]
        thin = lo <= SIGMA_FLOOR
        if np.any(thin):
            log.debug("spd-bw DGP: regularized %d near-singular draws", int(thin.sum()))
            Y[thin] += SIGMA_FLOOR * np.eye(self.l)
        return Y

    def draw_Y(self, X, rng):
        return self._draw(self.sigma_fn(X), rng, len(X)), None

    def truth(self, Xq, rng, draws=None):
        """Equal-weight BW barycenter of fresh draws at each query point."""
        draws = draws or self.oracle_draws
        W = np.full((1, draws), 1.0 / draws)
        out = []
        for sd in self.sigma_fn(Xq):
            sample = self._draw(sd[None].repeat(draws, 0), rng, draws)
            S, _, _ = bw_barycenter_batch(W, self.space.prepare(sample), self.space.cfg)
            out.append(S[0])
        return np.stack(out)

    def params(self):
        return {"l": self.l, "df": self.df, "oracle_draws": self.oracle_draws}


DGPS = {
    "distribution": DistributionDGP,
    "network": NetworkDGP,
    "spd-power": SpdPowerDGP,
    "spd-bw": SpdBwDGP,
}

_DGP_ALIASES = {
    "dist": "distribution",
    "wasserstein1d": "distribution",
    "net": "network",
    "spd": "spd-power",
    "bw": "spd-bw",
}


def make_dgp(name, **kwargs):
    key = _DGP_ALIASES.get(name, name)
    if key not in DGPS:
        raise ValueError(f"unknown DGP {name!r} (expected one of {', '.join(DGPS)})")
    return DGPS[key](**kwargs)


@dataclass
class SimDataset:
    dgp: object
    X: np.ndarray
    Y: np.ndarray
    seed: int
    raw: np.ndarray | None = None

    @property
    def space(self):
        return self.dgp.space

    @property
    def params(self):
        return {"dgp": self.dgp.name, "n": len(self.X), "seed": self.seed, **self.dgp.params()}

    def truth(self, Xq, rng=None, draws=None):
        if rng is None:
            rng = substream(self.seed, "oracle")
        return self.dgp.truth(Xq, rng, draws)


def generate(dgp, n, seed) -> SimDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    dgp = make_dgp(dgp) if isinstance(dgp, str) else dgp
    rng = substream(seed, "dgp")
    X = dgp.draw_X(n, rng)
    Y, raw = dgp.draw_Y(X, rng)
    return SimDataset(dgp, X, Y, seed, raw)


def gen_distribution(n, s=100, seed=0):
    return generate(DistributionDGP(s=s), n, seed)


def gen_network(n, seed=0):
    return generate(NetworkDGP(), n, seed)


def gen_spd_power(n, seed=0, oracle_draws=50_000):
    return generate(SpdPowerDGP(oracle_draws), n, seed)


def gen_spd_bw(n, seed=0, oracle_draws=2000):
    return generate(SpdBwDGP(oracle_draws), n, seed)


# -- Monte Carlo benchmark ---------------------------------------------------


@dataclass
class RunResult:
    run: int
    data_seed: int
    train_seed: int
    mspe: dict
    seconds: dict
    epochs: int | None = None


@dataclass
class BenchmarkReport:
    dgp: str
    n: int
    runs: list = field(default_factory=list)
    test_size: int = 200
    seed: int = 0
    config: dict = field(default_factory=dict)

    def per_run(self, method):
        return [r.mspe[method] for r in self.runs if method in r.mspe]

    def amspe(self, method):
        return float(np.mean(self.per_run(method)))

    def sd(self, method):
        vals = self.per_run(method)
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def methods(self):
        return sorted({m for r in self.runs for m in r.mspe})

    def summary(self):
        return {m: {"amspe": self.amspe(m), "sd": self.sd(m)} for m in self.methods()}

    def as_dict(self):
        return {
            "dgp": self.dgp,
            "n": self.n,
            "test_size": self.test_size,
            "seed": self.seed,
            "config": self.config,
            "summary": self.summary(),
            "runs": [asdict(r) for r in self.runs],
        }


def run_one(dgp_name, n, run, seed, cfg: TrainConfig, test_size=200, methods=("e2m", "gfr"), dgp_kwargs=None):
    """One Monte Carlo replicate: fresh data, fit, score against the truth."""
    dgp = make_dgp(dgp_name, **(dgp_kwargs or {}))
    data_seed = child_seed(seed, "dgp", run)
    data = generate(dgp, n, data_seed)
    X_test = dgp.draw_X(test_size, substream(seed, "test", run))
    truth = dgp.truth(X_test, substream(seed, "oracle", run))
    train_seed = child_seed(seed, "train", run)
    result = RunResult(run, data_seed, train_seed, {}, {})
    for method in methods:
        t0 = time.perf_counter()
        if method == "e2m":
            run_cfg = TrainConfig(**{**asdict(cfg), "seed": train_seed})
            ckpt, hist = train(data.X, data.Y, dgp.space, run_cfg)
            preds = predict_batch(ckpt, X_test)
            result.epochs = hist.stopped_epoch
        elif method == "gfr":
            preds = gfr_predict_batch(fit_gfr(data.X, data.Y, dgp.space), X_test)
        else:
            raise ValueError(f"unknown method {method!r}")
        result.mspe[method] = mspe(preds, truth, dgp.space)
        result.seconds[method] = time.perf_counter() - t0
        log.info("%s n=%d run %d %s: MSPE %.4f", dgp.name, n, run, method, result.mspe[method])
    return result


def run_benchmark(dgp, n, runs, test_size=200, cfg=None, seed=0, methods=("e2m", "gfr"), jobs=1, dgp_kwargs=None):
    """Average MSPE over ``runs`` independent replicates.

    Per-run seeds derive from ``seed`` and the run index, so any single run
    can be reproduced alone.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cfg = cfg or TrainConfig()
    name = make_dgp(dgp, **(dgp_kwargs or {})).name

    def job(r):
        return run_one(name, n, r, seed, cfg, test_size, methods, dgp_kwargs)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, range(runs)))
    else:
        results = [job(r) for r in range(runs)]
    return BenchmarkReport(name, n, results, test_size, seed, asdict(cfg))

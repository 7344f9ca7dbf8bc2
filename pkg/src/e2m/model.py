"""Training, prediction, cross-validation and grid search for the
softmax-weighted Frechet mean regressor."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import nn
from .rng import substream
from .spaces import MetricSpace, SpaceError, space_from_header

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

DEFAULT_GRID = {
    "lambda": [-0.01, -0.001, 0.0, 0.001, 0.01],
    "depth": [2, 3, 4, 5, 6],
    "width": [8, 16, 32, 64, 128],
}


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2000
    batch: int = 32
    lr: float = 5e-4
    dropout: float = 0.3
    lam: float = 0.0
    hidden_dims: list = field(default_factory=lambda: [32, 32])
    anchors_m: int | None = None
    holdout_frac: float = 0.10
    patience_evals: int = 10
    eval_every: int = 10
    seed: int = 0
    delta: float = nn.DELTA

    def __post_init__(self):
        if not 0 < self.holdout_frac < 1:
            raise ValueError("holdout_frac must lie in (0, 1)")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.epochs < 1 or self.eval_every < 1 or self.patience_evals < 1:
            raise ValueError("epochs, eval_every and patience_evals must be >= 1")
        if not self.hidden_dims:
            raise ValueError("at least one hidden layer is required")
        self.hidden_dims = [int(h) for h in self.hidden_dims]


@dataclass
class EvalRecord:
    epoch: int
    train_loss: float
    holdout_mspe: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def append(self, epoch, train_loss, holdout_mspe):
        if self.records and epoch <= self.records[-1].epoch:
            raise TrainingError("history epochs must increase")
        self.records.append(EvalRecord(epoch, float(train_loss), float(holdout_mspe)))

    def to_csv(self):
        lines = ["epoch,train_loss,holdout_mspe"]
        lines += [f"{r.epoch},{r.train_loss!r},{r.holdout_mspe!r}" for r in self.records]
        return "\n".join(lines) + "\n"


@dataclass
class ModelCheckpoint:
    space: MetricSpace
    params: nn.MlpParams
    anchor_indices: list
    anchors: np.ndarray
    lam: float
    delta: float
    x_mean: np.ndarray
    x_sd: np.ndarray
    constant_columns: list
    seed: int
    config: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def __post_init__(self):
        self._prepared = None

    @property
    def prepared_anchors(self):
        if self._prepared is None:
            self._prepared = self.space.prepare(self.anchors)
        return self._prepared

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.x_mean.size:
            raise SpaceError(f"input has {X.shape[-1]} features, model expects {self.x_mean.size}")
        return (X - self.x_mean) / self.x_sd

    # -- JSON --------------------------------------------------------------
    def to_dict(self):
        rows = [self.space.to_row(a) for a in self.anchors]
        payload = "\n".join(",".join(repr(float(v)) for v in r) for r in rows)
        return {
            "version": self.version,
            "space": self.space.space_id.value,
            "space_header": self.space.header(),
            "layer_dims": self.params.layer_dims,
            "weights": [w.tolist() for w in self.params.weights],
            "biases": [b.tolist() for b in self.params.biases],
            "anchors": {"indices": [int(i) for i in self.anchor_indices], "payload_csv": payload},
            "lambda": self.lam,
            "delta": self.delta,
            "standardize": {
                "mean": self.x_mean.tolist(),
                "sd": self.x_sd.tolist(),
                "constant": list(self.constant_columns),
            },
            "seed": self.seed,
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != CHECKPOINT_VERSION:
            raise SpaceError(f"unsupported checkpoint version {d.get('version')!r}")
        space = space_from_header(d["space_header"])
        if space.space_id.value != d["space"]:
            raise SpaceError("checkpoint space tag disagrees with its header")
        params = nn.MlpParams(
            [np.asarray(w, dtype=float) for w in d["weights"]],
            [np.asarray(b, dtype=float) for b in d["biases"]],
        )
        params.check()
        if params.layer_dims != list(d["layer_dims"]):
            raise SpaceError("layer_dims disagree with stored weights")
        rows = [
            [float(v) for v in line.split(",")]
            for line in d["anchors"]["payload_csv"].splitlines()
            if line.strip()
        ]
        anchors = space.as_points([space.from_row(r) for r in rows])
        if len(anchors) != params.layer_dims[-1]:
            raise SpaceError("softmax head size differs from anchor count")
        st = d["standardize"]
        return cls(
            space=space,
            params=params,
            anchor_indices=list(d["anchors"]["indices"]),
            anchors=anchors,
            lam=float(d["lambda"]),
            delta=float(d["delta"]),
            x_mean=np.asarray(st["mean"], dtype=float),
            x_sd=np.asarray(st["sd"], dtype=float),
            constant_columns=list(st.get("constant", [])),
            seed=int(d["seed"]),
            config=d.get("config", {}),
            version=d["version"],
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def select_anchors(n, m, seed):
    """``m`` distinct row indices drawn uniformly without replacement;
    ``m == n`` keeps every row in order."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if m == n:
        return list(range(n))
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n, size=m, replace=False))


def standardization(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    constant = [int(j) for j in np.flatnonzero(sd <= 1e-12 * (1 + np.abs(mean)))]
    sd = sd.copy()
    sd[constant] = 1.0
    return mean, sd, constant


def holdout_split(n, frac, rng):
    perm = rng.permutation(n)
    n_hold = math.ceil(frac * n)
    if n_hold >= n:
        raise TrainingError(f"holdout of {n_hold} leaves no training rows (n={n})")
    return np.sort(perm[: n - n_hold]), np.sort(perm[n - n_hold :])


def _objective(space, W, anchors, targets, lam, delta):
    losses, grads = space.batch_loss_grad(W, anchors, targets)
    if lam:
        losses = losses + lam * nn.entropy(W, delta)
        grads = grads + lam * nn.entropy_grad(W, delta)
    return losses, grads


def _holdout_mspe(space, params, X, anchors, targets, chunk=256):
    out = []
    for start in range(0, len(X), chunk):
        W, _ = nn.forward(X[start : start + chunk], params, mode="eval")
        losses, _ = space.batch_loss_grad(W, anchors, targets[start : start + chunk])
        out.append(losses)
    return float(np.concatenate(out).mean())


def train(X, Y, space: MetricSpace, cfg: TrainConfig):
    """Fit the network by minibatch Adam on the entropy-regularized loss.

    Returns ``(ModelCheckpoint, TrainHistory)``. The checkpoint holds the
    parameters with the lowest holdout MSPE seen at any evaluation.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise TrainingError(f"X must be 2-D, got shape {X.shape}")
    n = len(X)
    if n < 2:
        raise TrainingError("need at least two observations")
    if not np.all(np.isfinite(X)):
        raise TrainingError("X has non-finite entries")
    Y = space.as_points(Y)
    if len(Y) != n:
        raise TrainingError(f"{n} predictor rows but {len(Y)} outputs")

    fit, hold = holdout_split(n, cfg.holdout_frac, substream(cfg.seed, "split"))
    x_mean, x_sd, constant = standardization(X[fit])
    Z = (X - x_mean) / x_sd

    m = cfg.anchors_m or len(fit)
    if m > len(fit):
        raise TrainingError(f"{m} anchors requested but only {len(fit)} training rows")
    local = select_anchors(len(fit), m, substream(cfg.seed, "anchors"))
    anchor_rows = fit[local]
    anchors = space.prepare(Y[anchor_rows])
    T_fit = space.prepare(Y[fit])
    T_hold = space.prepare(Y[hold])
    Z_fit, Z_hold = Z[fit], Z[hold]

    params = nn.init_params([X.shape[1], *cfg.hidden_dims, m], substream(cfg.seed, "init"))
    state = nn.AdamState(lr=cfg.lr)
    shuffle_rng = substream(cfg.seed, "shuffle")
    dropout_rng = substream(cfg.seed, "dropout")

    history = TrainHistory()
    best = (math.inf, params.copy(), 0)
    stale = 0
    n_fit = len(fit)
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n_fit)
        total = 0.0
        for bi, start in enumerate(range(0, n_fit, cfg.batch)):
            idx = order[start : start + cfg.batch]
            W, cache = nn.forward(Z_fit[idx], params, cfg.dropout, "train", dropout_rng)
            losses, grads = _objective(space, W, anchors, T_fit[idx], cfg.lam, cfg.delta)
            if not np.all(np.isfinite(losses)) or not np.all(np.isfinite(grads)):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            total += float(losses.sum())
            g = nn.backprop(cache, grads / len(idx), params)
            params, state = nn.adam_step(state, params, g)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            score = _holdout_mspe(space, params, Z_hold, anchors, T_hold)
            history.append(epoch, total / n_fit, score)
            if score < best[0]:
                best = (score, params.copy(), epoch)
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience_evals:
                    log.info("early stop at epoch %d (best %d)", epoch, best[2])
                    break
    history.best_epoch = best[2]
    history.stopped_epoch = epoch

    ckpt = ModelCheckpoint(
        space=space,
        params=best[1],
        anchor_indices=[int(i) for i in anchor_rows],
        anchors=Y[anchor_rows],
        lam=cfg.lam,
        delta=cfg.delta,
        x_mean=x_mean,
        x_sd=x_sd,
        constant_columns=constant,
        seed=cfg.seed,
        config=asdict(cfg),
    )
    ckpt._prepared = anchors
    return ckpt, history


def predict_weights(ckpt: ModelCheckpoint, X):
    Z = ckpt.standardize(np.atleast_2d(X))
    W, _ = nn.forward(Z, ckpt.params, mode="eval")
    return W


def predict_batch(ckpt: ModelCheckpoint, X, chunk=256):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = []
    for start in range(0, len(X), chunk):
        W = predict_weights(ckpt, X[start : start + chunk])
        out.append(ckpt.space.batch_mean(W, ckpt.prepared_anchors))
    return np.concatenate(out)


def predict(ckpt: ModelCheckpoint, x):
    """Prediction for a single predictor vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise SpaceError("x must be a finite vector")
    return predict_batch(ckpt, x[None])[0]


def mspe(preds, refs, space: MetricSpace) -> float:
    """Mean squared distance between paired predictions and references."""
    preds = np.asarray(preds, dtype=float)
    refs = np.asarray(refs, dtype=float)
    if len(preds) != len(refs):
        raise ValueError(f"{len(preds)} predictions vs {len(refs)} references")
    if len(preds) == 0:
        raise ValueError("no predictions")
    return float(space.batch_sqdist(preds, refs).mean())


# -- cross-validation --------------------------------------------------------


@dataclass
class CvSummary:
    scheme: str
    mean: float
    sd: float
    units: list  # per-fold MSPEs (loo/kfold) or per-run MSPEs (repeated)

    def as_dict(self):
        return asdict(self)


def parse_scheme(scheme):
    """``"loo"``, ``"kfold:K"`` / ``"kfold(K)"`` or ``"repeated:K:RUNS"``."""
    if isinstance(scheme, (tuple, list)):
        parts = [str(p) for p in scheme]
    else:
        parts = str(scheme).replace("(", ":").replace(")", "").replace(",", ":").split(":")
    kind = parts[0].strip().lower()
    try:
        if kind == "loo" and len(parts) == 1:
            return ("loo",)
        if kind == "kfold" and len(parts) == 2:
            return ("kfold", int(parts[1]))
        if kind == "repeated" and len(parts) == 3:
            return ("repeated", int(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise ValueError(f"bad CV scheme {scheme!r}")


def kfold_indices(n, k, rng):
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    return [np.sort(f) for f in np.array_split(rng.permutation(n), k)]


def _fold_errors(X, Y, space, cfg, folds):
    errs = []
    for test in folds:
        train_idx = np.setdiff1d(np.arange(len(X)), test)
        ckpt, _ = train(X[train_idx], Y[train_idx], space, cfg)
        preds = predict_batch(ckpt, X[test])
        errs.append(space.batch_sqdist(preds, Y[test]))
    return errs


def cross_validate(X, Y, space, cfg: TrainConfig, scheme="kfold:10", seed=0, jobs=1):
    """Out-of-sample squared distances against held-out observations."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(X)
    sch = parse_scheme(scheme)
    if sch[0] == "loo":
        errs = _fold_errors(X, Y, space, cfg, [np.array([i]) for i in range(n)])
        per = np.concatenate(errs)
        return CvSummary("loo", float(per.mean()), float(per.std(ddof=1)) if n > 1 else 0.0, per.tolist())
    if sch[0] == "kfold":
        folds = kfold_indices(n, sch[1], substream(seed, "folds"))
        errs = _fold_errors(X, Y, space, cfg, folds)
        per_fold = [float(e.mean()) for e in errs]
        overall = float(np.concatenate(errs).mean())
        return CvSummary(f"kfold:{sch[1]}", overall, float(np.std(per_fold, ddof=1)), per_fold)
    k, runs = sch[1], sch[2]

    def one_run(r):
        folds = kfold_indices(n, k, substream(seed, "folds", r))
        run_cfg = replace(cfg, seed=cfg.seed + r)
        return float(np.concatenate(_fold_errors(X, Y, space, run_cfg, folds)).mean())

    per_run = _map(one_run, range(runs), jobs)
    sd = float(np.std(per_run, ddof=1)) if runs > 1 else 0.0
    return CvSummary(f"repeated:{k}:{runs}", float(np.mean(per_run)), sd, per_run)


def _map(fn, items, jobs):
    items = list(items)
    if jobs <= 1:
        return [fn(i) for i in items]
    from concurrent.futures import ThreadPoolExecutor

    # results are collected in input order, so output is independent of jobs
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- grid search -------------------------------------------------------------


@dataclass
class GridResult:
    best: TrainConfig
    table: list  # dicts with lambda, depth, width, cv_mspe, cv_sd

    def to_csv(self):
        lines = ["lambda,depth,width,cv_mspe,cv_sd"]
        lines += [f"{r['lambda']!r},{r['depth']},{r['width']},{r['cv_mspe']!r},{r['cv_sd']!r}" for r in self.table]
        return "\n".join(lines) + "\n"


def grid_search(X, Y, space, grid=None, folds=5, seed=0, base=None, jobs=1):
    """k-fold CV over every (lambda, depth, width) cell.

    The winner minimizes CV MSPE; ties go to the smaller width, then the
    shallower net, then the lambda closest to zero.
    """
    grid = grid or DEFAULT_GRID
    if folds < 2:
        raise ValueError("grid search needs at least 2 folds")
    cells = list(itertools.product(grid["lambda"], grid["depth"], grid["width"]))
    if not cells:
        raise ValueError("grid is empty")
    base = base or TrainConfig(seed=seed)

    def score(cell):
        lam, depth, width = cell
        cfg = replace(base, lam=float(lam), hidden_dims=[int(width)] * int(depth))
        cv = cross_validate(X, Y, space, cfg, ("kfold", folds), seed=seed)
        return {"lambda": float(lam), "depth": int(depth), "width": int(width), "cv_mspe": cv.mean, "cv_sd": cv.sd}

    table = _map(score, cells, jobs)
    winner = min(table, key=lambda r: (r["cv_mspe"], r["width"], r["depth"], abs(r["lambda"]), r["lambda"]))
    best = replace(base, lam=winner["lambda"], hidden_dims=[winner["width"]] * winner["depth"])
    return GridResult(best, table)

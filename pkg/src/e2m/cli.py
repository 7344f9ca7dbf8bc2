"""Command-line interface: ``e2m <subcommand> [options]``.

Exit codes: 0 on success, 1 on a runtime or data error (partial outputs are
removed), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, io
from .geometry import AnchorSet, audit_lipschitz
from .gfr import fit_gfr, gfr_predict_batch
from .gradcheck import check_backprop, check_entropy_gradient, check_space_gradient
from .model import (
    DEFAULT_GRID,
    ModelCheckpoint,
    TrainConfig,
    cross_validate,
    grid_search,
    mspe,
    predict_batch,
    predict_weights,
    train,
)
from .rng import child_seed
from .simgen import generate, make_dgp, run_benchmark
from .spaces import SpaceId, make_space

log = logging.getLogger("e2m")

SENSITIVITY_LAMBDAS = (-0.1, -0.05, -0.01, 0.0, 0.01, 0.05, 0.1)
SENSITIVITY_NET = [8, 8]
SPACE_TO_DGP = {
    SpaceId.WASSERSTEIN1D: "distribution",
    SpaceId.NETWORK: "network",
    SpaceId.SPD_POWER: "spd-power",
    SpaceId.SPD_BW: "spd-bw",
}
DEFAULT_DIMS = {
    SpaceId.WASSERSTEIN1D: {"M": 100},
    SpaceId.NETWORK: {"V": 10},
    SpaceId.SPD_POWER: {"l": 5},
    SpaceId.SPD_BW: {"l": 2},
}


class UsageError(Exception):
    pass


class Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        return path

    def points(self, path, points, space, extra=None):
        io.write_points(self.add(path), points, space, extra)
        self.add(io.sidecar(path))

    def json(self, path, obj):
        io.write_json(self.add(path), obj)

    def text(self, path, text):
        self.add(path).write_text(text)

    def matrix(self, path, X, prefix="x"):
        io.write_matrix(self.add(path), X, prefix)

    def manifest(self, outdir, args, config, seeds):
        path = Path(outdir) / "manifest.json"
        io.write_manifest(outdir, _command(args), config, seeds, [p.name for p in self.paths])
        self.add(path)


# -- argument parsing ----------------------------------------------------------


def _default_seed():
    raw = os.environ.get("E2M_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"E2M_SEED must be an integer, got {raw!r}") from None


def _int_list(text):
    try:
        vals = [int(v) for v in text.replace("x", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _space_arg(text):
    try:
        return SpaceId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $E2M_SEED or 0)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_space(p, required=False):
    p.add_argument("--space", type=_space_arg, required=required, help="wasserstein1d|network|spd-power|spd-bw (aliases: dist, net, spd, bw)")
    p.add_argument("--M", type=_positive, help="quantile grid size (distributions)")
    p.add_argument("--V", type=_positive, help="node count (networks)")
    p.add_argument("--l", type=_positive, help="matrix size (SPD)")


def _add_train(p):
    d = TrainConfig()
    p.add_argument("--epochs", type=_positive, default=d.epochs)
    p.add_argument("--batch", type=_positive, default=d.batch)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--dropout", type=float, default=d.dropout)
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam, help="entropy regularization strength")
    p.add_argument("--hidden", type=_int_list, default=d.hidden_dims, help="hidden widths, e.g. 32,32")
    p.add_argument("--anchors", type=_positive, default=None, help="anchor subsample size (default: all fit rows)")
    p.add_argument("--holdout", type=float, default=d.holdout_frac, help="early-stopping holdout fraction")
    p.add_argument("--patience", type=_positive, default=d.patience_evals)
    p.add_argument("--eval-every", type=_positive, default=d.eval_every)


def _add_data(p, y=True):
    p.add_argument("--x", required=True, type=Path, help="predictor CSV")
    if y:
        p.add_argument("--y", required=True, type=Path, help="output CSV with sidecar JSON header")


def build_parser():
    parser = argparse.ArgumentParser(prog="e2m", description="Regression with metric-space outputs through learned Frechet-mean weights.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("simulate", help="generate a simulated dataset with truth for a test set")
    p.add_argument("--dgp", required=True, choices=["distribution", "network", "spd-power", "spd-bw", "dist", "net", "spd", "bw"])
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--test-size", type=_positive, default=200)
    p.add_argument("--oracle-draws", type=_positive, default=None)
    p.add_argument("--raw", action="store_true", help="also write raw samples (distributions only)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("train", help="fit the network and write a checkpoint")
    _add_space(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--out", type=Path, required=True, help="checkpoint JSON path")
    _add_common(p)

    p = sub.add_parser("predict", help="predict with a checkpoint")
    p.add_argument("--model", type=Path, required=True)
    _add_data(p, y=False)
    p.add_argument("--out", type=Path, required=True, help="prediction CSV path")
    p.add_argument("--weights", type=Path, default=None, help="optional CSV for the predicted weights")
    _add_common(p, seed=False)

    p = sub.add_parser("evaluate", help="MSPE of a checkpoint against truth or held-out outputs")
    p.add_argument("--model", type=Path, required=True)
    _add_data(p, y=False)
    ref = p.add_mutually_exclusive_group(required=True)
    ref.add_argument("--truth", type=Path, help="true conditional means (MSPE-vs-truth mode)")
    ref.add_argument("--y", type=Path, help="held-out observations")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_common(p, seed=False)

    p = sub.add_parser("crossval", help="cross-validated MSPE against held-out observations")
    _add_space(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--scheme", default="kfold:10", help="loo | kfold:K | repeated:K:RUNS")
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("gridsearch", help="k-fold CV grid search over lambda, depth and width")
    _add_space(p)
    _add_data(p)
    _add_train(p)
    p.add_argument("--lambdas", type=_float_list, default=DEFAULT_GRID["lambda"])
    p.add_argument("--depths", type=_int_list, default=DEFAULT_GRID["depth"])
    p.add_argument("--widths", type=_int_list, default=DEFAULT_GRID["width"])
    p.add_argument("--folds", type=_positive, default=5)
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("sensitivity", help="AMSPE across entropy strengths with a fixed 2x8 net")
    _add_space(p, required=True)
    p.add_argument("--n", type=_positive, default=500)
    p.add_argument("--runs", type=_positive, default=5)
    p.add_argument("--test-size", type=_positive, default=200)
    p.add_argument("--lambdas", type=_float_list, default=list(SENSITIVITY_LAMBDAS))
    p.add_argument("--epochs", type=_positive, default=TrainConfig().epochs)
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _add_common(p)

    p = sub.add_parser("benchmark", help="Monte Carlo AMSPE of the network and GFR on a simulated DGP")
    p.add_argument("--dgp", required=True, choices=["distribution", "network", "spd-power", "spd-bw", "dist", "net", "spd", "bw"])
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--runs", type=_positive, default=10)
    p.add_argument("--test-size", type=_positive, default=200)
    p.add_argument("--methods", default="e2m,gfr")
    p.add_argument("--oracle-draws", type=_positive, default=None)
    _add_train(p)
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _add_common(p)

    p = sub.add_parser("audit", help="Lipschitz audit and gradient checks for a space")
    _add_space(p, required=True)
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--anchors", type=_positive, default=5)
    p.add_argument("--grad-instances", type=_positive, default=100)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    _add_common(p)

    p = sub.add_parser("baseline-gfr", help="global Frechet regression predictions")
    _add_space(p)
    _add_data(p)
    p.add_argument("--xq", type=Path, required=True, help="query predictors")
    p.add_argument("--truth", type=Path, default=None, help="optional truth CSV for an MSPE report")
    p.add_argument("--out", type=Path, required=True, help="prediction CSV path")
    _add_common(p, seed=False)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    _add_common(p, seed=False)
    return parser


# -- helpers -------------------------------------------------------------------


def _command(args):
    return {"argv": list(getattr(args, "_argv", [])), "subcommand": args.command}


def _seed(args):
    return args.seed if args.seed is not None else _default_seed()


def _dims(args, sid):
    dims = dict(DEFAULT_DIMS[sid])
    for key in ("M", "V", "l"):
        if getattr(args, key, None) is not None:
            dims[key] = getattr(args, key)
    return dims


def _load_y(args):
    """Outputs and their space, reconciling ``--space`` with the header."""
    space = None
    if args.space is not None and not io.sidecar(args.y).exists():
        space = make_space(args.space.value, **_dims(args, args.space))
    space, Y = io.read_points(args.y, space)
    if args.space is not None and space.space_id is not args.space:
        raise io.DataError(f"--space {args.space.value} disagrees with {io.sidecar(args.y).name} ({space.space_id.value})")
    return space, Y


def _load_xy(args):
    X = io.read_matrix(args.x)
    space, Y = _load_y(args)
    if len(X) != len(Y):
        raise io.DataError(f"{args.x} has {len(X)} rows but {args.y} has {len(Y)}")
    return X, Y, space


def _train_config(args, seed):
    return TrainConfig(
        epochs=args.epochs,
        batch=args.batch,
        lr=args.lr,
        dropout=args.dropout,
        lam=args.lam,
        hidden_dims=list(args.hidden),
        anchors_m=args.anchors,
        holdout_frac=args.holdout,
        patience_evals=args.patience,
        eval_every=args.eval_every,
        seed=seed,
    )


def _table(rows, cols):
    widths = [max(len(c), *(len(_cell(r[c])) for r in rows)) for c in cols]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(_cell(r[c]).rjust(w) for c, w in zip(cols, widths)) for r in rows]
    return "\n".join(lines)


def _cell(v):
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def _csv(rows, cols):
    lines = [",".join(cols)]
    lines += [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) for r in rows]
    return "\n".join(lines) + "\n"


def _outdir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parent(path):
    return _outdir(Path(path).parent if str(Path(path).parent) else Path("."))


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args, out: Outputs):
    seed = _seed(args)
    kwargs = {"oracle_draws": args.oracle_draws} if args.oracle_draws and args.dgp in ("spd-power", "spd", "spd-bw", "bw") else {}
    dgp = make_dgp(args.dgp, **kwargs)
    data = generate(dgp, args.n, seed)
    X_test = dgp.draw_X(args.test_size, np.random.default_rng(child_seed(seed, "test")))
    truth = data.truth(X_test)
    d = _outdir(args.out)
    out.matrix(d / "X.csv", data.X)
    out.points(d / "Y.csv", data.Y, dgp.space)
    out.matrix(d / "X_test.csv", X_test)
    out.points(d / "truth.csv", truth, dgp.space)
    if args.raw:
        if data.raw is None:
            raise io.DataError("--raw is only available for the distribution DGP")
        io.write_samples(out.add(d / "Y_samples.csv"), data.raw, dgp.space.M)
        out.add(d / "Y_samples.json")
    out.manifest(d, args, {"dgp": dgp.name, "n": args.n, "test_size": args.test_size, "params": dgp.params()}, {"master": seed, "dgp": seed, "oracle": "substream(seed, 'oracle')", "test": child_seed(seed, "test")})
    print(f"simulated {dgp.name}: n={args.n}, test={args.test_size} -> {d}")


def cmd_train(args, out: Outputs):
    seed = _seed(args)
    X, Y, space = _load_xy(args)
    cfg = _train_config(args, seed)
    ckpt, hist = train(X, Y, space, cfg)
    out.text(args.out, ckpt.to_json())
    stem = Path(args.out).with_suffix("")
    out.text(f"{stem}.history.csv", hist.to_csv())
    report = {
        "best_epoch": hist.best_epoch,
        "stopped_epoch": hist.stopped_epoch,
        "best_holdout_mspe": min(r.holdout_mspe for r in hist.records),
        "n": len(X),
        "anchors": len(ckpt.anchor_indices),
        "space": space.header(),
    }
    out.json(f"{stem}.report.json", report)
    out.manifest(_parent(args.out), args, asdict(cfg), {"master": seed})
    print(_table([report], ["best_epoch", "stopped_epoch", "best_holdout_mspe", "anchors"]))


def _load_model(path):
    try:
        return ModelCheckpoint.from_json(Path(path).read_text())
    except FileNotFoundError:
        raise io.DataError(f"{path}: no such file") from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise io.DataError(f"{path}: malformed checkpoint ({exc})") from None


def cmd_predict(args, out: Outputs):
    ckpt = _load_model(args.model)
    X = io.read_matrix(args.x)
    preds = predict_batch(ckpt, X)
    out.points(args.out, preds, ckpt.space)
    if args.weights:
        out.matrix(args.weights, predict_weights(ckpt, X), prefix="w")
    out.manifest(_parent(args.out), args, {"model": str(args.model), "n": len(X)}, {"model_seed": ckpt.seed})
    print(f"wrote {len(preds)} predictions to {args.out}")


def cmd_evaluate(args, out: Outputs):
    ckpt = _load_model(args.model)
    X = io.read_matrix(args.x)
    mode = "truth" if args.truth else "heldout"
    _, ref = io.read_points(args.truth or args.y, ckpt.space)
    if len(ref) != len(X):
        raise io.DataError(f"{len(X)} predictor rows but {len(ref)} reference outputs")
    preds = predict_batch(ckpt, X)
    sq = ckpt.space.batch_sqdist(preds, ref)
    report = {"mode": mode, "mspe": mspe(preds, ref, ckpt.space), "n": len(X), "sd": float(sq.std(ddof=1)) if len(sq) > 1 else 0.0}
    d = _outdir(args.out)
    out.json(d / "evaluate.json", report)
    out.text(d / "squared_errors.csv", "index,sq_dist\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(sq)))
    out.manifest(d, args, {"model": str(args.model), "mode": mode}, {"model_seed": ckpt.seed})
    print(_table([report], ["mode", "n", "mspe", "sd"]))


def cmd_crossval(args, out: Outputs):
    seed = _seed(args)
    X, Y, space = _load_xy(args)
    cfg = _train_config(args, seed)
    summary = cross_validate(X, Y, space, cfg, args.scheme, seed=seed, jobs=args.jobs)
    d = _outdir(args.out)
    out.json(d / "crossval.json", summary.as_dict())
    out.text(d / "crossval_units.csv", "unit,mspe\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(summary.units)))
    out.manifest(d, args, {**asdict(cfg), "scheme": args.scheme}, {"master": seed})
    print(_table([{"scheme": summary.scheme, "mean": summary.mean, "sd": summary.sd}], ["scheme", "mean", "sd"]))


def cmd_gridsearch(args, out: Outputs):
    seed = _seed(args)
    X, Y, space = _load_xy(args)
    base = _train_config(args, seed)
    grid = {"lambda": args.lambdas, "depth": args.depths, "width": args.widths}
    result = grid_search(X, Y, space, grid, folds=args.folds, seed=seed, base=base, jobs=args.jobs)
    d = _outdir(args.out)
    out.text(d / "gridsearch.csv", result.to_csv())
    best = {"lambda": result.best.lam, "hidden_dims": result.best.hidden_dims}
    out.json(d / "gridsearch.json", {"best": best, "best_config": asdict(result.best), "table": result.table})
    out.manifest(d, args, {"base": asdict(base), "grid": grid, "folds": args.folds}, {"master": seed})
    print(_table(result.table, ["lambda", "depth", "width", "cv_mspe", "cv_sd"]))
    print(f"best: lambda={result.best.lam}, hidden={result.best.hidden_dims}")


def cmd_sensitivity(args, out: Outputs):
    seed = _seed(args)
    dgp = SPACE_TO_DGP[args.space]
    rows = []
    for lam in args.lambdas:
        cfg = TrainConfig(epochs=args.epochs, lam=lam, hidden_dims=list(SENSITIVITY_NET), seed=seed)
        rep = run_benchmark(dgp, args.n, args.runs, args.test_size, cfg, seed, methods=("e2m",), jobs=args.jobs)
        rows.append({"lambda": float(lam), "amspe": rep.amspe("e2m"), "sd": rep.sd("e2m"), "runs": args.runs})
        log.info("lambda=%g: AMSPE %.4f", lam, rows[-1]["amspe"])
    d = _outdir(args.out)
    cols = ["lambda", "amspe", "sd", "runs"]
    out.text(d / "sensitivity.csv", _csv(rows, cols))
    out.json(d / "sensitivity.json", {"dgp": dgp, "n": args.n, "hidden_dims": SENSITIVITY_NET, "rows": rows})
    out.manifest(d, args, {"dgp": dgp, "n": args.n, "runs": args.runs, "lambdas": args.lambdas, "hidden_dims": SENSITIVITY_NET, "epochs": args.epochs}, {"master": seed})
    print(_table(rows, cols))


def cmd_benchmark(args, out: Outputs):
    seed = _seed(args)
    cfg = _train_config(args, seed)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    unknown = set(methods) - {"e2m", "gfr"}
    if unknown:
        raise UsageError(f"unknown method(s): {', '.join(sorted(unknown))}")
    name = make_dgp(args.dgp).name
    kw = {"oracle_draws": args.oracle_draws} if args.oracle_draws and name in ("spd-power", "spd-bw") else None
    rep = run_benchmark(name, args.n, args.runs, args.test_size, cfg, seed, methods, args.jobs, kw)
    d = _outdir(args.out)
    out.json(d / "benchmark.json", rep.as_dict())
    rows = [{"run": r.run, **{m: r.mspe[m] for m in methods}} for r in rep.runs]
    out.text(d / "benchmark_runs.csv", _csv(rows, ["run", *methods]))
    out.manifest(d, args, {"dgp": name, "n": args.n, "runs": args.runs, "train": asdict(cfg), "methods": list(methods)}, {"master": seed})
    print(_table([{"method": m, **v} for m, v in rep.summary().items()], ["method", "amspe", "sd"]))


def cmd_audit(args, out: Outputs):
    seed = _seed(args)
    sid = args.space
    space = make_space(sid.value, **_dims(args, sid))
    dgp = make_dgp(SPACE_TO_DGP[sid])
    report = {"space": sid.value}
    if space.hadamard:
        pts = generate(dgp, args.anchors, seed).Y if dgp.space.header() == space.header() else None
        if pts is None:
            from .gradcheck import random_points

            pts = random_points(space, args.anchors, np.random.default_rng(seed))
        lip = audit_lipschitz(space, AnchorSet(space, pts), trials=args.trials, seed=seed)
        report["lipschitz"] = lip.as_dict()
        ok = lip.violations == 0
    else:
        report["lipschitz"] = {"skipped": "non-Hadamard space: bound not guaranteed"}
        ok = True
    checks = [
        check_space_gradient(space, instances=args.grad_instances, seed=seed),
        check_entropy_gradient(seed=seed),
        check_backprop(seed=seed),
    ]
    report["gradients"] = [c.as_dict() for c in checks]
    ok = ok and all(c.passed for c in checks)
    report["passed"] = ok
    report["violations"] = report["lipschitz"].get("violations", 0)
    d = _outdir(args.out)
    out.json(d / "audit.json", report)
    out.text(d / "audit_gradients.csv", _csv(report["gradients"], ["space", "instances", "max_rel_error", "tolerance", "passed"]))
    out.manifest(d, args, {"space": space.header(), "trials": args.trials, "anchors": args.anchors}, {"master": seed})
    print(json.dumps(report["lipschitz"]))
    print(_table(report["gradients"], ["space", "instances", "max_rel_error", "tolerance", "passed"]))
    if not ok:
        raise RuntimeError("audit failed")


def cmd_baseline_gfr(args, out: Outputs):
    X, Y, space = _load_xy(args)
    Xq = io.read_matrix(args.xq)
    preds = gfr_predict_batch(fit_gfr(X, Y, space), Xq)
    out.points(args.out, preds, space)
    report = {"n": len(X), "queries": len(Xq)}
    if args.truth:
        _, truth = io.read_points(args.truth, space)
        if len(truth) != len(Xq):
            raise io.DataError(f"{len(Xq)} query rows but {len(truth)} truth rows")
        report["mspe"] = mspe(preds, truth, space)
    stem = Path(args.out).with_suffix("")
    out.json(f"{stem}.report.json", report)
    out.manifest(_parent(args.out), args, {"space": space.header()}, {})
    print(_table([report], list(report)))


def cmd_replay(args, out: Outputs):
    manifest = io.read_json(args.manifest)
    argv = manifest.get("command", {}).get("argv")
    if not argv:
        raise io.DataError(f"{args.manifest}: no recorded argv")
    code = main(argv)
    if code:
        raise RuntimeError(f"replayed command exited with {code}")


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "crossval": cmd_crossval,
    "gridsearch": cmd_gridsearch,
    "sensitivity": cmd_sensitivity,
    "benchmark": cmd_benchmark,
    "audit": cmd_audit,
    "baseline-gfr": cmd_baseline_gfr,
    "replay": cmd_replay,
}


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    return parser, args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Outputs()
    try:
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = _default_seed()
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        io.remove_quietly(out.paths)
        parser.print_usage(sys.stderr)
        print(f"e2m: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any module error is a runtime failure
        io.remove_quietly(out.paths)
        print(f"e2m {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

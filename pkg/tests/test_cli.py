import json
import subprocess
import sys

import numpy as np
import pytest

from e2m import cli, io
from e2m.spaces import SpaceId

FAST = ["--epochs", "20", "--hidden", "6", "--eval-every", "5", "--batch", "16"]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("E2M_SEED", raising=False)
    return tmp_path


@pytest.fixture
def netdata(workdir):
    assert cli.main(["simulate", "--dgp", "network", "--n", "60", "--test-size", "8", "--seed", "2", "--out", "data"]) == 0
    return workdir / "data"


class TestParsing:
    def test_train_defaults(self):
        _, args = cli.parse(["train", "--x", "X.csv", "--y", "Y.csv", "--out", "m.json"])
        cfg = cli._train_config(args, 0)
        assert (cfg.epochs, cfg.batch, cfg.lr, cfg.dropout, cfg.lam) == (2000, 32, 5e-4, 0.3, 0.0)
        assert cfg.hidden_dims == [32, 32] and cfg.anchors_m is None

    def test_lambda_override(self):
        _, args = cli.parse(["train", "--x", "X", "--y", "Y", "--out", "m", "--lambda", "-0.01", "--hidden", "8x8"])
        assert args.lam == -0.01 and args.hidden == [8, 8]

    def test_space_alias(self):
        _, args = cli.parse(["audit", "--space", "bw"])
        assert args.space is SpaceId.SPD_BW

    def test_unknown_subcommand(self, capsys):
        assert cli.main(["frobnicate"]) == 2

    def test_bad_value(self, capsys):
        assert cli.main(["simulate", "--dgp", "network", "--n", "0", "--out", "x"]) == 2

    def test_seed_from_environment(self, workdir, monkeypatch):
        monkeypatch.setenv("E2M_SEED", "17")
        assert cli.main(["simulate", "--dgp", "network", "--n", "5", "--test-size", "2", "--out", "d"]) == 0
        assert io.read_json("d/manifest.json")["seeds"]["master"] == 17

    def test_bad_seed_environment(self, workdir, monkeypatch):
        monkeypatch.setenv("E2M_SEED", "abc")
        assert cli.main(["simulate", "--dgp", "network", "--n", "5", "--out", "d"]) == 2

    def test_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "e2m.cli", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and "0.1.0" in res.stdout


class TestSimulate:
    def test_outputs(self, netdata):
        names = {p.name for p in netdata.iterdir()}
        assert names == {"X.csv", "Y.csv", "Y.json", "X_test.csv", "truth.csv", "truth.json", "manifest.json"}
        space, Y = io.read_points(netdata / "Y.csv")
        assert space.space_id is SpaceId.NETWORK and len(Y) == 60
        assert io.read_matrix(netdata / "X.csv").shape == (60, 9)

    def test_raw_samples(self, workdir):
        assert cli.main(["simulate", "--dgp", "dist", "--n", "5", "--test-size", "2", "--raw", "--out", "d"]) == 0
        _, Y = io.read_points("d/Y.csv")
        _, S = io.read_points("d/Y_samples.csv")
        np.testing.assert_array_equal(Y, S)

    def test_raw_refused_for_networks(self, workdir):
        assert cli.main(["simulate", "--dgp", "net", "--n", "5", "--test-size", "2", "--raw", "--out", "d"]) == 1
        assert not (workdir / "d" / "X.csv").exists()


class TestTrainPredict:
    def test_pipeline(self, netdata, workdir):
        d = "data/"
        assert cli.main(["train", "--x", d + "X.csv", "--y", d + "Y.csv", "--out", "m/model.json", *FAST]) == 0
        for name in ("model.json", "model.history.csv", "model.report.json", "manifest.json"):
            assert (workdir / "m" / name).exists()
        assert cli.main(["predict", "--model", "m/model.json", "--x", d + "X_test.csv", "--out", "p/pred.csv", "--weights", "p/w.csv"]) == 0
        _, preds = io.read_points("p/pred.csv")
        assert len(preds) == 8
        W = io.read_matrix("p/w.csv")
        np.testing.assert_allclose(W.sum(axis=1), 1.0)

        assert cli.main(["evaluate", "--model", "m/model.json", "--x", d + "X_test.csv", "--truth", d + "truth.csv", "--out", "e1"]) == 0
        rep = io.read_json("e1/evaluate.json")
        assert rep["mode"] == "truth" and rep["mspe"] > 0
        assert cli.main(["evaluate", "--model", "m/model.json", "--x", d + "X.csv", "--y", d + "Y.csv", "--out", "e2"]) == 0
        assert io.read_json("e2/evaluate.json")["mode"] == "heldout"

    def test_evaluate_needs_one_reference(self, netdata):
        assert cli.main(["evaluate", "--model", "m.json", "--x", "X.csv", "--out", "e"]) == 2
        assert cli.main(["evaluate", "--model", "m.json", "--x", "X.csv", "--y", "a", "--truth", "b", "--out", "e"]) == 2

    def test_deterministic(self, netdata, workdir):
        for run in ("a", "b"):
            argv = ["train", "--x", "data/X.csv", "--y", "data/Y.csv", "--out", f"{run}/model.json", "--seed", "5", *FAST]
            assert cli.main(argv) == 0
        assert (workdir / "a/model.json").read_bytes() == (workdir / "b/model.json").read_bytes()

    def test_manifest_records_config(self, netdata, workdir):
        assert cli.main(["train", "--x", "data/X.csv", "--y", "data/Y.csv", "--out", "m/model.json", "--lambda", "0.01", *FAST]) == 0
        m = io.read_json(workdir / "m/manifest.json")
        assert m["config"]["lam"] == 0.01 and m["config"]["hidden_dims"] == [6]
        assert m["command"]["argv"][0] == "train"

    def test_replay(self, netdata, workdir):
        assert cli.main(["train", "--x", "data/X.csv", "--y", "data/Y.csv", "--out", "m/model.json", *FAST]) == 0
        first = (workdir / "m/model.json").read_bytes()
        (workdir / "m/model.json").unlink()
        assert cli.main(["replay", "m/manifest.json"]) == 0
        assert (workdir / "m/model.json").read_bytes() == first

    def test_space_disagreement(self, netdata):
        argv = ["train", "--x", "data/X.csv", "--y", "data/Y.csv", "--space", "dist", "--out", "m/model.json", *FAST]
        assert cli.main(argv) == 1

    def test_row_mismatch_removes_nothing_partial(self, netdata, workdir):
        argv = ["train", "--x", "data/X_test.csv", "--y", "data/Y.csv", "--out", "m/model.json", *FAST]
        assert cli.main(argv) == 1
        assert not (workdir / "m/model.json").exists()

    def test_partial_outputs_removed(self, netdata, workdir, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("disk full")

        monkeypatch.setattr(cli, "predict_weights", boom)
        assert cli.main(["train", "--x", "data/X.csv", "--y", "data/Y.csv", "--out", "m/model.json", *FAST]) == 0
        argv = ["predict", "--model", "m/model.json", "--x", "data/X_test.csv", "--out", "p/pred.csv", "--weights", "p/w.csv"]
        assert cli.main(argv) == 1
        assert not (workdir / "p/pred.csv").exists()
        assert not (workdir / "p/pred.json").exists()

    def test_malformed_checkpoint(self, netdata, workdir):
        (workdir / "bad.json").write_text("{}")
        assert cli.main(["predict", "--model", "bad.json", "--x", "data/X.csv", "--out", "p.csv"]) == 1


class TestOtherCommands:
    def test_baseline_gfr(self, netdata, workdir):
        d = "data/"
        argv = ["baseline-gfr", "--x", d + "X.csv", "--y", d + "Y.csv", "--xq", d + "X_test.csv", "--truth", d + "truth.csv", "--out", "g/pred.csv"]
        assert cli.main(argv) == 0
        assert io.read_json("g/pred.report.json")["mspe"] > 0

    def test_crossval(self, netdata, workdir):
        argv = ["crossval", "--x", "data/X.csv", "--y", "data/Y.csv", "--scheme", "kfold:3", "--out", "cv", *FAST]
        assert cli.main(argv) == 0
        assert len(io.read_json("cv/crossval.json")["units"]) == 3

    def test_gridsearch(self, netdata, workdir):
        argv = ["gridsearch", "--x", "data/X.csv", "--y", "data/Y.csv", "--lambdas", "0,0.01", "--depths", "1", "--widths", "4",
                "--folds", "2", "--out", "gs", *FAST]
        assert cli.main(argv) == 0
        assert len((workdir / "gs/gridsearch.csv").read_text().splitlines()) == 3
        assert io.read_json("gs/gridsearch.json")["best"]["lambda"] in (0.0, 0.01)

    def test_sensitivity_seven_rows(self, workdir, capsys):
        argv = ["sensitivity", "--space", "net", "--n", "30", "--runs", "1", "--test-size", "5", "--epochs", "5", "--out", "s"]
        assert cli.main(argv) == 0
        rows = (workdir / "s/sensitivity.csv").read_text().splitlines()
        assert rows[0] == "lambda,amspe,sd,runs"
        assert [float(r.split(",")[0]) for r in rows[1:]] == list(cli.SENSITIVITY_LAMBDAS)
        assert io.read_json("s/sensitivity.json")["hidden_dims"] == [8, 8]

    def test_benchmark(self, workdir):
        argv = ["benchmark", "--dgp", "net", "--n", "30", "--runs", "2", "--test-size", "5", "--out", "b", *FAST]
        assert cli.main(argv) == 0
        rep = io.read_json("b/benchmark.json")
        assert set(rep["summary"]) == {"e2m", "gfr"} and len(rep["runs"]) == 2

    def test_benchmark_unknown_method(self, workdir):
        assert cli.main(["benchmark", "--dgp", "net", "--n", "10", "--methods", "knn", "--out", "b"]) == 2

    @pytest.mark.parametrize("space", ["dist", "net", "spd"])
    def test_audit_hadamard(self, workdir, space, capsys):
        assert cli.main(["audit", "--space", space, "--trials", "200", "--grad-instances", "10", "--out", "a"]) == 0
        rep = io.read_json("a/audit.json")
        assert rep["violations"] == 0 and rep["passed"]
        assert json.loads(capsys.readouterr().out.splitlines()[0])["violations"] == 0

    def test_audit_bw_skips_lipschitz(self, workdir):
        assert cli.main(["audit", "--space", "bw", "--grad-instances", "3", "--out", "a"]) == 0
        assert "non-Hadamard" in io.read_json("a/audit.json")["lipschitz"]["skipped"]

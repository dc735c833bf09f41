import csv
import json
import time

import numpy as np
import pytest

from rnn_surgery import FeedforwardNet, identity_rnn, load_network, rnn_to_fnn, save_network
from rnn_surgery.cli import main
from _factories import random_fnn, random_rnn


@pytest.fixture
def fnn_file(tmp_path):
    path = tmp_path / "f.json"
    save_network(random_fnn(np.random.default_rng(0), [4, 6, 3, 1]), path)
    return path


def test_convert_and_verify_pipeline(tmp_path, fnn_file, capsys):
    out = tmp_path / "r.json"
    assert main(["convert", "--in", str(fnn_file), "--out", str(out), "--direction", "fnn2rnn", "--t0", "2", "--len", "3"]) == 0
    assert load_network(out).depth > 0
    assert json.loads((tmp_path / "r.json.manifest.json").read_text())["command"] == "convert"
    report = tmp_path / "v.json"
    assert main(["verify", str(out), str(fnn_file), "--t0", "2", "--out", str(report)]) == 0
    assert json.loads(report.read_text())["max_abs_diff"] <= 1e-8
    assert "W=" in capsys.readouterr().out


def test_convert_bad_inputs(tmp_path, fnn_file):
    rnn = tmp_path / "rnn.json"
    save_network(random_rnn(np.random.default_rng(1), 1, 2, 1), rnn, N=3)
    out = str(tmp_path / "o.json")
    assert main(["convert", "--in", str(rnn), "--out", out, "--direction", "rnn2fnn", "--t0", "4"]) == 3
    assert main(["convert", "--in", str(fnn_file), "--out", out, "--direction", "rnn2fnn", "--t0", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["convert", "--in", str(bad), "--out", out, "--direction", "fnn2rnn", "--t0", "1"]) == 2


def test_verify_examples(tmp_path, capsys):
    ident = tmp_path / "id.json"
    save_network(identity_rnn(1), ident, N=2)
    assert main(["verify", str(ident), str(ident), "--t0", "2"]) == 0
    assert "max_abs_diff=0.0" in capsys.readouterr().out
    zero = tmp_path / "zero.json"
    save_network(FeedforwardNet(((np.zeros((1, 1)), [0.0]),)), zero)
    assert main(["verify", str(ident), str(zero), "--t0", "1"]) == 1
    two = tmp_path / "two.json"
    save_network(FeedforwardNet(((np.zeros((2, 1)), [0.0, 0.0]),)), two)
    assert main(["verify", str(ident), str(two), "--t0", "1"]) == 3


def test_verify_unrolled_pair(tmp_path):
    net = random_rnn(np.random.default_rng(2), 2, 4, 2)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_network(net, a, N=4)
    save_network(rnn_to_fnn(net, 3, 4), b)
    assert main(["verify", str(a), str(b), "--t0", "3", "--samples", "1000", "--domain", "-5", "5"]) == 0


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_approx_demo_default(tmp_path):
    out = tmp_path / "demo.csv"
    assert main(["approx-demo", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 4 and {(r["t"], r["resolution"]) for r in rows} == {("1", "4"), ("1", "8"), ("2", "4"), ("2", "8")}
    assert all(float(r["measured_sup_error"]) <= 0.05 for r in rows)
    assert (tmp_path / "demo.csv.manifest.json").exists()


def test_approx_demo_refinement_and_single_step(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"target": "mean-sinusoid", "N": 1, "resolutions": [8, 16, 32], "points_per_axis": 257}))
    out = tmp_path / "demo.csv"
    assert main(["approx-demo", "--config", str(cfg), "--out", str(out)]) == 0
    errs = [float(r["measured_sup_error"]) for r in _rows(out)]
    assert len(errs) == 3 and errs[0] >= errs[1] - 1e-9 and errs[1] >= errs[2] - 1e-9


def test_approx_demo_unknown_target(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('target = "nope"\n')
    assert main(["approx-demo", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2


def test_bounds(capsys):
    assert main(["bounds"]) == 0
    out = capsys.readouterr().out
    assert "51.07" in out and "-0.5" in out
    assert main(["bounds", "--alpha", "0.9"]) == 2


SMOKE = {"task": {"target": "constant:0.4", "sigma": 0.0}, "ns": [256], "replications": 1, "mc_size": 1000,
         "train": {"epochs": 100}}


def test_regress_smoke_and_determinism(tmp_path):
    cfg = tmp_path / "smoke.json"
    cfg.write_text(json.dumps(SMOKE))
    start = time.perf_counter()
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "3", "--no-timing"]) == 0
    assert time.perf_counter() - start < 60
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "3", "--no-timing"]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["config"]["ns"] == [256]
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["theoretical_exponent"] == -0.5


def test_regress_timed_runs_agree_except_timing(tmp_path):
    cfg = tmp_path / "smoke.toml"
    cfg.write_text('ns = [128, 256]\nreplications = 1\nmc_size = 1000\n[task]\ntarget = "constant:0.4"\nsigma = 0.0\n[train]\nepochs = 50\n')
    for d in ("a", "b"):
        assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]
    a, b = _rows(tmp_path / "a" / "results.csv"), _rows(tmp_path / "b" / "results.csv")
    assert strip(a) == strip(b) and all(r["wall_seconds"] for r in a)


def test_regress_errors(tmp_path):
    assert main(["regress", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"task": {"target": "wiggle"}}))
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({**SMOKE, "train": {"learning_rate": -1}}))
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_regress_training_failure(tmp_path, monkeypatch):
    import rnn_surgery.regression.erm as erm

    monkeypatch.setenv("RNN_SURGERY_THREADS", "1")  # the patch must stay in this process
    monkeypatch.setattr(erm, "loss_and_grad", lambda *a, **k: (float("nan"), np.zeros(1)))
    cfg = tmp_path / "smoke.json"
    cfg.write_text(json.dumps({**SMOKE, "train": {"epochs": 5, "optimizer": "gd"}}))
    assert main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4

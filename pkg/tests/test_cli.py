"""Command-line interface: file contracts, determinism, exit codes."""
import json
import subprocess
import sys

import numpy as np
import pytest


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "mixmom.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=600,
    )


@pytest.fixture(scope="module")
def gauss_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gauss")
    res = run_cli(
        "generate",
        "--protocol", "gaussian",
        "-n", "10", "-r", "2", "-p", "4000",
        "--seed", "3",
        "--out-dir", str(out),
    )
    assert res.returncode == 0, res.stderr
    return out


def test_generate_writes_contract_files(gauss_dir):
    data = np.loadtxt(gauss_dir / "data.csv", delimiter=",")
    labels = np.loadtxt(gauss_dir / "labels.csv", delimiter=",")
    assert data.shape == (10, 4000)
    assert labels.shape == (4000,)
    assert set(np.unique(labels)) <= {0.0, 1.0}
    spec = json.loads((gauss_dir / "spec.json").read_text())
    assert len(spec["components"]) == 2


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        res = run_cli(
            "generate", "--protocol", "bernoulli",
            "-n", "6", "-r", "2", "-p", "300",
            "--seed", "9", "--out-dir", str(out),
        )
        assert res.returncode == 0, res.stderr
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "spec.json").read_bytes() == (b / "spec.json").read_bytes()


def test_generate_from_spec_file(tmp_path, gauss_dir):
    res = run_cli(
        "generate",
        "--spec", str(gauss_dir / "spec.json"),
        "-p", "200", "--seed", "1",
        "--out-dir", str(tmp_path),
    )
    assert res.returncode == 0, res.stderr
    data = np.loadtxt(tmp_path / "data.csv", delimiter=",")
    assert data.shape == (10, 200)


def test_generate_malformed_spec_exits_2(tmp_path):
    bad = tmp_path / "spec.json"
    bad.write_text(json.dumps({"components": [{"weight": 1.0, "coords": [{"dist": "nope"}]}]}))
    res = run_cli("generate", "--spec", str(bad), "-p", "10", "--out-dir", str(tmp_path))
    assert res.returncode == 2
    assert res.stderr.strip()


def test_generate_unreadable_spec_exits_3(tmp_path):
    bad = tmp_path / "spec.json"
    bad.write_text("{not json")
    res = run_cli("generate", "--spec", str(bad), "-p", "10", "--out-dir", str(tmp_path))
    assert res.returncode == 3


def test_missing_required_options_exit_2(tmp_path):
    res = run_cli("generate", "--out-dir", str(tmp_path))
    assert res.returncode == 2


def test_fit_and_evaluate_roundtrip(gauss_dir, tmp_path):
    est = tmp_path / "est.json"
    res = run_cli(
        "fit",
        "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "4", "--seed", "3",
        "--out", str(est),
    )
    assert res.returncode == 0, res.stderr
    obj = json.loads(est.read_text())
    assert obj["r"] == 2 and obj["d"] == 4
    assert len(obj["weights"]) == 2
    assert len(obj["means"]) == 2 and len(obj["means"][0]) == 10
    assert obj["converged"] is True
    assert obj["trace"][-1]["cost"] <= obj["trace"][0]["cost"]

    ev = tmp_path / "report.json"
    res = run_cli(
        "evaluate",
        "--estimate", str(est),
        "--data", str(gauss_dir / "data.csv"),
        "--labels", str(gauss_dir / "labels.csv"),
        "--out", str(ev),
    )
    assert res.returncode == 0, res.stderr
    rep = json.loads(ev.read_text())
    assert rep["mean_error_pct"] < 1.0
    assert rep["weight_error_pct"] < 1.0


def test_fit_deterministic(gauss_dir, tmp_path):
    outs = []
    for name in ("e1.json", "e2.json"):
        path = tmp_path / name
        res = run_cli(
            "fit", "--data", str(gauss_dir / "data.csv"),
            "-r", "2", "-d", "3", "--seed", "5", "--max-iter", "12",
            "--out", str(path),
        )
        assert res.returncode == 0, res.stderr
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_fit_max_iter_zero_returns_init(gauss_dir, tmp_path):
    est = tmp_path / "e0.json"
    res = run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "3", "--seed", "0", "--max-iter", "0",
        "--out", str(est),
    )
    assert res.returncode == 0, res.stderr
    obj = json.loads(est.read_text())
    assert obj["iterations"] == 0
    assert obj["converged"] is False


def test_fit_bad_tau_exits_2(gauss_dir, tmp_path):
    res = run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "3", "--tau", "1,0,0",
        "--out", str(tmp_path / "x.json"),
    )
    assert res.returncode == 2


def test_fit_missing_data_exits_3(tmp_path):
    res = run_cli(
        "fit", "--data", str(tmp_path / "absent.csv"),
        "-r", "2", "-d", "3", "--out", str(tmp_path / "x.json"),
    )
    assert res.returncode == 3


def test_fit_garbage_data_exits_3(tmp_path):
    bad = tmp_path / "data.csv"
    bad.write_text("1,2,3\nfoo,bar,baz\n")
    res = run_cli(
        "fit", "--data", str(bad), "-r", "2", "-d", "3",
        "--out", str(tmp_path / "x.json"),
    )
    assert res.returncode == 3


def test_fit_strict_nonconvergence_exits_4(gauss_dir, tmp_path):
    res = run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "3", "--max-iter", "2", "--xtol", "1e-15",
        "--strict", "--out", str(tmp_path / "x.json"),
    )
    assert res.returncode == 4


def test_basic_solver_flag(gauss_dir, tmp_path):
    est = tmp_path / "basic.json"
    res = run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "3", "--basic", "--seed", "1",
        "--out", str(est),
    )
    assert res.returncode == 0, res.stderr
    assert json.loads(est.read_text())["converged"] is True


def test_general_means_roundtrip(gauss_dir, tmp_path):
    est = tmp_path / "est.json"
    run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "4", "--seed", "3", "--out", str(est),
    )
    out = tmp_path / "m2.json"
    res = run_cli(
        "general-means",
        "--data", str(gauss_dir / "data.csv"),
        "--estimate", str(est),
        "--g", "square", "-d", "3",
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    obj = json.loads(out.read_text())
    assert obj["g"] == "square"
    assert obj["floored"] is False
    vals = np.asarray(obj["values"], dtype=float)
    assert vals.shape == (2, 10)  # column-major: one row per component

    # floored variant only supports the square transform
    res = run_cli(
        "general-means",
        "--data", str(gauss_dir / "data.csv"),
        "--estimate", str(est),
        "--g", "identity", "--floored", "-d", "3",
        "--out", str(out),
    )
    assert res.returncode == 2

    res = run_cli(
        "general-means",
        "--data", str(gauss_dir / "data.csv"),
        "--estimate", str(est),
        "--g", "square", "--floored", "-d", "3",
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    assert json.loads(out.read_text())["floored"] is True


def test_evaluate_with_moments(gauss_dir, tmp_path):
    est = tmp_path / "est.json"
    run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "4", "--seed", "3", "--out", str(est),
    )
    m2 = tmp_path / "m2.json"
    run_cli(
        "general-means", "--data", str(gauss_dir / "data.csv"),
        "--estimate", str(est), "--g", "square", "-d", "3", "--out", str(m2),
    )
    rep_path = tmp_path / "rep.json"
    res = run_cli(
        "evaluate",
        "--estimate", str(est),
        "--data", str(gauss_dir / "data.csv"),
        "--labels", str(gauss_dir / "labels.csv"),
        "--moments", str(m2),
        "--out", str(rep_path),
    )
    assert res.returncode == 0, res.stderr
    rep = json.loads(rep_path.read_text())
    assert "square" in rep["moment_errors_pct"]
    assert rep["moment_errors_pct"]["square"] < 2.0


def test_rank_scan_csv(gauss_dir, tmp_path):
    out = tmp_path / "scan.csv"
    res = run_cli(
        "rank-scan",
        "--data", str(gauss_dir / "data.csv"),
        "--ranks", "1:3", "-d", "3",
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "r,cost,iterations,converged"
    assert len(lines) == 4
    ranks = [int(line.split(",")[0]) for line in lines[1:]]
    assert ranks == [1, 2, 3]


def test_bench_runs(tmp_path):
    res = run_cli("bench", "-n", "8", "-r", "2", "-p", "400", "-d", "3")
    assert res.returncode == 0, res.stderr
    assert "gram_build" in res.stdout


def test_estimate_json_loads_back(gauss_dir, tmp_path):
    from mixmom.cli import load_estimate

    est = tmp_path / "est.json"
    run_cli(
        "fit", "--data", str(gauss_dir / "data.csv"),
        "-r", "2", "-d", "3", "--seed", "2", "--max-iter", "15",
        "--out", str(est),
    )
    weights, means, obj = load_estimate(est)
    assert weights.shape == (2,)
    assert means.shape == (10, 2)  # transposed back from column-major JSON
    assert obj["seed"] == 2
    raw = json.loads(est.read_text())
    assert np.allclose(means[:, 1], raw["means"][1])

import csv
import json

import numpy as np
import pytest

from quadmani.cli import main
from quadmani.matrixio import write_matrix


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def files(tmp_path, rng):
    # smooth low-rank data with a quadratic component
    t = np.linspace(-1, 1, 80)
    x = np.linspace(0, 1, 30)[:, None]
    S = np.sin(3 * x + t) + 0.3 * np.cos(5 * x) * t**2 + 0.01 * rng.standard_normal((30, 80))
    for name, cols in (("train", slice(0, 80, 2)), ("val", slice(1, 80, 4)), ("test", slice(3, 80, 4))):
        write_matrix(S[:, cols], tmp_path / f"{name}.qmx")
    return tmp_path


def test_generate_parabola(tmp_path, capsys):
    assert main(["generate", "--dataset", "parabola", "--out", str(tmp_path / "g")]) == 0
    for f in ("train.qmx", "val.qmx", "test.qmx", "manifest.txt"):
        assert (tmp_path / "g" / f).exists()
    assert "dataset = parabola" in (tmp_path / "g" / "manifest.txt").read_text()


def test_fit_writes_artifacts(files):
    out = files / "fit"
    code = main(["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"),
                 "--method", "greedy", "--r", "3", "--m", "8", "--encoder", "linear,gn",
                 "--correlations", "0", "--out", str(out)])
    assert code == 0
    for f in ("manifold.qmn", "eval.csv", "trace.csv", "singular_values.csv", "correlations.csv",
              "correlations_pearson.csv", "manifest.json"):
        assert (out / f).exists(), f
    assert len(rows(out / "trace.csv")) == 3
    ev = rows(out / "eval.csv")
    assert [r["encoder"] for r in ev] == ["linear", "gn"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"]["r"] == 3 and "timings" in manifest
    assert len(rows(out / "correlations.csv")) == 6


def test_eval_recomputes_from_disk(files):
    out = files / "fit"
    main(["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"),
          "--r", "2", "--m", "6", "--out", str(out)])
    main(["eval", "--manifold", str(out / "manifold.qmn"), "--test", str(files / "test.qmx"),
          "--out", str(files / "ev")])
    a = float(rows(out / "eval.csv")[0]["E_rel"])
    b = float(rows(files / "ev" / "eval.csv")[0]["E_rel"])
    assert a == pytest.approx(b, rel=1e-12)


def test_gamma_grid_logged(files):
    out = files / "grid"
    assert main(["fit", "--train", str(files / "train.qmx"), "--val", str(files / "val.qmx"),
                 "--test", str(files / "test.qmx"), "--r", "2", "--m", "6", "--gamma-grid", "default",
                 "--out", str(out)]) == 0
    scores = rows(out / "gamma_scores.csv")
    assert len(scores) == 7
    chosen = json.loads((out / "manifest.json").read_text())["gamma"]
    best = min(scores, key=lambda r: (float(r["validation_objective"]), -float(r["gamma"])))
    assert chosen == float(best["gamma"])


def test_sweep_one_row_per_method_and_r(files):
    out = files / "sw"
    assert main(["sweep", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"),
                 "--method", "leading,greedy", "--r", "1:1:3", "--out", str(out)]) == 0
    got = [(r["method"], int(r["r"])) for r in rows(out / "sweep.csv")]
    assert got == [("leading", 1), ("leading", 2), ("leading", 3), ("greedy", 1), ("greedy", 2), ("greedy", 3)]


def test_am_and_diagnose(files):
    out = files / "am"
    assert main(["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"),
                 "--method", "am", "--r", "2", "--am-qbar", "4", "--am-max-outer", "3",
                 "--encoder", "linear,am", "--out", str(out)]) == 0
    assert len(rows(out / "am_history.csv")) == 4
    # correlation report needs selected indices
    assert main(["diagnose", "--manifold", str(out / "manifold.qmn"), "--train", str(files / "train.qmx"),
                 "--out", str(files / "d")]) == 2


def test_figures_opt_in(files):
    out = files / "fig"
    main(["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"), "--r", "2",
          "--m", "4", "--correlations", "0", "--figures", "--out", str(out)])
    assert (out / "singular_values.png").exists() and (out / "correlations.png").exists()
    plain = files / "nofig"
    main(["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"), "--r", "2",
          "--m", "4", "--out", str(plain)])
    assert not list(plain.glob("*.png"))


def test_exit_codes(files, tmp_path, monkeypatch):
    base = ["fit", "--train", str(files / "train.qmx"), "--test", str(files / "test.qmx"), "--out",
            str(tmp_path / "x")]
    assert main(base + ["--r", "2", "--encoder", "bogus"]) == 2
    assert main(base + ["--r", "2", "--gamma-grid", "default"]) == 2  # no validation data
    assert main(["fit", "--train", str(tmp_path / "missing.qmx"), "--test", str(files / "test.qmx"),
                 "--r", "2", "--out", str(tmp_path / "y")]) == 3
    bad = tmp_path / "bad.qmx"
    bad.write_bytes(b"garbage-garbage-garbage-garbage")
    assert main(["fit", "--train", str(bad), "--test", str(files / "test.qmx"), "--r", "1",
                 "--out", str(tmp_path / "z")]) == 3
    # gamma = 0 on rank-deficient features -> numeric failure
    write_matrix(np.vstack([np.ones((1, 6)), np.zeros((2, 6))]) * np.arange(6.0), tmp_path / "lin.qmx")
    assert main(["fit", "--train", str(tmp_path / "lin.qmx"), "--test", str(tmp_path / "lin.qmx"), "--no-center",
                 "--method", "leading", "--r", "2", "--gamma", "0", "--out", str(tmp_path / "w")]) == 4
    monkeypatch.setenv("QM_THREADS", "zero")
    assert main(base + ["--r", "2"]) == 2
    assert main(base + ["--r", "2", "--threads", "2"]) == 0  # flag wins over the environment


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2


def test_rerun_byte_identical_across_threads(tmp_path):
    outs = []
    for i, threads in enumerate(["1", "8", "1"]):
        out = tmp_path / f"run{i}"
        assert main(["generate", "--dataset", "parabola", "--out", str(out)]) == 0
        assert main(["fit", "--train", str(out / "train.qmx"), "--test", str(out / "test.qmx"),
                     "--no-center", "--r", "1", "--m", "2", "--gamma", "1e-12", "--threads", threads,
                     "--out", str(out / "fit")]) == 0
        outs.append(out)
    for name in ("train.qmx", "val.qmx", "test.qmx", "fit/manifold.qmn"):
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name

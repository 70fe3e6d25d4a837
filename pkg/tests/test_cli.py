import json
import subprocess
import sys

import pytest

from safnet.cli import main

RUN = [sys.executable, "-m", "safnet.cli"]


def run_cli(args):
    return subprocess.run(RUN + args, capture_output=True, text=True)


def synth_file(tmp_path, name="s.csv", n=30, pos=18, dim=6, seed=1, mode="linear", noise="0.2"):
    path = tmp_path / name
    code = main([
        "synth", "--n", str(n), "--pos", str(pos), "--dim", str(dim),
        "--mode", mode, "--noise", noise, "--seed", str(seed), "--out", str(path),
    ])
    assert code == 0
    return path


def test_synth_writes_expected_row_count(tmp_path):
    path = synth_file(tmp_path, n=20, pos=8)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 1 + 2 * 20


def test_synth_deterministic_bytes(tmp_path):
    p1 = synth_file(tmp_path, name="a.csv", seed=3)
    p2 = synth_file(tmp_path, name="b.csv", seed=3)
    assert p1.read_bytes() == p2.read_bytes()


def test_synth_invalid_pos_is_usage_error(tmp_path):
    result = run_cli(["synth", "--n", "10", "--pos", "0", "--dim", "4",
                      "--seed", "1", "--out", str(tmp_path / "x.csv")])
    assert result.returncode == 2
    assert "n_pos" in result.stderr


def test_cv_reports_are_byte_identical_across_runs(tmp_path):
    features = synth_file(tmp_path, n=40, pos=25, dim=6, seed=2)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        code = main([
            "cv", "--features", str(features), "--model", "safnet", "--seed", "9",
            "--epochs", "10", "--d-model", "8", "--d-k", "4",
            "--folds", "5", "--out", str(out),
        ])
        assert code == 0
        outs.append(out)
    for fname in ("report.json", "report.txt", "confusion.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_cv_knn_grid_records_chosen_k(tmp_path):
    features = synth_file(tmp_path, n=30, pos=15, dim=5, seed=4)
    out = tmp_path / "r"
    code = main([
        "cv", "--features", str(features), "--model", "knn", "--grid",
        "--seed", "5", "--folds", "3", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert len(doc["extras"]) == 3
    assert all("knn_k" in e for e in doc["extras"])
    assert all(e["knn_k"] in (1, 3, 5, 7, 9, 11) for e in doc["extras"])


def test_cv_missing_file_exit_2():
    result = run_cli(["cv", "--features", "/nonexistent/f.csv", "--model", "knn", "--seed", "1"])
    assert result.returncode == 2
    assert "/nonexistent/f.csv" in result.stderr


def test_cv_grid_with_non_knn_rejected(tmp_path):
    features = synth_file(tmp_path)
    result = run_cli(["cv", "--features", str(features), "--model", "safnet",
                      "--grid", "--seed", "1"])
    assert result.returncode == 2


def test_cv_config_file_merging(tmp_path):
    features = synth_file(tmp_path, n=24, pos=12, dim=5, seed=6)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 5, "folds": 3, "d_model": 8, "d_k": 4}))
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["cv", "--features", str(features), "--model", "safnet",
                 "--seed", "2", "--config", str(cfg), "--out", str(out1)]) == 0
    # flag overrides the file value; a different fold count changes the report
    assert main(["cv", "--features", str(features), "--model", "safnet",
                 "--seed", "2", "--config", str(cfg), "--folds", "4",
                 "--out", str(out2)]) == 0
    d1 = json.loads((out1 / "report.json").read_text())
    d2 = json.loads((out2 / "report.json").read_text())
    assert d1["folds"] == 3 and d2["folds"] == 4


def test_cv_unknown_config_key_rejected(tmp_path):
    features = synth_file(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    result = run_cli(["cv", "--features", str(features), "--model", "knn",
                      "--seed", "1", "--config", str(cfg)])
    assert result.returncode == 2
    assert "nonsense" in result.stderr


def test_cv_jobs_flag_matches_serial(tmp_path):
    features = synth_file(tmp_path, n=24, pos=12, dim=5, seed=8)
    out1, out2 = tmp_path / "serial", tmp_path / "par"
    base = ["cv", "--features", str(features), "--model", "knn", "--knn-k", "3",
            "--seed", "3", "--folds", "4"]
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--jobs", "4", "--out", str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_train_then_eval_round_trip(tmp_path):
    features = synth_file(tmp_path, n=24, pos=14, dim=6, seed=9, noise="0.05")
    model_dir = tmp_path / "m"
    assert main(["train", "--features", str(features), "--model", "safnet",
                 "--seed", "4", "--epochs", "150", "--d-model", "8", "--d-k", "4",
                 "--out", str(model_dir)]) == 0
    assert (model_dir / "params.json").exists()
    assert (model_dir / "history.json").exists()
    out = tmp_path / "eval"
    assert main(["eval", "--features", str(features),
                 "--params", str(model_dir / "params.json"), "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["averaged"]["acc"] >= 0.9  # training data, separable


def test_train_requires_out(tmp_path):
    features = synth_file(tmp_path)
    result = run_cli(["train", "--features", str(features), "--seed", "1"])
    assert result.returncode == 2


def test_train_eval_knn_and_mlp(tmp_path):
    features = synth_file(tmp_path, n=16, pos=8, dim=4, seed=10, noise="0.05")
    for model, extra in (("knn", ["--knn-k", "1"]), ("mlp", ["--epochs", "200", "--mlp-hidden", "8"])):
        model_dir = tmp_path / f"m_{model}"
        assert main(["train", "--features", str(features), "--model", model,
                     "--seed", "4", "--out", str(model_dir)] + extra) == 0
        out = tmp_path / f"eval_{model}"
        assert main(["eval", "--features", str(features),
                     "--params", str(model_dir / "params.json"), "--out", str(out)]) == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["averaged"]["acc"] >= 0.9


def test_gridsearch_command(tmp_path):
    features = synth_file(tmp_path, n=20, pos=10, dim=4, seed=11, noise="0.05")
    out = tmp_path / "gs"
    assert main(["gridsearch", "--features", str(features), "--model", "knn",
                 "--seed", "1", "--grid-k", "1,3,5", "--out", str(out)]) == 0
    doc = json.loads((out / "gridsearch.json").read_text())
    assert doc["best"]["knn_k"] in (1, 3, 5)
    assert len(doc["mean_accuracies"]) == 3


def test_gradcheck_passes_at_default_tolerance(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    captured = capsys.readouterr()
    for name in ("embed_w", "embed_b", "wq", "wk", "wv", "head_w", "head_b"):
        assert name in captured.out
    assert "PASS" in captured.out


def test_gradcheck_fails_below_float_noise(capsys):
    assert main(["gradcheck", "--seed", "0", "--tolerance", "1e-12"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_report_text_columns(tmp_path):
    features = synth_file(tmp_path, n=20, pos=12, dim=4, seed=12)
    out = tmp_path / "r"
    assert main(["cv", "--features", str(features), "--model", "knn",
                 "--seed", "2", "--folds", "4", "--out", str(out)]) == 0
    lines = (out / "report.txt").read_text().strip().split("\n")
    assert lines[0].split() == ["Model", "Sen", "Spe", "Pre", "F1", "Acc", "GM"]
    values = lines[1].split()[1:]
    assert len(values) == 6
    for v in values:
        float(v)  # percent with 2 decimals
        assert len(v.split(".")[1]) == 2

import io
import json

import pytest

from terradeep.cli import ExperimentConfig, benchmark_cells, run_cli


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_zoo_prints_catalog():
    code, out, _ = cli("zoo")
    assert code == 0 and len(json.loads(out)) == 9


def test_usage_errors_exit_1():
    assert cli("frobnicate")[0] == 1
    assert cli("train", "--bogus")[0] == 1
    code, _, err = cli("train", "--learner", "nope", "--synth")
    assert code == 1 and "slip-svm" in err
    assert cli("train", "--synth")[0] == 1  # no learner
    assert cli("train", "--learner", "slip-svm", "--data", "x", "--synth")[0] == 1
    assert cli("train", "--task", "image", "--learner", "slip-svm", "--synth")[0] == 1


def test_data_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,torque\n1,2\n")
    assert cli("train", "--learner", "slip-svm", "--data", bad, "--out", tmp_path)[0] == 2
    assert cli("train", "--learner", "slip-svm", "--data", tmp_path / "missing.csv")[0] == 2
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli("train", "--config", cfg)[0] == 2


def test_gradcheck_quick(tmp_path):
    code, out, _ = cli("gradcheck", "--quick")
    assert code == 0
    assert out.count(" ok") == 8 and "FAIL" not in out


def test_synth_features_train_eval_flow(tmp_path):
    code, out, _ = cli("synth", "--task", "slip", "--per-class", 60, "--nw", 10, "--seed", 3,
                       "--out", tmp_path / "s")
    assert code == 0
    csv_path = tmp_path / "s" / "slip.csv"
    assert csv_path.exists()
    code, _, _ = cli("features", "--data", csv_path, "--nw", 10, "--out", tmp_path / "f")
    assert code == 0
    lines = (tmp_path / "f" / "features.csv").read_text().splitlines()
    assert lines[0] == "q1,q2,q3,q4,label" and len(lines) == 181
    code, out, _ = cli("train", "--learner", "slip-dnn", "--data", csv_path, "--nw", 10,
                       "--epochs", 3, "--out", tmp_path / "m")
    assert code == 0 and "training accuracy" in out
    assert (tmp_path / "m" / "model.tdml").exists() and (tmp_path / "m" / "curve.csv").exists()
    code, out, _ = cli("eval", "--model", tmp_path / "m" / "model.tdml", "--data", csv_path,
                       "--out", tmp_path / "e")
    assert code == 0
    rep = json.loads((tmp_path / "e" / "report.json").read_text())
    assert rep["learner"] == "slip-dnn" and rep["runs"][0]["n_test"] == 180


def test_image_synth_and_hog_features(tmp_path):
    code, _, _ = cli("synth", "--task", "image", "--classes", "flat,rocks", "--per-class", 2,
                     "--size", 64, "--out", tmp_path)
    assert code == 0
    code, _, _ = cli("features", "--task", "image", "--data", tmp_path / "images", "--size", 64,
                     "--out", tmp_path / "f")
    assert code == 0
    header = (tmp_path / "f" / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 1764 + 1


def test_config_file_equals_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"learner": "slip-svm", "synth": True, "per_class": 40, "n_w": 8,
                               "runs": 2, "seed": 5}))
    assert cli("benchmark", "--config", cfg, "--mode", "filtered", "--out", tmp_path / "a")[0] == 0
    assert cli("benchmark", "--learner", "slip-svm", "--synth", "--per-class", 40, "--nw", 8,
               "--runs", 2, "--seed", 5, "--mode", "filtered", "--out", tmp_path / "b")[0] == 0
    for name in ("summary.csv", "summary.json", "slip-svm_filtered/report.json",
                 "slip-svm_filtered/model.tdml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    cfg.write_text(json.dumps({"colour": "red"}))
    assert cli("benchmark", "--config", cfg)[0] == 1


def test_benchmark_grid():
    assert benchmark_cells("slip") == [(n, m) for n in ("slip-svm", "slip-mlp", "slip-dnn",
                                                        "slip-cnn") for m in ("raw", "filtered")]
    image = benchmark_cells("image")
    assert ("image-cnn1", "filtered") not in image and ("image-cnn1", "raw") in image
    assert len(image) == 8


def test_echo_leaves_out_paths():
    e = ExperimentConfig(out="x", model="y").echo()
    assert "out" not in e and "model" not in e and e["seed"] == 0


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "terradeep", "zoo"], capture_output=True, text=True)
    assert r.returncode == 0 and "image-cnn2" in r.stdout

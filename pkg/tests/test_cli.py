import json
import subprocess
import sys

import numpy as np
import pytest

from ghm.cli import main
from ghm.config import load_config
from ghm.evaluation import feature_sweep
from ghm.formats import decode_pgm, load_model, read_dataset, write_dataset
from ghm.pca import eigen_map
from ghm.umlda import emp_map

SMALL = {
    "synth": {"counts": [12, 12, 12, 8]},
    "stft": {"window_len": 126, "frames": 50, "bins": 64},
    "pipeline": {"method": "rumlda", "p": 3},
    "sweep": {"p_min": 1, "p_max": 3},
}


def _cfg(tmp_path, **over):
    d = json.loads(json.dumps(SMALL))
    for k, v in over.items():
        d.setdefault(k, {}).update(v) if isinstance(v, dict) else d.__setitem__(k, v)
    p = tmp_path / f"cfg_{len(list(tmp_path.glob('cfg_*')))}.json"
    p.write_text(json.dumps(d, indent=1))
    return str(p)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """gen -> featurize -> train in one directory, shared by the read-only tests."""
    root = tmp_path_factory.mktemp("chain")
    cfg = _cfg(root)
    assert main(["gen", "--config", cfg, "--out", str(root)]) == 0
    assert main(["featurize", str(root), "--config", cfg, "--out", str(root)]) == 0
    assert main(["train", str(root / "dataset.ghds"), "--config", cfg, "--out", str(root)]) == 0
    return root, cfg


def test_gen_writes_manifest_and_files(chain):
    root, _ = chain
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["total"] == 44 and manifest["synthetic"] is True
    assert len(list((root / "raw").glob("*.ghrw"))) == 44
    assert manifest["counts"] == {"OK": 12, "NOK1": 12, "NOK2": 12, "NOK3": 8}


def test_default_gen_emits_429(tmp_path, capsys):
    cfg = _cfg(tmp_path, synth={"counts": [150, 130, 110, 39], "duration": 0.05, "rotation_hz": 400})
    code, out, _ = run(capsys, "gen", "--config", cfg, "--out", tmp_path / "g")
    assert code == 0 and json.loads(out)["observations"] == 429


def test_gen_rerun_is_byte_identical(tmp_path, capsys):
    cfg = _cfg(tmp_path, synth={"counts": [2, 2, 2, 2]})
    run(capsys, "gen", "--config", cfg, "--out", tmp_path / "a")
    run(capsys, "gen", "--config", cfg, "--out", tmp_path / "b")
    for f in sorted((tmp_path / "a").rglob("*.*")):
        twin = tmp_path / "b" / f.relative_to(tmp_path / "a")
        assert twin.read_bytes() == f.read_bytes()


def test_seed_flag_changes_signals(tmp_path, capsys):
    cfg = _cfg(tmp_path, synth={"counts": [1, 1, 1, 1]})
    run(capsys, "gen", "--config", cfg, "--out", tmp_path / "a")
    run(capsys, "gen", "--config", cfg, "--out", tmp_path / "b", "--seed", 9)
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert b["seed"] == 9 and a["observations"][0]["sha256"] != b["observations"][0]["sha256"]


def test_train_reports_perfect_training_fit(chain):
    root, _ = chain
    metrics = json.loads((root / "train_metrics.json").read_text())
    assert metrics["splits"]["train"]["accuracy"] == 1.0
    assert metrics["splits"]["train"]["f1"] == [1.0] * 4


def test_eval_report(chain, tmp_path, capsys):
    root, _ = chain
    code, out, _ = run(capsys, "eval", root / "model.json", root / "dataset.ghds", "--out", tmp_path, "--projections")
    assert code == 0
    rep = json.loads((tmp_path / "metrics.json").read_text())
    assert {"method", "P", "splits", "confusion", "f1", "theta"} <= set(rep)
    test = rep["splits"]["test"]
    assert test["accuracy"] == pytest.approx(np.trace(test["confusion"]) / np.sum(test["confusion"]))
    assert rep["splits"]["cv"]["mean_fold_accuracy"] >= 0.9
    assert (tmp_path / "projections.csv").read_text().startswith("label,y1,y2,y3\n")


def test_saved_and_in_memory_models_evaluate_identically(chain):
    root, cfg = chain
    from ghm.evaluation import split
    from ghm.pipeline import fit_pipeline

    conf = load_config(cfg)
    x, y, _, _ = read_dataset(root / "dataset.ghds")
    tr, te = split(y, conf.split)
    fresh = fit_pipeline(x[tr], y[tr], conf.pipeline)
    loaded, _ = load_model(root / "model.json")
    np.testing.assert_array_equal(fresh.scores(x[te]), loaded.scores(x[te]))


def test_sweep_matches_library(chain, tmp_path, capsys):
    root, cfg = chain
    code, out, _ = run(capsys, "sweep", root / "dataset.ghds", "--config", cfg, "--method", "pca", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "curves_pca.csv").read_text().splitlines()
    assert lines[0] == "P,train_accuracy,cv_accuracy,test_accuracy" and len(lines) == 4
    conf = load_config(cfg)
    x, y, _, _ = read_dataset(root / "dataset.ghds")
    lib = feature_sweep(x, y, conf.pipeline.__class__(method="pca"), range(1, 4), conf.split)
    for line, row in zip(lines[1:], lib.rows()):
        assert [float(v) for v in line.split(",")] == list(row)
    assert json.loads(out)["optimal_p"] == lib.optimal_p


def test_eigenmaps_images(chain, tmp_path, capsys):
    root, _ = chain
    code, _, _ = run(capsys, "eigenmaps", root / "model.json", "--out", tmp_path)
    assert code == 0
    files = sorted(tmp_path.glob("*.pgm"))
    assert len(files) == 3
    model, _ = load_model(root / "model.json")
    for p, f in enumerate(files, start=1):
        blob = f.read_bytes()
        assert blob.startswith(b"P5\n64 50\n255\n")
        expect = np.floor(emp_map(model.subspace, p) + 0.5).astype(np.uint8)
        np.testing.assert_array_equal(decode_pgm(blob), expect)


def test_eigenmaps_transposed_pca(chain, tmp_path, capsys):
    root, _ = chain
    cfg = _cfg(tmp_path, pipeline={"method": "pca", "p": 2}, images={"transpose": True})
    run(capsys, "train", root / "dataset.ghds", "--config", cfg, "--out", tmp_path)
    code, _, _ = run(capsys, "eigenmaps", tmp_path / "model.json", "--config", cfg, "--out", tmp_path / "img")
    assert code == 0
    files = sorted((tmp_path / "img").glob("*.pgm"))
    assert len(files) == 2
    model, _ = load_model(tmp_path / "model.json")
    img = decode_pgm(files[0].read_bytes())
    assert img.shape == (64, 50)
    np.testing.assert_array_equal(img, np.floor(eigen_map(model.subspace, 1).T + 0.5).astype(np.uint8))


def test_predict_ok_sample(chain, capsys):
    root, _ = chain
    code, out, _ = run(capsys, "predict", root / "model.json", root / "raw" / "OK_0000.ghrw")
    assert code == 0
    assert out.count("\n") == 1
    res = json.loads(out)
    assert res["label"] == "OK" and abs(sum(res["theta"]) - 1) < 1e-10 and len(res["scores"]) == 6


def test_predict_corrupt_file_exit_4(chain, tmp_path, capsys):
    root, _ = chain
    bad = tmp_path / "bad.ghrw"
    bad.write_bytes((root / "raw" / "OK_0000.ghrw").read_bytes()[:-7])
    code, _, err = run(capsys, "predict", root / "model.json", bad)
    assert code == 4 and "error:" in err


def test_missing_input_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "train", tmp_path / "none.ghds")
    assert code == 3 and "not found" in err


def test_bad_config_exit_2_with_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n "pipeline": {\n  "metod": "pca"\n }\n}\n')
    code, _, err = run(capsys, "gen", "--config", p, "--out", tmp_path)
    assert code == 2 and f"{p}:3:" in err


def test_bad_threads_exit_2(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GHM_THREADS", "zero")
    code, _, _ = run(capsys, "gen", "--out", tmp_path)
    assert code == 2
    code, _, _ = run(capsys, "gen", "--out", tmp_path, "--threads", 0)
    assert code == 2


def test_threads_env_fallback_gives_same_model(chain, tmp_path, capsys, monkeypatch):
    root, cfg = chain
    monkeypatch.setenv("GHM_THREADS", "3")
    run(capsys, "train", root / "dataset.ghds", "--config", cfg, "--out", tmp_path)
    a = json.loads((tmp_path / "model.json").read_text())
    b = json.loads((root / "model.json").read_text())
    assert a["config"]["threads"] == 3
    for k in ("subspace", "classifier"):
        assert a[k] == b[k]


def test_numeric_failure_exit_5(tmp_path, capsys):
    path = tmp_path / "flat.ghds"
    write_dataset(path, np.zeros((20, 4, 5)), np.repeat(np.arange(4), 5), "merged")
    cfg = _cfg(tmp_path, pipeline={"method": "pca", "p": 2})
    code, _, err = run(capsys, "train", path, "--config", cfg, "--out", tmp_path)
    assert code == 5 and "rank" in err


def test_p_beyond_bound_is_config_error(chain, tmp_path, capsys):
    root, _ = chain
    cfg = _cfg(tmp_path, pipeline={"method": "rumlda", "p": 60})
    code, _, _ = run(capsys, "train", root / "dataset.ghds", "--config", cfg, "--out", tmp_path)
    assert code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ghm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ghm ")
    res = subprocess.run([sys.executable, "-m", "ghm", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from imbalforest.cli import main, run_pipeline
from imbalforest.config import build_config
from imbalforest.dataio import load_dataset
from imbalforest.forest import load_model

SAMPLE = Path(__file__).parent / "data" / "transactions_sample.csv"


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


SMALL = {
    "synth": {"n_rows": 1500, "fraud_rate": 0.05, "n_features": 5, "class_separation": 2.5,
              "include_redundant_pair": True},
    "params": {"n_trees": 10},
    "seed": 3,
}


def test_synth_counts_and_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, {"synth": {"n_rows": 10000, "fraud_rate": 0.023}, "seed": 1})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "synthetic.csv").read_bytes()
    assert a == (tmp_path / "b" / "synthetic.csv").read_bytes()
    assert load_dataset(tmp_path / "a" / "synthetic.csv").class_counts() == (9770, 230)


def test_synth_zero_fraud_rows_fails(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"synth": {"n_rows": 10, "fraud_rate": 0.01}})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "fraud" in capsys.readouterr().err


def test_prepare_raw_transactions(tmp_path):
    cfg = write_cfg(tmp_path, {"input": str(SAMPLE)})
    assert main(["prepare", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    header = (tmp_path / "p" / "processed.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 17 and header[-1] == "label"
    assert not {"f:DOMAIN", "f:STATE", "f:TOTAL_TRN_AMT"} & set(header)
    corr = (tmp_path / "p" / "correlation.csv").read_text().splitlines()[0]
    assert corr == ",Time1,Time2,TRN_AMT,TOTAL_TRN_AMT"
    assert (tmp_path / "p" / "heatmap.svg").read_text().startswith("<svg")


def test_prepare_synth_redundant_pair_and_rerun(tmp_path):
    cfg = write_cfg(tmp_path, {"synth": {"n_rows": 10000, "fraud_rate": 0.023, "n_features": 6,
                                         "include_redundant_pair": True}})
    for d in ("a", "b"):
        assert main(["prepare", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    lines = (tmp_path / "a" / "correlation.csv").read_text().splitlines()
    names = lines[0].split(",")[1:]
    assert names[-2:] == ["V5", "V6"]
    assert float(lines[-1].split(",")[-2]) > 0.99
    for f in ("processed.csv", "correlation.csv", "heatmap.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_run_safe_outputs(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    out = tmp_path / "r"
    for f in ("report.json", "model.forest", "roc.csv", "roc.svg", "confusion.svg"):
        assert (out / f).exists(), f
    report = json.loads((out / "report.json").read_text())
    assert "tuning" not in report and not (out / "tuning.csv").exists()
    assert report["leakage_warning"] is None
    assert report["audit"]["test_rows_in_training"] == 0
    assert report["audit"]["smote_saw_test_rows"] is False
    assert report["resample"]["final_counts"]["majority"] == report["resample"]["final_counts"]["minority"]
    assert report["split"]["test_rows"] == report["evaluation"]["evaluated_rows"]
    assert "timing" in report
    assert load_model(out / "model.forest").n_trees == 10


def test_run_is_reproducible_without_timing(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / d), "--no-timing"]) == 0
    for f in ("report.json", "roc.csv", "model.forest", "roc.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert "timing" not in json.loads((tmp_path / "a" / "report.json").read_text())


def test_run_paper_mode_evaluates_resampled_rows(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--mode", "paper", "--out", str(tmp_path / "p")]) == 0
    report = json.loads((tmp_path / "p" / "report.json").read_text())
    assert report["mode"] == "paper" and report["leakage_warning"]
    resampled = report["dataset"]["resampled_rows"]
    assert resampled == 2 * report["resample"]["original_counts"]["majority"]
    kept = resampled - report["dataset"]["duplicates_removed"]
    assert report["split"]["train_rows"] + report["split"]["test_rows"] == kept
    assert "leaky" in (tmp_path / "p" / "roc.svg").read_text()
    assert "leaky" in (tmp_path / "p" / "confusion.svg").read_text()
    assert "warning" in capsys.readouterr().err


def test_paper_scale_evaluated_total(tmp_path):
    # one tiny tree is enough: only the row bookkeeping is under test
    n_maj, n_min = 87_562, 2_052
    g = np.random.default_rng(0)
    X = np.r_[g.normal(size=(n_maj, 2)), g.normal(size=(n_min, 2)) + 3]
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    from conftest import make_dataset
    from imbalforest.dataio import save_dataset

    save_dataset(make_dataset(X, y), tmp_path / "big.csv")
    cfg = build_config({"input": str(tmp_path / "big.csv"), "mode": "paper", "test_fraction": 0.5,
                        "params": {"n_trees": 1, "max_depth": 2}})
    report, *_ = run_pipeline(cfg)
    assert report["dataset"]["resampled_rows"] == 175_124
    total = report["split"]["train_rows"] + report["split"]["test_rows"]
    assert total == 175_124 - report["dataset"]["duplicates_removed"]


def test_run_with_grid_writes_tuning(tmp_path):
    doc = dict(SMALL, params=None, grid={"n_trees": [3], "max_depth": [2, None], "min_samples_split": [2]},
               cv_folds=3)
    cfg = write_cfg(tmp_path, doc)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "g")]) == 0
    report = json.loads((tmp_path / "g" / "report.json").read_text())
    assert len(report["tuning"]["table"]) == 2
    assert report["tuning"]["audit"]["validation_rows_not_original"] == 0
    assert len((tmp_path / "g" / "tuning.csv").read_text().splitlines()) == 1 + 2 * 3


def test_thread_count_not_in_report(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "t1"), "--threads", "1", "--no-timing"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "t3"), "--threads", "3", "--no-timing"])
    for f in ("report.json", "model.forest", "roc.csv"):
        assert (tmp_path / "t1" / f).read_bytes() == (tmp_path / "t3" / f).read_bytes()


@pytest.fixture
def trained(tmp_path):
    cfg = write_cfg(tmp_path, {"synth": {"n_rows": 300, "fraud_rate": 0.2, "n_features": 3,
                                         "class_separation": 4.0}, "seed": 2})
    main(["synth", "--config", str(cfg), "--out", str(tmp_path)])
    data = tmp_path / "synthetic.csv"
    run_cfg = write_cfg(tmp_path, {"input": str(data), "params": {"n_trees": 1, "max_features": "all",
                                                                  "bootstrap": False},
                                   "smote": {"target_ratio": 0.25}}, "run.json")
    main(["run", "--config", str(run_cfg), "--out", str(tmp_path / "run")])
    return tmp_path / "run" / "model.forest", data


def test_evaluate_threshold_one_predicts_nothing(trained, tmp_path):
    model, data = trained
    assert main(["evaluate", "--model", str(model), "--data", str(data), "--threshold", "1.0",
                 "--out", str(tmp_path / "e")]) == 0
    ev = json.loads((tmp_path / "e" / "evaluation.json").read_text())
    assert ev["confusion"]["tp"] == 0 and ev["confusion"]["fp"] == 0
    assert ev["class_report"]["1"]["recall"] == 0.0
    assert ev["class_report"]["1"]["precision"] is None


def test_evaluate_training_data_full_capacity(tmp_path):
    from imbalforest.cli import cmd_evaluate
    from imbalforest.dataio import SynthSpec, generate_synthetic, save_dataset
    from imbalforest.forest import ForestParams, fit_forest, save_model
    from imbalforest.rng import RandomSource

    ds = generate_synthetic(SynthSpec(400, 0.1, 3, 3.0), RandomSource(0))
    save_dataset(ds, tmp_path / "d.csv")
    model = fit_forest(ds, ForestParams(1, None, 2, "all", False), RandomSource(1))
    save_model(model, tmp_path / "m.forest")
    frag = cmd_evaluate(tmp_path / "m.forest", tmp_path / "d.csv", 0.5)
    assert frag["class_report"]["accuracy"] == 1.0


def test_evaluate_feature_mismatch(trained, tmp_path, capsys):
    model, data = trained
    text = data.read_text().replace("f:V2", "f:W2", 1)
    other = tmp_path / "renamed.csv"
    other.write_text(text)
    assert main(["evaluate", "--model", str(model), "--data", str(other)]) == 1
    err = capsys.readouterr().err
    assert "mismatch at column 1" in err and "'V2'" in err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"bogus": 1})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_run_without_params_or_grid(tmp_path):
    cfg = write_cfg(tmp_path, {"synth": SMALL["synth"]})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "imbalforest", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "imbalforest" in proc.stdout


def test_set_override_from_command_line(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--set", "smote.k=3",
                 "--set", "params.n_trees=4", "--seed", "8"]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["config"]["smote"]["k"] == 3
    assert report["model"]["params"]["n_trees"] == 4
    assert report["seed"] == 8

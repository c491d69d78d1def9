"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) or through pytest.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import check_tree_against_oracle, knn_oracle_rows, mann_whitney_auc, random_small_dataset  # noqa: E402

from imbalforest.cli import main  # noqa: E402
from imbalforest.dataio import Dataset, SynthSpec, generate_synthetic  # noqa: E402
from imbalforest.forest import ForestParams, fit_forest, predict_labels  # noqa: E402
from imbalforest.metrics import ConfusionMatrix, class_report, roc_curve  # noqa: E402
from imbalforest.preprocess import dedup, stratified_split  # noqa: E402
from imbalforest.resample import SmoteConfig, smote  # noqa: E402
from imbalforest.rng import RandomSource  # noqa: E402

DESK_SYNTH = {
    "n_rows": 10000,
    "fraud_rate": 0.023,
    "n_features": 8,
    "class_separation": 2.5,
    "include_redundant_pair": True,
}


def report_line(number: int, name: str, ok: bool, detail: str, capsys=None) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


def check_metric_reproduction() -> tuple[bool, str]:
    r = class_report(ConfusionMatrix(tp=83736, tn=87242, fp=3826, fn=320))
    got = {
        "0": tuple(round(v, 2) for v in (r.legit.precision, r.legit.recall, r.legit.f1)),
        "1": tuple(round(v, 2) for v in (r.fraud.precision, r.fraud.recall, r.fraud.f1)),
        "accuracy": round(r.accuracy, 2),
    }
    want = {"0": (1.00, 0.96, 0.98), "1": (0.96, 1.00, 0.98), "accuracy": 0.98}
    return got == want, f"rounded report {got}"


def check_smote_contract() -> tuple[bool, str]:
    ds = generate_synthetic(SynthSpec(2000, 0.023, 6, 2.0), RandomSource(2000))
    k = 5
    out, _ = smote(ds, SmoteConfig(k=k, target_ratio=1.0), RandomSource(1))
    n = ds.n_rows
    balanced = out.class_counts()[0] == out.class_counts()[1]
    majority_same = (
        out.features[:n].tobytes() == ds.features.tobytes()
        and out.labels[:n].tobytes() == ds.labels.tobytes()
    )
    P = ds.features[ds.labels == 1]
    neighbours = [knn_oracle_rows(P, i, k) for i in range(len(P))]
    failed = 0
    for j, s in enumerate(out.features[n:]):
        ok = False
        for x_i in range(len(P)):  # any minority pair may have produced it
            x = P[x_i]
            for z in P[neighbours[x_i]]:
                d = z - x
                nz = np.flatnonzero(d != 0)
                if nz.size == 0:
                    ok = np.array_equal(s, x)
                else:
                    u = (s[nz[0]] - x[nz[0]]) / d[nz[0]]
                    ok = 0.0 <= u < 1.0 and bool(np.all(np.abs(x + u * d - s) <= 1e-9))
                if ok:
                    break
            if ok:
                break
        failed += not ok
    n_syn = out.n_rows - n
    detail = (f"counts {out.class_counts()}, {n_syn - failed}/{n_syn} synthetic rows on a neighbour "
              f"segment, majority unchanged={majority_same}")
    return balanced and failed == 0 and majority_same, detail


def check_oracles() -> tuple[bool, str]:
    g = np.random.default_rng(31337)
    params = ForestParams(n_trees=1, max_features="all", bootstrap=False)
    tree_failures = 0
    for trial in range(200):
        X, y = random_small_dataset(g)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        ds = Dataset(tuple(f"x{i}" for i in range(X.shape[1])), X, y)
        tree = fit_forest(ds, params, RandomSource(trial)).trees[0]
        tree_failures += bool(check_tree_against_oracle(tree, X, y))
    worst = 0.0
    for _ in range(1000):
        n = int(g.integers(2, 201))
        y = g.integers(0, 2, n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        s = np.round(g.random(n), int(g.integers(1, 5)))
        worst = max(worst, abs(roc_curve(y, s).auc - mann_whitney_auc(y, s)))
    ok = tree_failures == 0 and worst <= 1e-12
    return ok, f"tree mismatches {tree_failures}/200, max |AUC - Mann-Whitney| = {worst:.1e}"


def _run(out: Path, doc: dict, *extra: str) -> dict:
    cfg = out.parent / f"{out.name}.json"
    cfg.write_text(json.dumps(doc, indent=2))
    code = main(["run", "--config", str(cfg), "--out", str(out), *extra])
    if code != 0:
        raise RuntimeError(f"run exited with {code}")
    return json.loads((out / "report.json").read_text())


def check_end_to_end(tmp: Path) -> tuple[bool, str]:
    start = time.perf_counter()
    # class separation is adequate when one full-capacity tree fits the training data
    ds = generate_synthetic(SynthSpec(**DESK_SYNTH), RandomSource(11).child("synth"))
    tree = fit_forest(ds, ForestParams(1, None, 2, "all", False), RandomSource(0))
    train_acc = float(np.mean(predict_labels(tree, ds.features) == ds.labels))

    safe = _run(tmp / "safe", {"synth": DESK_SYNTH, "grid": "default", "seed": 11}, "--threads", "1")
    paper = _run(tmp / "paper", {"synth": DESK_SYNTH, "params": {"n_trees": 100}, "seed": 11, "mode": "paper"},
                 "--threads", "1")
    elapsed = time.perf_counter() - start
    f1 = safe["evaluation"]["class_report"]["1"]["f1"]
    auc = safe["evaluation"]["auc"]
    acc = paper["evaluation"]["class_report"]["accuracy"]
    ok = (train_acc >= 0.99 and f1 >= 0.85 and auc >= 0.95 and acc >= 0.97
          and bool(paper["leakage_warning"]) and elapsed < 120)
    detail = (f"tree train acc {train_acc:.4f}; safe F1 {f1:.4f} AUC {auc:.4f} "
              f"(best {safe['tuning']['best_params']}); paper acc {acc:.4f} with leakage warning; "
              f"{elapsed:.1f}s")
    return ok, detail


def check_determinism(tmp: Path) -> tuple[bool, str]:
    start = time.perf_counter()
    doc = {"synth": DESK_SYNTH, "grid": "default", "seed": 5}
    dirs = {}
    for name, threads in (("a1", "1"), ("b1", "1"), ("c8", "8")):
        dirs[name] = tmp / f"det_{name}"
        _run(dirs[name], doc, "--threads", threads, "--no-timing")
    elapsed = time.perf_counter() - start
    same = {
        f: len({(d / f).read_bytes() for d in dirs.values()}) == 1
        for f in ("report.json", "roc.csv", "model.forest")
    }
    return all(same.values()) and elapsed < 240, f"identical across 1,1,8 threads: {same}; {elapsed:.1f}s"


def check_preprocessing_counts() -> tuple[bool, str]:
    start = time.perf_counter()
    base = generate_synthetic(SynthSpec(20000, 0.023, 6, 2.0), RandomSource(6))
    g = np.random.default_rng(6)
    copies = g.integers(0, base.n_rows, 5068)
    order = g.permutation(base.n_rows + 5068)
    seeded = base.take(np.r_[np.arange(base.n_rows), copies][order])
    cleaned, removed = dedup(seeded)
    split = stratified_split(cleaned, 0.3, RandomSource(7))
    counts = cleaned.class_counts()
    test_counts = split.test.class_counts()
    train_counts = split.train.class_counts()
    within = all(abs(test_counts[c] - 0.3 * counts[c]) < 1 and abs(train_counts[c] - 0.7 * counts[c]) < 1
                 for c in (0, 1))
    elapsed = time.perf_counter() - start
    def rows(d):
        return sorted(map(tuple, np.c_[d.features, d.labels].tolist()))

    ok = removed == 5068 and rows(cleaned) == rows(base) and within and elapsed < 5
    return ok, (f"removed {removed} of 5068 injected; class counts {counts}, test {test_counts}, "
                f"train {train_counts}; {elapsed:.2f}s")


def test_criterion_1_metric_reproduction(capsys):
    ok, detail = check_metric_reproduction()
    report_line(1, "metric reproduction", ok, detail, capsys)
    assert ok, detail


def test_criterion_2_smote_contract(capsys):
    start = time.perf_counter()
    ok, detail = check_smote_contract()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 5
    report_line(2, "SMOTE contract", ok, f"{detail}; {elapsed:.2f}s", capsys)
    assert ok, detail


def test_criterion_3_oracle_equivalence(capsys):
    start = time.perf_counter()
    ok, detail = check_oracles()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30
    report_line(3, "oracle equivalence", ok, f"{detail}; {elapsed:.1f}s", capsys)
    assert ok, detail


def test_criterion_4_end_to_end(tmp_path, capsys):
    ok, detail = check_end_to_end(tmp_path)
    report_line(4, "end-to-end desk-scale run", ok, detail, capsys)
    assert ok, detail


def test_criterion_5_determinism(tmp_path, capsys):
    ok, detail = check_determinism(tmp_path)
    report_line(5, "determinism", ok, detail, capsys)
    assert ok, detail


def test_criterion_6_preprocessing_counts(capsys):
    ok, detail = check_preprocessing_counts()
    report_line(6, "preprocessing counts", ok, detail, capsys)
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        results = [
            (1, "metric reproduction", *check_metric_reproduction()),
            (2, "SMOTE contract", *check_smote_contract()),
            (3, "oracle equivalence", *check_oracles()),
            (4, "end-to-end desk-scale run", *check_end_to_end(tmp)),
            (5, "determinism", *check_determinism(tmp)),
            (6, "preprocessing counts", *check_preprocessing_counts()),
        ]
    for number, name, ok, detail in results:
        report_line(number, name, ok, detail)
    sys.exit(0 if all(r[2] for r in results) else 1)

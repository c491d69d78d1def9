"""Command line entry point: ``imbalforest {synth,prepare,run,evaluate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_override
from .dataio import (
    TRANSACTION_SCHEMA,
    Dataset,
    Kind,
    generate_synthetic,
    is_processed_csv,
    load_csv,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, ImbalForestError
from .forest import (
    ForestModel,
    default_threads,
    fit_forest,
    load_model,
    predict_scores,
    save_model,
)
from .metrics import class_report, confusion, roc_curve
from .plots import confusion_svg, heatmap_svg, roc_svg
from .preprocess import (
    DEFAULT_DROP,
    dedup,
    drop_features,
    encode_labels,
    pearson_corr,
    stratified_split,
)
from .resample import smote
from .rng import RandomSource
from .tune import grid_search

log = logging.getLogger("imbalforest")

HEATMAP_FEATURES = ("Time1", "Time2", "TRN_AMT", "TOTAL_TRN_AMT")
LEAKAGE_WARNING = (
    "paper-faithful mode: SMOTE ran on the full dataset before the train/test split, "
    "so test rows include synthetic points interpolated from training rows; "
    "metrics are optimistic and not a held-out estimate"
)
WATERMARK = "paper-faithful mode (SMOTE before split): leaky evaluation"
DEFAULT_PARAMS_NOTE = [
    "selection metric: class-1 F1 (accuracy is uninformative under heavy imbalance)",
    "default grid n_trees {50,100,200} x max_depth {8,16,unlimited} x min_samples_split {2,10} x max_features {sqrt} (repo default)",
    "cross-validation: stratified k-fold with SMOTE inside training folds only, 5 folds by default",
    "test fraction default 0.3",
    "SMOTE k default 5, neighbours among minority rows only, base rows visited round-robin",
]


class Stopwatch:
    def __init__(self) -> None:
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = round(time.perf_counter() - start, 6)


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _counts(ds: Dataset) -> dict:
    n0, n1 = ds.class_counts()
    return {"0": n0, "1": n1}


# -- input handling -------------------------------------------------------------


def _split_drop(names: Sequence[str]) -> tuple[list[str], list[str]]:
    categorical = [n for n in names if n in TRANSACTION_SCHEMA.names and TRANSACTION_SCHEMA.kind(n) is Kind.CATEGORICAL]
    numeric = [n for n in names if n not in categorical]
    return categorical, numeric


def load_full_input(cfg: RunConfig) -> tuple[Dataset, str]:
    """Input as a numeric Dataset before any column dropping, plus its kind."""
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth, RandomSource(cfg.seed).child("synth")), "synthetic"
    if cfg.input is None:
        raise ConfigError("config needs either 'input' or 'synth'")
    if is_processed_csv(cfg.input):
        return load_dataset(cfg.input), "processed"
    raw = load_csv(cfg.input, TRANSACTION_SCHEMA)
    categorical = [n for n, k in raw.schema.columns if k is Kind.CATEGORICAL]
    drop = DEFAULT_DROP if cfg.drop is None else cfg.drop
    missing = [n for n in categorical if n not in drop]
    if missing:
        raise ConfigError(f"categorical column {missing[0]!r} must be in the drop list")
    return encode_labels(raw, drop=categorical), "raw"


def apply_drop(ds: Dataset, kind: str, cfg: RunConfig) -> Dataset:
    """Drop the configured numeric columns; raw categoricals are already gone."""
    if cfg.drop is None:
        drop = list(DEFAULT_DROP) if kind == "raw" else []
    else:
        drop = list(cfg.drop)
    if kind == "raw":
        drop = _split_drop(drop)[1]
    return drop_features(ds, drop)


def load_model_input(cfg: RunConfig) -> tuple[Dataset, str]:
    ds, kind = load_full_input(cfg)
    return apply_drop(ds, kind, cfg), kind


def _heatmap_subset(ds: Dataset, cfg: RunConfig) -> list[str]:
    if cfg.heatmap_features is not None:
        return list(cfg.heatmap_features)
    if all(n in ds.feature_names for n in HEATMAP_FEATURES):
        return list(HEATMAP_FEATURES)
    return list(ds.feature_names[-min(4, ds.n_features):])


# -- commands -------------------------------------------------------------------


def cmd_synth(cfg: RunConfig, out: Path) -> Path:
    if cfg.synth is None:
        raise ConfigError("synth needs a 'synth' section (n_rows, fraud_rate, ...)")
    ds = generate_synthetic(cfg.synth, RandomSource(cfg.seed).child("synth"))
    path = out / "synthetic.csv"
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, path)
    n0, n1 = ds.class_counts()
    print(f"wrote {path}: {ds.n_rows} rows, {n1} fraud, {n0} legitimate")
    return path


def cmd_prepare(cfg: RunConfig, out: Path) -> dict:
    full, kind = load_full_input(cfg)
    corr = pearson_corr(full, _heatmap_subset(full, cfg))
    processed = apply_drop(full, kind, cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(processed, out / "processed.csv")
    _write(out / "correlation.csv", corr.to_csv())
    _write(out / "heatmap.svg", heatmap_svg(corr, "Heat map of candidate redundant features"))
    summary = {
        "rows": processed.n_rows,
        "features": list(processed.feature_names),
        "class_counts": _counts(processed),
        "correlation_warnings": list(corr.warnings),
    }
    print(f"wrote {out / 'processed.csv'}: {processed.n_rows} rows x {processed.n_features} features")
    return summary


def evaluate_scores(y_true: np.ndarray, scores: np.ndarray, threshold: float) -> tuple[dict, object, object]:
    pred = (scores > threshold).astype(np.int8)
    cm = confusion(y_true, pred)
    report = class_report(cm)
    fragment = {
        "threshold": threshold,
        "evaluated_rows": int(len(y_true)),
        "confusion": cm.to_dict(),
        "class_report": report.to_dict(),
    }
    curve = None
    if 0 < int(np.sum(y_true)) < len(y_true):
        curve = roc_curve(y_true, scores)
        fragment["auc"] = curve.auc
    else:
        fragment["auc"] = None
    return fragment, cm, curve


def run_pipeline(cfg: RunConfig, threads: int = 1, timing: bool = True) -> tuple[dict, ForestModel, object, object, object]:
    """Execute the full run and return (report, model, roc curve, confusion, tuning)."""
    clock = Stopwatch()
    root = RandomSource(cfg.seed)
    paper = cfg.mode == "paper"
    if cfg.grid is None and cfg.params is None:
        raise ConfigError("run needs either 'grid' or 'params'")

    with clock.stage("load"):
        ds, kind = load_model_input(cfg)
    dataset_stats = {"source": kind, "rows": ds.n_rows, "features": list(ds.feature_names),
                     "class_counts": _counts(ds)}
    n0, n1 = ds.class_counts()
    dataset_stats["fraud_fraction"] = n1 / ds.n_rows if ds.n_rows else 0.0
    dataset_stats["imbalance_ratio"] = (max(n0, n1) / min(n0, n1)) if min(n0, n1) else None

    if paper:
        with clock.stage("resample"):
            resampled, resample_report = smote(ds, cfg.smote, root.child("smote"))
        with clock.stage("dedup"):
            work, removed = dedup(resampled)
        dataset_stats["resampled_rows"] = resampled.n_rows
    else:
        with clock.stage("dedup"):
            work, removed = dedup(ds)
    dataset_stats["duplicates_removed"] = removed

    with clock.stage("split"):
        split = stratified_split(work, cfg.test_fraction, root.child("split"))

    if paper:
        fit_data = split.train
    else:
        with clock.stage("resample"):
            fit_data, resample_report = smote(split.train, cfg.smote, root.child("smote"))

    tuning = None
    params = cfg.params
    if cfg.grid is not None:
        with clock.stage("tune"):
            tuning = grid_search(split.train, cfg.grid, cfg.cv_folds, root.child("tune"),
                                 cfg.smote, threads=threads)
        params = tuning.best_params

    with clock.stage("fit"):
        model = fit_forest(fit_data, params, root.child("fit"), threads=threads)
    model = ForestModel(model.trees, model.params, model.feature_names, model.train_seed,
                        {"mode": cfg.mode, "toolkit_version": __version__})

    with clock.stage("evaluate"):
        scores = predict_scores(model, split.test.features)
        evaluation, cm, curve = evaluate_scores(split.test.labels, scores, cfg.threshold)

    train_rows = set(split.train_index.tolist())
    test_rows = set(split.test_index.tolist())
    report: dict = {
        "toolkit": {"name": "imbalforest", "version": __version__},
        "command": "run",
        "seed": cfg.seed,
        "mode": cfg.mode,
        "leakage_warning": LEAKAGE_WARNING if paper else None,
        "config": cfg.echo(),
        "implementer_decisions": DEFAULT_PARAMS_NOTE,
        "dataset": dataset_stats,
        "split": {
            "test_fraction": cfg.test_fraction,
            "train_rows": split.train.n_rows,
            "test_rows": split.test.n_rows,
            "train_class_counts": _counts(split.train),
            "test_class_counts": _counts(split.test),
        },
        "resample": resample_report.to_dict(),
    }
    if tuning is not None:
        report["tuning"] = tuning.to_dict()
    report["model"] = {
        "params": model.params.to_dict(),
        "total_nodes": int(sum(t.n_nodes for t in model.trees)),
    }
    report["evaluation"] = evaluation
    report["audit"] = {
        "test_rows_in_training": len(train_rows & test_rows),
        "smote_input_rows": split.train.n_rows if not paper else work.n_rows,
        "smote_saw_test_rows": paper,
    }
    if timing:
        report["timing"] = clock.stages
    return report, model, curve, cm, tuning


def cmd_run(cfg: RunConfig, out: Path, threads: int = 1, timing: bool = True) -> dict:
    report, model, curve, cm, tuning = run_pipeline(cfg, threads=threads, timing=timing)
    mark = WATERMARK if cfg.mode == "paper" else None
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "report.json", _dump_json(report))
    save_model(model, out / "model.forest")
    _write(out / "confusion.svg", confusion_svg(cm, watermark=mark))
    if curve is not None:
        _write(out / "roc.csv", curve.to_csv())
        _write(out / "roc.svg", roc_svg(curve, watermark=mark))
    if tuning is not None:
        _write(out / "tuning.csv", tuning.to_csv())
    ev = report["evaluation"]
    print(f"mode={cfg.mode} accuracy={ev['class_report']['accuracy']:.4f} "
          f"f1(fraud)={ev['class_report']['1']['f1']} auc={ev['auc']}")
    if cfg.mode == "paper":
        print(f"warning: {LEAKAGE_WARNING}", file=sys.stderr)
    return report


def check_feature_names(model: ForestModel, ds: Dataset) -> None:
    for i, (a, b) in enumerate(zip(model.feature_names, ds.feature_names)):
        if a != b:
            raise ImbalForestError(
                f"feature-name mismatch at column {i}: model has {a!r}, dataset has {b!r}"
            )
    if len(model.feature_names) != len(ds.feature_names):
        longer = model.feature_names if len(model.feature_names) > len(ds.feature_names) else ds.feature_names
        i = min(len(model.feature_names), len(ds.feature_names))
        raise ImbalForestError(f"feature-name mismatch at column {i}: {longer[i]!r} has no counterpart")


def cmd_evaluate(model_path: Path, data_path: Path, threshold: float, out: Path | None = None) -> dict:
    model = load_model(model_path)
    if is_processed_csv(data_path):
        ds = load_dataset(data_path)
    else:
        ds = load_model_input(RunConfig(input=str(data_path)))[0]
    check_feature_names(model, ds)
    scores = predict_scores(model, ds.features)
    fragment, cm, curve = evaluate_scores(ds.labels, scores, threshold)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "evaluation.json", _dump_json(fragment))
        _write(out / "confusion.svg", confusion_svg(cm))
        if curve is not None:
            _write(out / "roc.csv", curve.to_csv())
            _write(out / "roc.svg", roc_svg(curve))
    print(class_report(cm).table())
    if fragment["auc"] is not None:
        print(f"AUC = {fragment['auc']:.4f}")
    return fragment


# -- argument parsing -------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--mode", choices=("safe", "paper"), help="leakage-safe (default) or paper-faithful")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $IMBALFOREST_THREADS or 1)")
    p.add_argument("--no-timing", action="store_true", help="omit timing from the report")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set smote.k=3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imbalforest", description=__doc__)
    parser.add_argument("--version", action="version", version=f"imbalforest {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "generate a synthetic imbalanced dataset"),
        ("prepare", "clean raw transactions and draw the correlation heatmap"),
        ("run", "split, resample, tune, fit and evaluate"),
        ("evaluate", "score a saved model on a dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "evaluate":
            p.add_argument("--model", type=Path, required=True)
            p.add_argument("--data", type=Path, required=True)
            p.add_argument("--threshold", type=float, default=0.5)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = args.threads if args.threads is not None else default_threads()
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "evaluate":
            cmd_evaluate(args.model, args.data, args.threshold, args.out)
            return 0
        overrides = [parse_override(item) for item in args.overrides]
        if args.seed is not None:
            overrides.append(("seed", args.seed))
        if args.mode is not None:
            overrides.append(("mode", args.mode))
        cfg = load_config(args.config, overrides)
        if args.command == "synth":
            cmd_synth(cfg, args.out)
        elif args.command == "prepare":
            cmd_prepare(cfg, args.out)
        else:
            cmd_run(cfg, args.out, threads=threads, timing=not args.no_timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ImbalForestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

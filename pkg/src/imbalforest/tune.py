"""Grid search over forest hyperparameters with stratified k-fold CV."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataio import Dataset
from .errors import ImbalForestError
from .forest import ForestParams, MaxFeatures, fit_forest, predict_labels
from .metrics import class_report, confusion
from .resample import SmoteConfig, smote
from .rng import RandomSource

DEFAULT_FOLDS = 5


@dataclass(frozen=True)
class ParamGrid:
    n_trees: tuple[int, ...] = (50, 100, 200)
    max_depth: tuple[int | None, ...] = (8, 16, None)
    min_samples_split: tuple[int, ...] = (2, 10)
    max_features: tuple[MaxFeatures, ...] = ("sqrt",)
    bootstrap: bool = True

    def __post_init__(self) -> None:
        for name in ("n_trees", "max_depth", "min_samples_split", "max_features"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"grid list {name!r} is empty")
            object.__setattr__(self, name, values)

    def combinations(self) -> list[ForestParams]:
        """Cartesian product in field order, last field varying fastest."""
        return [
            ForestParams(n, d, s, f, self.bootstrap)
            for n, d, s, f in itertools.product(
                self.n_trees, self.max_depth, self.min_samples_split, self.max_features
            )
        ]

    def __len__(self) -> int:
        return len(self.n_trees) * len(self.max_depth) * len(self.min_samples_split) * len(self.max_features)

    def to_dict(self) -> dict:
        return {
            "n_trees": list(self.n_trees),
            "max_depth": list(self.max_depth),
            "min_samples_split": list(self.min_samples_split),
            "max_features": list(self.max_features),
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ParamGrid:
        d = dict(d)
        for key in ("n_trees", "max_depth", "min_samples_split", "max_features"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class TuningRow:
    params: ForestParams
    mean_f1: float
    fold_f1s: tuple[float, ...]


@dataclass(frozen=True)
class TuningResult:
    best_params: ForestParams
    best_score: float
    table: tuple[TuningRow, ...]
    folds: int
    audit: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best_params": self.best_params.to_dict(),
            "best_score": self.best_score,
            "folds": self.folds,
            "selection_metric": "f1 of class 1 (fraud), mean over folds",
            "table": [
                {"params": r.params.to_dict(), "mean_f1": r.mean_f1, "fold_f1s": list(r.fold_f1s)}
                for r in self.table
            ],
            "audit": self.audit,
        }

    def to_csv(self) -> str:
        lines = ["combination,n_trees,max_depth,min_samples_split,max_features,fold,f1"]
        for ci, row in enumerate(self.table):
            p = row.params
            depth = "unlimited" if p.max_depth is None else str(p.max_depth)
            for fi, f1 in enumerate(row.fold_f1s):
                lines.append(
                    f"{ci},{p.n_trees},{depth},{p.min_samples_split},{p.max_features},{fi},{f1!r}"
                )
        return "\n".join(lines) + "\n"


def stratified_kfold(labels: Dataset | Sequence[int] | np.ndarray, k: int, rng: RandomSource) -> list[np.ndarray]:
    """Partition row indices into ``k`` validation folds with balanced classes.

    Each class is shuffled and dealt round-robin; the second class continues
    dealing where the first stopped so total fold sizes also stay within 1-2.
    """
    y = labels.labels if isinstance(labels, Dataset) else np.asarray(labels)
    if k < 2:
        raise ImbalForestError(f"need at least 2 folds, got {k}")
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in (0, 1):
        members = np.flatnonzero(y == c)
        if len(members) < k:
            raise ImbalForestError(f"class {c} has {len(members)} rows, fewer than k={k} folds")
        shuffled = rng.child("class", c).generator().permutation(members)
        for i, idx in enumerate(shuffled.tolist()):
            folds[(offset + i) % k].append(idx)
        offset = (offset + len(members)) % k
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def _fold_f1(train: Dataset, valid: Dataset, params: ForestParams, smote_cfg: SmoteConfig,
             cell: RandomSource, threads: int) -> float:
    resampled, _ = smote(train, smote_cfg, cell.child("smote"))
    model = fit_forest(resampled, params, cell.child("fit"), threads=threads)
    cm = confusion(valid.labels, predict_labels(model, valid.features))
    f1 = class_report(cm).fraud.f1
    return 0.0 if f1 is None else f1


def _rank_key(ci: int, row: TuningRow) -> tuple:
    depth = float("inf") if row.params.max_depth is None else row.params.max_depth
    return (-row.mean_f1, row.params.n_trees, depth, ci)


def grid_search(
    train: Dataset,
    grid: ParamGrid,
    k: int,
    rng: RandomSource,
    smote_cfg: SmoteConfig = SmoteConfig(),
    threads: int = 1,
) -> TuningResult:
    """Score every grid combination by mean validation F1 of the fraud class.

    SMOTE runs on the training folds only; validation folds stay original
    rows. Cell ``(c, f)`` draws from ``rng.child("cell", c, f)``. Ties go to
    fewer trees, then shallower depth, then grid order.
    """
    folds = stratified_kfold(train, k, rng.child("folds"))
    all_idx = np.arange(train.n_rows)
    combos = grid.combinations()
    rows: list[TuningRow] = []
    validated: set[int] = set()
    for ci, params in enumerate(combos):
        scores = []
        for fi, valid_idx in enumerate(folds):
            train_idx = np.setdiff1d(all_idx, valid_idx, assume_unique=True)
            validated.update(valid_idx.tolist())
            scores.append(
                _fold_f1(train.take(train_idx), train.take(valid_idx), params, smote_cfg,
                         rng.child("cell", ci, fi), threads)
            )
        rows.append(TuningRow(params, float(np.mean(scores)), tuple(scores)))
    best_ci = min(range(len(rows)), key=lambda ci: _rank_key(ci, rows[ci]))
    audit = {
        "validation_rows": len(validated),
        "validation_rows_not_original": len(validated - set(all_idx.tolist())),
    }
    return TuningResult(rows[best_ci].params, rows[best_ci].mean_f1, tuple(rows), k, audit)

"""Cleaning steps: correlation, column dropping, label encoding, dedup, splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, overload

import numpy as np

from ._util import exact, round_half_up
from .dataio import FRAUD, LEGIT, Dataset, Kind, RawDataset, RawSchema
from .errors import ImbalForestError, SchemaError
from .rng import RandomSource

log = logging.getLogger(__name__)

DEFAULT_DROP = ("DOMAIN", "STATE", "TOTAL_TRN_AMT")
DEFAULT_TEST_FRACTION = 0.3
LABEL_CODES = {LEGIT: 0, FRAUD: 1}


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    names: tuple[str, ...]
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    def value(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])

    def to_csv(self) -> str:
        lines = [",".join([""] + list(self.names))]
        for name, row in zip(self.names, self.values.tolist()):
            lines.append(",".join([name] + [repr(v) for v in row]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    test_fraction: float
    train_index: np.ndarray
    test_index: np.ndarray


def pearson_corr(ds: Dataset, feature_subset: Sequence[str]) -> CorrMatrix:
    """Pairwise Pearson coefficients over ``feature_subset``.

    A zero-variance column correlates 0 with everything else (1 with itself)
    and adds an entry to ``warnings``.
    """
    names = tuple(feature_subset)
    if not names:
        raise ImbalForestError("feature subset is empty")
    unknown = [n for n in names if n not in ds.feature_names]
    if unknown:
        raise ImbalForestError(f"unknown feature name {unknown[0]!r}")
    if ds.n_rows < 2:
        raise ImbalForestError("correlation needs at least 2 rows")
    cols = [ds.feature_names.index(n) for n in names]
    Z = ds.features[:, cols] - ds.features[:, cols].mean(axis=0)
    ss = np.einsum("ij,ij->j", Z, Z)
    warnings = tuple(f"zero variance: {n}" for n, s in zip(names, ss) if s == 0.0)
    for w in warnings:
        log.warning("pearson_corr %s", w)
    k = len(names)
    R = np.zeros((k, k))
    for i in range(k):
        R[i, i] = 1.0
        for j in range(i + 1, k):
            if ss[i] == 0.0 or ss[j] == 0.0:
                r = 0.0
            else:
                r = float(Z[:, i] @ Z[:, j]) / float(np.sqrt(ss[i] * ss[j]))
                r = min(1.0, max(-1.0, r))
            R[i, j] = R[j, i] = r
    R.setflags(write=False)
    return CorrMatrix(names, R, warnings)


def _check_drop_names(available: Sequence[str], names: Sequence[str]) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise ImbalForestError(f"duplicate drop name {name!r}")
        seen.add(name)
        if name not in available:
            raise ImbalForestError(f"cannot drop unknown column {name!r}")


@overload
def drop_features(ds: Dataset, names: Sequence[str]) -> Dataset: ...
@overload
def drop_features(ds: RawDataset, names: Sequence[str]) -> RawDataset: ...


def drop_features(ds, names):
    """Remove the named columns, keeping the others in order.

    Works on raw rows (before label encoding) and on numeric datasets.
    """
    names = list(names)
    if isinstance(ds, RawDataset):
        _check_drop_names(ds.schema.names, names)
        if ds.schema.label_name in names:
            raise ImbalForestError(f"cannot drop the label column {ds.schema.label_name!r}")
        keep = [j for j, n in enumerate(ds.schema.names) if n not in names]
        schema = RawSchema(tuple(ds.schema.columns[j] for j in keep))
        rows = tuple(tuple(row[j] for j in keep) for row in ds.rows)
        return RawDataset(schema, rows)
    _check_drop_names(ds.feature_names, names)
    keep = [j for j, n in enumerate(ds.feature_names) if n not in names]
    return Dataset(
        tuple(ds.feature_names[j] for j in keep), ds.features[:, keep], ds.labels
    )


def encode_labels(raw: RawDataset, drop: Sequence[str] = ()) -> Dataset:
    """Map LEGIT/FRAUD to 0/1 and return the numeric columns as a Dataset.

    Columns in ``drop`` are removed first. Any categorical column left after
    that is an error, since it cannot be modeled.
    """
    if drop:
        raw = drop_features(raw, drop)
    schema = raw.schema
    text_cols = [n for n, k in schema.columns if k is Kind.CATEGORICAL]
    if text_cols:
        raise SchemaError(f"categorical column {text_cols[0]!r} must be dropped before encoding")
    label_j = schema.names.index(schema.label_name)
    feat_js = [j for j in range(schema.n_columns) if j != label_j]
    labels = np.empty(raw.n_rows, dtype=np.int8)
    for i, row in enumerate(raw.rows):
        value = row[label_j]
        try:
            labels[i] = LABEL_CODES[value]  # type: ignore[index]
        except KeyError:
            raise ImbalForestError(
                f"row {i}: unknown label value {value!r} (expected {LEGIT!r} or {FRAUD!r})"
            ) from None
    X = np.array([[row[j] for j in feat_js] for row in raw.rows], dtype=np.float64)
    X = X.reshape(raw.n_rows, len(feat_js))
    return Dataset(tuple(schema.names[j] for j in feat_js), X, labels)


def unique_row_index(ds: Dataset) -> np.ndarray:
    """Indices of first occurrences of each distinct (features, label) row."""
    seen: set[bytes] = set()
    keep: list[int] = []
    X, y = ds.features, ds.labels
    for i in range(ds.n_rows):
        key = X[i].tobytes() + y[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return np.array(keep, dtype=np.intp)


def dedup(ds: Dataset) -> tuple[Dataset, int]:
    keep = unique_row_index(ds)
    return ds.take(keep), ds.n_rows - len(keep)


def allocate_test_counts(counts: Sequence[int], test_fraction: float) -> list[int]:
    """Per-class test sizes: round-half-up each minority class, majority takes the rest."""
    f = exact(test_fraction)
    total = round_half_up(f * sum(counts))
    majority = max(range(len(counts)), key=lambda c: (counts[c], -c))
    alloc = [round_half_up(f * n) for n in counts]
    alloc[majority] = total - sum(a for c, a in enumerate(alloc) if c != majority)
    return alloc


def stratified_split(ds: Dataset, test_fraction: float, rng: RandomSource) -> SplitResult:
    if not 0.0 < test_fraction < 1.0:
        raise ImbalForestError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    counts = ds.class_counts()
    for c, n in enumerate(counts):
        if n < 2:
            raise ImbalForestError(f"class {c} has {n} rows; stratified split needs at least 2")
    alloc = allocate_test_counts(counts, test_fraction)
    test_parts = []
    for c in (0, 1):
        members = np.flatnonzero(ds.labels == c)
        chosen = rng.child("class", c).generator().permutation(members)[: alloc[c]]
        test_parts.append(chosen)
    test_index = np.sort(np.concatenate(test_parts))
    mask = np.ones(ds.n_rows, dtype=bool)
    mask[test_index] = False
    train_index = np.flatnonzero(mask)
    return SplitResult(
        train=ds.take(train_index),
        test=ds.take(test_index),
        test_fraction=test_fraction,
        train_index=train_index,
        test_index=test_index,
    )

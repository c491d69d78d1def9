"""Transaction CSV ingestion, synthetic data, and processed-dataset files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import exact, round_half_up
from .errors import DatasetFormatError, ParseError, SchemaError
from .rng import RandomSource

LEGIT = "LEGIT"
FRAUD = "FRAUD"


class Kind(str, Enum):
    CATEGORICAL = "categorical-text"
    NUMERIC = "numeric"
    LABEL = "label"


@dataclass(frozen=True)
class RawSchema:
    columns: tuple[tuple[str, Kind], ...]

    def __post_init__(self) -> None:
        cols = tuple((str(n), Kind(k)) for n, k in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [n for n, _ in cols]
        if not names:
            raise SchemaError("schema has no columns")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate column names: {dupes}")
        n_labels = sum(1 for _, k in cols if k is Kind.LABEL)
        if n_labels != 1:
            raise SchemaError(f"schema needs exactly one label column, found {n_labels}")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def label_name(self) -> str:
        return next(n for n, k in self.columns if k is Kind.LABEL)

    def kind(self, name: str) -> Kind:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"unknown column {name!r}")


TRANSACTION_SCHEMA = RawSchema(
    (("DOMAIN", Kind.CATEGORICAL), ("STATE", Kind.CATEGORICAL))
    + tuple(
        (name, Kind.NUMERIC)
        for name in ["ZIP CODE", "Time1", "Time2", "VIS1", "VIS2"]
        + [f"XRN{i}" for i in range(1, 6)]
        + [f"VAR{i}" for i in range(1, 6)]
        + ["TRN_AMT", "TOTAL_TRN_AMT"]
    )
    + (("TRN_TYPE", Kind.LABEL),)
)


@dataclass(frozen=True)
class RawDataset:
    """Parsed raw rows. Numeric cells are floats, the rest stay text."""

    schema: RawSchema
    rows: tuple[tuple[str | float, ...], ...]

    def __post_init__(self) -> None:
        width = self.schema.n_columns
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ParseError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str | float]:
        j = self.schema.names.index(name)
        return [row[j] for row in self.rows]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Numeric features plus a 0/1 label per row. Arrays are read-only."""

    feature_names: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.feature_names)
        X = np.array(self.features, dtype=np.float64, order="C")
        y = np.array(self.labels, dtype=np.int8).reshape(-1)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(len(y), len(names))
        if X.ndim != 2:
            raise DatasetFormatError(f"features must be 2-D, got shape {X.shape}")
        if X.shape != (len(y), len(names)):
            raise DatasetFormatError(
                f"features shape {X.shape} does not match {len(y)} labels x {len(names)} names"
            )
        if len(set(names)) != len(names):
            raise DatasetFormatError("feature names must be unique")
        if not np.all(np.isfinite(X)):
            raise DatasetFormatError("features contain non-finite values")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise DatasetFormatError("invalid label: labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(np.count_nonzero(self.labels))
        return self.n_rows - n1, n1

    def take(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.feature_names, self.features[idx], self.labels[idx])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and self.labels.tobytes() == other.labels.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int
    fraud_rate: float
    n_features: int = 10
    class_separation: float = 2.0
    include_redundant_pair: bool = False

    def __post_init__(self) -> None:
        if self.n_rows < 1:
            raise ValueError("n_rows must be positive")
        if not 0.0 < self.fraud_rate < 1.0:
            raise ValueError("fraud_rate must lie in (0, 1)")
        if self.n_features < 1:
            raise ValueError("n_features must be positive")
        if self.include_redundant_pair and self.n_features < 2:
            raise ValueError("include_redundant_pair needs n_features >= 2")
        if not (self.class_separation >= 0.0 and math.isfinite(self.class_separation)):
            raise ValueError("class_separation must be a finite nonnegative real")
        if self.n_fraud < 1:
            raise ValueError(
                f"round({self.n_rows} x {self.fraud_rate}) = 0 fraud rows; raise n_rows or fraud_rate"
            )

    @property
    def n_fraud(self) -> int:
        return round_half_up(exact(self.fraud_rate) * self.n_rows)


def _parse_number(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("non-finite")
    return value


def load_csv(path: str | Path, schema: RawSchema = TRANSACTION_SCHEMA) -> RawDataset:
    """Read a raw transaction CSV whose header must match ``schema`` exactly."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    kinds = [k for _, k in schema.columns]
    names = schema.names
    rows: list[tuple[str | float, ...]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file, expected a header line")
        header = [h.strip() for h in header]
        for j, expected in enumerate(names):
            got = header[j] if j < len(header) else None
            if got != expected:
                raise SchemaError(
                    f"{path}: header column {j + 1} is {got!r}, expected {expected!r}"
                )
        if len(header) > len(names):
            raise SchemaError(f"{path}: unexpected extra header column {header[len(names)]!r}")
        for cells in reader:
            line = reader.line_num
            if not cells:
                continue
            if len(cells) != len(names):
                raise ParseError(
                    f"{path}: line {line} has {len(cells)} cells, expected {len(names)}"
                )
            parsed: list[str | float] = []
            for name, kind, cell in zip(names, kinds, cells):
                if kind is Kind.NUMERIC:
                    try:
                        parsed.append(_parse_number(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}: line {line}, column {name}: cannot parse {cell!r} as a finite number"
                        ) from None
                else:
                    parsed.append(cell.strip())
            rows.append(tuple(parsed))
    return RawDataset(schema, tuple(rows))


def generate_synthetic(spec: SynthSpec, rng: RandomSource) -> Dataset:
    """Two spherical Gaussian classes, fraud mean shifted by ``class_separation``.

    Exactly ``spec.n_fraud`` rows are labeled 1, at uniformly random positions.
    With ``include_redundant_pair`` the last column copies the one before it
    plus noise at 1% of that column's standard deviation.
    """
    n, p = spec.n_rows, spec.n_features
    g = rng.generator()
    labels = np.zeros(n, dtype=np.int8)
    labels[g.permutation(n)[: spec.n_fraud]] = 1
    n_base = p - 1 if spec.include_redundant_pair else p
    X = g.standard_normal((n, p))
    X[:, :n_base] += spec.class_separation * labels[:, None]
    if spec.include_redundant_pair:
        src = X[:, n_base - 1]
        X[:, n_base] = src + 0.01 * src.std() * g.standard_normal(n)
    names = tuple(f"V{i + 1}" for i in range(p))
    return Dataset(names, X, labels)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` as ``f:<name>,...,label`` CSV with round-trippable reals."""
    for name in ds.feature_names:
        if any(ch in name for ch in ",\n\r\""):
            raise DatasetFormatError(f"feature name {name!r} cannot be written to CSV")
    lines = [",".join([f"f:{n}" for n in ds.feature_names] + ["label"])]
    for row, label in zip(ds.features.tolist(), ds.labels.tolist()):
        lines.append(",".join([repr(v) for v in row] + [str(label)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def is_processed_csv(path: str | Path) -> bool:
    with Path(path).open(encoding="utf-8") as fh:
        return fh.readline().startswith("f:")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n").split(",")
        if header[-1] != "label" or not all(h.startswith("f:") for h in header[:-1]):
            raise DatasetFormatError(
                f"{path}: header must be 'f:<name>,...,label' (unrecognised format)"
            )
        names = tuple(h[2:] for h in header[:-1])
        width = len(header)
        X: list[list[float]] = []
        y: list[int] = []
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != width:
                raise DatasetFormatError(
                    f"{path}: line {line_no} has {len(cells)} cells, expected {width}"
                )
            try:
                X.append([float(c) for c in cells[:-1]])
            except ValueError:
                raise DatasetFormatError(f"{path}: line {line_no}: unparseable value") from None
            if cells[-1] not in ("0", "1"):
                raise DatasetFormatError(
                    f"{path}: line {line_no}: invalid label {cells[-1]!r}"
                )
            y.append(int(cells[-1]))
    features = np.array(X, dtype=np.float64).reshape(len(y), len(names))
    return Dataset(names, features, np.array(y, dtype=np.int8))

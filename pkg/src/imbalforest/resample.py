"""SMOTE oversampling over minority-class nearest neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import ceil_exact, exact
from .dataio import Dataset
from .errors import ImbalForestError
from .rng import RandomSource


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    target_ratio: float = 1.0

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError(f"target_ratio must lie in (0, 1], got {self.target_ratio}")


@dataclass(frozen=True)
class ResampleReport:
    original_counts: tuple[int, int]  # (majority, minority)
    final_counts: tuple[int, int]
    synthetic_rows_added: int
    minority_class: int

    def to_dict(self) -> dict:
        return {
            "minority_class": self.minority_class,
            "original_counts": {"majority": self.original_counts[0], "minority": self.original_counts[1]},
            "final_counts": {"majority": self.final_counts[0], "minority": self.final_counts[1]},
            "synthetic_rows_added": self.synthetic_rows_added,
        }


def knn_indices(points: np.ndarray, query_index: int, k: int) -> list[int]:
    """The ``k`` rows nearest to row ``query_index`` (itself excluded).

    Ordered by (Euclidean distance, row index); ties go to the lower index.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if k < 1 or k >= n:
        raise ImbalForestError(f"k={k} needs 1 <= k < n_rows={n}")
    diff = points - points[query_index]
    d2 = np.einsum("ij,ij->i", diff, diff)
    d2[query_index] = np.inf
    order = np.lexsort((np.arange(n), d2))
    return order[:k].tolist()


def smote(ds: Dataset, cfg: SmoteConfig, rng: RandomSource) -> tuple[Dataset, ResampleReport]:
    """Append synthetic minority rows until minority >= ceil(target_ratio * majority).

    Base rows are taken round-robin in index order. For each one a neighbour is
    picked uniformly among its ``cfg.k`` nearest minority rows and the new row
    is ``base + u * (neighbour - base)`` with ``u ~ U[0, 1)``. All neighbour
    choices are drawn first, then all ``u`` values, from ``rng``.
    """
    n0, n1 = ds.class_counts()
    if n0 == 0 or n1 == 0:
        raise ImbalForestError("smote needs both classes present")
    minority_class = 1 if n1 < n0 else 0
    n_min, n_maj = min(n0, n1), max(n0, n1)
    target = ceil_exact(exact(cfg.target_ratio) * n_maj)
    n_syn = target - n_min
    if n_syn <= 0:
        report = ResampleReport((n_maj, n_min), (n_maj, n_min), 0, minority_class)
        return ds, report
    if n_min <= cfg.k:
        raise ImbalForestError(
            f"minority class has {n_min} rows but k={cfg.k}; lower k below {n_min} or gather more minority rows"
        )

    min_idx = np.flatnonzero(ds.labels == minority_class)
    P = ds.features[min_idx]
    bases = np.arange(n_syn) % n_min
    g = rng.generator()
    pick = g.integers(0, cfg.k, size=n_syn)
    u = g.random(n_syn)

    neighbors = np.empty((min(n_min, n_syn), cfg.k), dtype=np.intp)
    for b in range(neighbors.shape[0]):
        neighbors[b] = knn_indices(P, b, cfg.k)
    base_rows = P[bases]
    other_rows = P[neighbors[bases, pick]]
    synthetic = base_rows + u[:, None] * (other_rows - base_rows)

    X = np.vstack([ds.features, synthetic])
    y = np.concatenate([ds.labels, np.full(n_syn, minority_class, dtype=np.int8)])
    report = ResampleReport((n_maj, n_min), (n_maj, n_min + n_syn), n_syn, minority_class)
    return Dataset(ds.feature_names, X, y), report

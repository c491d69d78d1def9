"""Gini decision trees and bagged random forests with vote-fraction scores."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .dataio import Dataset
from .errors import ImbalForestError, ModelFormatError
from .rng import RandomSource

MODEL_FORMAT = "imbalforest-forest"
MODEL_VERSION = 1

MaxFeatures = Union[str, int]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None  # None = unlimited
    min_samples_split: int = 2
    max_features: MaxFeatures = "sqrt"
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        mf = self.max_features
        if isinstance(mf, bool) or not (mf in ("sqrt", "all") or (isinstance(mf, int) and mf >= 1)):
            raise ValueError(f"max_features must be 'sqrt', 'all' or a positive integer, got {mf!r}")

    def n_candidate_features(self, p: int) -> int:
        if self.max_features == "sqrt":
            return max(1, math.isqrt(p))
        if self.max_features == "all":
            return p
        if self.max_features > p:
            raise ImbalForestError(f"max_features={self.max_features} exceeds {p} features")
        return int(self.max_features)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ForestParams:
        return cls(**d)


@dataclass(frozen=True)
class Leaf:
    class_counts: tuple[int, int]


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; node 0 is the root and ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n0: np.ndarray
    n1: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def node(self, i: int = 0) -> TreeNode:
        if self.feature[i] < 0:
            return Leaf((int(self.n0[i]), int(self.n1[i])))
        return Split(
            int(self.feature[i]),
            float(self.threshold[i]),
            self.node(int(self.left[i])),
            self.node(int(self.right[i])),
        )

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            if self.feature[i] < 0:
                best = max(best, d)
            else:
                stack += [(int(self.left[i]), d + 1), (int(self.right[i]), d + 1)]
        return best

    def leaf_for(self, row: np.ndarray) -> int:
        i = 0
        while self.feature[i] >= 0:
            i = int(self.left[i] if row[self.feature[i]] <= self.threshold[i] else self.right[i])
        return i

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "n0", "n1")
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    feature_names: tuple[str, ...]
    train_seed: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.trees) != self.params.n_trees:
            raise ImbalForestError(
                f"model has {len(self.trees)} trees but params say {self.params.n_trees}"
            )
        p = len(self.feature_names)
        for t in self.trees:
            if t.n_nodes and int(t.feature.max()) >= p:
                raise ImbalForestError("tree references a feature index beyond the feature count")
        offsets = np.zeros(len(self.trees) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([t.n_nodes for t in self.trees])
        packed = {
            "offsets": offsets,
            "feature": np.concatenate([t.feature for t in self.trees]).astype(np.int64),
            "threshold": np.concatenate([t.threshold for t in self.trees]).astype(np.float64),
            "left": np.concatenate([t.left for t in self.trees]).astype(np.int64),
            "right": np.concatenate([t.right for t in self.trees]).astype(np.int64),
            # leaf tie votes legitimate
            "vote": np.concatenate([(t.n1 > t.n0) for t in self.trees]).astype(np.int64),
        }
        object.__setattr__(self, "_packed", packed)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ForestModel):
            return NotImplemented
        return (
            self.params == other.params
            and self.feature_names == other.feature_names
            and self.train_seed == other.train_seed
            and self.trees == other.trees
        )

    __hash__ = None  # type: ignore[assignment]


def gini(counts: Sequence[float]) -> float:
    n0, n1 = counts
    if n0 < 0 or n1 < 0 or n0 + n1 < 1:
        raise ImbalForestError(f"gini of an empty node {tuple(counts)}")
    return float(_kernels.gini_counts(float(n0), float(n1)))


def _presort(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_subset: Sequence[int],
    weights: np.ndarray | None = None,
) -> tuple[int, float, float] | None:
    """Best Gini split of the given rows over ``feature_subset``.

    Thresholds are midpoints between consecutive distinct values and rows with
    ``value <= threshold`` go left. Ties prefer the lower feature index, then
    the lower threshold. ``None`` when no split lowers the impurity.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int8)
    if X.shape[0] < 2:
        return None
    subset = np.array(sorted(set(int(f) for f in feature_subset)), dtype=np.int64)
    if subset.size == 0:
        raise ImbalForestError("feature subset is empty")
    w = np.ones(len(y), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
    present = np.flatnonzero(w > 0)
    orders = np.ascontiguousarray(
        present[np.argsort(X[present], axis=0, kind="stable").T], dtype=np.int64
    )
    c1 = float(w[y == 1].sum())
    c0 = float(w[y == 0].sum())
    if c0 == 0 or c1 == 0:
        return None
    Xt = np.ascontiguousarray(X.T)
    f, t, s = _kernels.scan_node(Xt, y, w, orders, 0, len(present), subset, c0, c1)
    if f < 0:
        return None
    return int(f), float(t), float(s)


def _grow(Xt, y, w, sorted_all, params: ForestParams, rng: RandomSource) -> Tree:
    m = params.n_candidate_features(Xt.shape[0])
    max_depth = -1 if params.max_depth is None else params.max_depth
    arrays = _kernels.grow(
        Xt, y, w, sorted_all, max_depth, params.min_samples_split, m, np.uint64(rng.key)
    )
    for a in arrays:
        a.setflags(write=False)
    return Tree(*arrays)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    rng: RandomSource,
    weights: np.ndarray | None = None,
) -> Tree:
    """Grow a single tree on the (optionally weighted) rows.

    Each node draws its candidate features from a stream keyed by its path
    from the root under ``rng``, so the tree depends only on data and ``rng``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int8)
    if X.shape[0] == 0:
        raise ImbalForestError("cannot grow a tree on zero rows")
    w = np.ones(len(y), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
    return _grow(np.ascontiguousarray(X.T), y, w, _presort(X), params, rng)


def default_threads() -> int:
    raw = os.environ.get("IMBALFOREST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ImbalForestError(f"IMBALFOREST_THREADS must be an integer, got {raw!r}") from None


def fit_forest(
    train: Dataset,
    params: ForestParams,
    rng: RandomSource,
    threads: int = 1,
) -> ForestModel:
    """Fit ``params.n_trees`` trees; tree ``t`` uses streams ``tree/t/bootstrap`` and ``tree/t/grow``.

    The result does not depend on ``threads``.
    """
    n0, n1 = train.class_counts()
    if train.n_rows < 2 or n0 == 0 or n1 == 0:
        raise ImbalForestError("training set needs at least 2 rows and both classes")
    params.n_candidate_features(train.n_features)
    X, y = train.features, train.labels
    Xt = np.ascontiguousarray(X.T)
    sorted_all = _presort(X)
    n = train.n_rows

    def build(t: int) -> Tree:
        if params.bootstrap:
            draws = rng.child("tree", t, "bootstrap").generator().integers(0, n, size=n)
            w = np.bincount(draws, minlength=n).astype(np.int64)
        else:
            w = np.ones(n, dtype=np.int64)
        return _grow(Xt, y, w, sorted_all, params, rng.child("tree", t, "grow"))

    if threads <= 1:
        trees = [build(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(params.n_trees)))
    return ForestModel(tuple(trees), params, train.feature_names, rng.seed)


def _check_width(model: ForestModel, X: np.ndarray) -> None:
    if X.shape[1] != len(model.feature_names):
        raise ImbalForestError(
            f"feature-count mismatch: model expects {len(model.feature_names)}, got {X.shape[1]}"
        )


def predict_votes(model: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    _check_width(model, X)
    pk = model._packed  # type: ignore[attr-defined]
    return _kernels.forest_votes(
        X, pk["offsets"], pk["feature"], pk["threshold"], pk["left"], pk["right"], pk["vote"]
    )


def predict_scores(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Fraction of trees voting fraud, per row."""
    return predict_votes(model, X) / model.n_trees


def predict_score(model: ForestModel, row: Sequence[float]) -> float:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise ImbalForestError("predict_score takes a single row")
    return float(predict_scores(model, row[None, :])[0])


def predict_label(model: ForestModel, row: Sequence[float], threshold: float = 0.5) -> int:
    return int(predict_score(model, row) > threshold)


def predict_labels(model: ForestModel, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (predict_scores(model, X) > threshold).astype(np.int8)


# -- model files -------------------------------------------------------------
#
# JSON text, one node record per line so trees diff cleanly:
#   {"format": "imbalforest-forest", "version": 1, "feature_names": [...],
#    "params": {...}, "train_seed": int, "metadata": {...},
#    "trees": [[node, node, ...], ...]}
# where node = [feature_index, threshold, left, right, n0, n1] and leaves use
# feature_index -1, threshold null, left/right -1.


def _node_record(t: Tree, i: int) -> list:
    if t.feature[i] < 0:
        return [-1, None, -1, -1, int(t.n0[i]), int(t.n1[i])]
    return [
        int(t.feature[i]),
        float(t.threshold[i]),
        int(t.left[i]),
        int(t.right[i]),
        int(t.n0[i]),
        int(t.n1[i]),
    ]


def dumps_model(model: ForestModel) -> str:
    head = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_names": list(model.feature_names),
        "params": model.params.to_dict(),
        "train_seed": model.train_seed,
        "metadata": model.metadata,
    }
    lines = ["{"]
    for key, value in head.items():
        lines.append(f"{json.dumps(key)}: {json.dumps(value, sort_keys=True)},")
    lines.append('"trees": [')
    for ti, t in enumerate(model.trees):
        lines.append("[")
        for i in range(t.n_nodes):
            sep = "," if i < t.n_nodes - 1 else ""
            lines.append(json.dumps(_node_record(t, i)) + sep)
        lines.append("]" + ("," if ti < model.n_trees - 1 else ""))
    lines.append("]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def _check_links(t: Tree) -> None:
    # children always follow their parent, which also rules out cycles
    n = t.n_nodes
    if n == 0:
        raise ValueError("tree has no nodes")
    for i in range(n):
        if t.feature[i] < 0:
            if t.n0[i] < 0 or t.n1[i] < 0 or t.n0[i] + t.n1[i] == 0:
                raise ValueError(f"leaf {i} has invalid counts")
        elif not (i < t.left[i] < n and i < t.right[i] < n):
            raise ValueError(f"node {i} points outside the tree")


def loads_model(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("corrupt model file: not an imbalforest forest")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"unsupported model version {doc.get('version')!r} (this build reads {MODEL_VERSION})"
        )
    try:
        trees = []
        for records in doc["trees"]:
            cols = list(zip(*records))
            feature = np.array(cols[0], dtype=np.int64)
            threshold = np.array([0.0 if v is None else v for v in cols[1]], dtype=np.float64)
            arrays = [
                feature,
                threshold,
                np.array(cols[2], dtype=np.int64),
                np.array(cols[3], dtype=np.int64),
                np.array(cols[4], dtype=np.int64),
                np.array(cols[5], dtype=np.int64),
            ]
            for a in arrays:
                a.setflags(write=False)
            tree = Tree(*arrays)
            _check_links(tree)
            trees.append(tree)
        params = ForestParams.from_dict(doc["params"])
        return ForestModel(
            tuple(trees),
            params,
            tuple(doc["feature_names"]),
            int(doc["train_seed"]),
            dict(doc.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc}") from None


def load_model(path: str | Path) -> ForestModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))

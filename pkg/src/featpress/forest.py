"""Random Forest classifier (bagged Gini CART) and F1 metrics.

Every tree draws its bootstrap sample and its per-node feature candidates
from a stream derived from ``(seed, tree_index)``, so a forest is the same
whether trees are grown one after another or on several threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _cart
from .errors import DataError, SchemaError
from .tabular import FeatureTable

__all__ = [
    "ForestParams",
    "Tree",
    "ForestModel",
    "train_forest",
    "predict",
    "macro_f1",
    "weighted_f1",
    "f1_score",
    "feature_importance",
    "bootstrap_sample",
]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str | int = "sqrt"
    min_samples_split: int = 2
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DataError("n_trees must be positive")
        if self.max_features != "sqrt" and not (isinstance(self.max_features, int) and self.max_features >= 1):
            raise DataError(f"max_features must be 'sqrt' or a positive count, got {self.max_features!r}")
        if self.min_samples_split < 2:
            raise DataError("min_samples_split must be at least 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be non-negative")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.isqrt(n_features)))
        if self.max_features > n_features:
            raise DataError(f"max_features={self.max_features} exceeds the {n_features} available features")
        return int(self.max_features)


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    importance: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def leaf_class(self) -> np.ndarray:
        """Majority class per node; ties go to the lowest class id."""
        return np.argmax(self.counts, axis=1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _cart.apply_tree(self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.leaf_class()[self.apply(x)]

    def to_bytes(self) -> bytes:
        return b"".join(
            np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<")).tobytes()
            for a in (self.feature, self.threshold, self.left, self.right, self.counts)
        )


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    params: ForestParams

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.class_names, self.feature_names]).encode())
        for t in self.trees:
            h.update(t.to_bytes())
        return h.hexdigest()

    def dump(self) -> str:
        """Per-tree node listing as JSON text, for debugging only."""
        out = []
        for t in self.trees:
            nodes = []
            for i in range(t.n_nodes):
                if t.feature[i] == _cart.LEAF:
                    nodes.append({"id": i, "counts": t.counts[i].tolist()})
                else:
                    nodes.append(
                        {
                            "id": i,
                            "feature": self.feature_names[t.feature[i]],
                            "threshold": float(t.threshold[i]),
                            "left": int(t.left[i]),
                            "right": int(t.right[i]),
                        }
                    )
            out.append(nodes)
        return json.dumps({"classes": list(self.class_names), "trees": out}, indent=1)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(tree_index)])


def bootstrap_sample(seed: int, tree_index: int, n_rows: int) -> np.ndarray:
    """Row indices (with replacement) of tree ``tree_index``'s bootstrap sample."""
    return _tree_rng(seed, tree_index).integers(0, n_rows, size=n_rows, dtype=np.int64)


def _grow(x: np.ndarray, y: np.ndarray, n_classes: int, params: ForestParams, mtry: int, t: int) -> Tree:
    rng = _tree_rng(params.seed, t)
    sample = rng.integers(0, x.shape[0], size=x.shape[0], dtype=np.int64)
    node_seed = int(rng.integers(0, 2**32, dtype=np.uint64))
    depth = -1 if params.max_depth is None else params.max_depth
    feature, threshold, left, right, counts, imp = _cart.grow_tree(
        x, y, sample, n_classes, mtry, params.min_samples_split, depth, node_seed
    )
    return Tree(feature, threshold, left, right, counts, imp / x.shape[0])


def train_forest(train: FeatureTable, params: ForestParams, n_jobs: int = 1) -> ForestModel:
    """Fit a Random Forest on ``train``.

    ``n_jobs`` grows trees on that many threads; the result does not depend
    on it.
    """
    if train.n_rows == 0:
        raise DataError("cannot train on an empty table")
    present = np.unique(train.labels)
    if present.size < 2:
        raise DataError("training data holds a single class; a classifier needs at least 2")
    mtry = params.resolve_max_features(train.n_features)
    x = np.ascontiguousarray(train.values)
    y = np.ascontiguousarray(train.labels)
    k = train.n_classes

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda t: _grow(x, y, k, params, mtry, t), range(params.n_trees)))
    else:
        trees = [_grow(x, y, k, params, mtry, t) for t in range(params.n_trees)]
    return ForestModel(tuple(trees), train.class_names, train.feature_names, params)


def _values(model: ForestModel, table: FeatureTable | np.ndarray) -> np.ndarray:
    x = table.values if isinstance(table, FeatureTable) else np.asarray(table, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(model.feature_names):
        raise SchemaError(f"model expects {len(model.feature_names)} features, got shape {x.shape}")
    return np.ascontiguousarray(x)


def votes(model: ForestModel, table: FeatureTable | np.ndarray) -> np.ndarray:
    """Per-row vote counts, shape ``(n_rows, n_classes)``."""
    x = _values(model, table)
    out = np.zeros((x.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(x.shape[0])
    for t in model.trees:
        out[rows, t.predict(x)] += 1
    return out


def predict(model: ForestModel, table: FeatureTable | np.ndarray) -> np.ndarray:
    """Majority vote of the trees' leaf classes; ties go to the lowest class id."""
    return np.argmax(votes(model, table), axis=1)


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean decrease in Gini impurity per feature, normalized to sum to 1.

    A forest made only of single-leaf trees has no splits to credit; it
    returns the uniform vector.
    """
    imp = np.mean([t.importance for t in model.trees], axis=0)
    total = imp.sum()
    if not total > 0:
        return np.full(imp.size, 1.0 / imp.size)
    return imp / total


def _check_pair(pred: Sequence[int], truth: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.size != truth.size:
        raise DataError(f"prediction length {pred.size} != truth length {truth.size}")
    if truth.size == 0:
        raise DataError("F1 of an empty prediction set is undefined")
    return pred, truth


def _per_class_f1(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(truth)
    scores = np.empty(classes.size)
    support = np.empty(classes.size)
    for i, c in enumerate(classes):
        tp = np.count_nonzero((pred == c) & (truth == c))
        n_pred = np.count_nonzero(pred == c)
        n_true = np.count_nonzero(truth == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_true
        scores[i] = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        support[i] = n_true
    return scores, support


def macro_f1(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Unweighted mean of per-class F1 over the classes present in ``truth``."""
    scores, _ = _per_class_f1(*_check_pair(pred, truth))
    return float(scores.mean())


def weighted_f1(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Per-class F1 averaged with class support as weights."""
    scores, support = _per_class_f1(*_check_pair(pred, truth))
    return float(np.dot(scores, support) / support.sum())


def f1_score(pred: Sequence[int], truth: Sequence[int], average: str = "macro") -> float:
    if average == "macro":
        return macro_f1(pred, truth)
    if average == "weighted":
        return weighted_f1(pred, truth)
    raise DataError(f"unknown F1 average {average!r}; use 'macro' or 'weighted'")

"""Top-k feature selection ranked by Random Forest impurity importance."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError
from .forest import ForestParams, feature_importance, train_forest
from .tabular import FeatureTable

__all__ = ["FeatureRanking", "rank_features", "ranking_from_importance", "apply_selection", "ranking_seed"]

# keeps the ranking forest's random stream apart from the evaluation forest's
_RANKING_DOMAIN = 0x52414E4B


def ranking_seed(seed: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _RANKING_DOMAIN])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    feature_names: tuple[str, ...]
    order: np.ndarray  # feature indices, most informative first
    importance: np.ndarray  # indexed by original feature position
    seed: int

    def ranked_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.order]

    def to_bytes(self) -> bytes:
        return (
            "\x00".join(self.feature_names).encode("utf-8")
            + b"\x01"
            + self.order.astype("<i8").tobytes()
            + self.importance.astype("<f8").tobytes()
            + int(self.seed).to_bytes(8, "little", signed=False)
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureRanking):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def write_csv(self, path: str | Path) -> None:
        """Two columns, ``feature,importance``, in rank order."""
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "importance"])
            for i in self.order:
                w.writerow([self.feature_names[i], repr(float(self.importance[i]))])


def ranking_from_importance(feature_names, importance, seed: int = 0) -> FeatureRanking:
    """Sort by descending importance, ties by ascending feature index."""
    imp = np.asarray(importance, dtype=np.float64)
    order = np.array(sorted(range(imp.size), key=lambda i: (-imp[i], i)), dtype=np.int64)
    return FeatureRanking(tuple(feature_names), order, imp, int(seed) & 0xFFFFFFFFFFFFFFFF)


def rank_features(train: FeatureTable, seed: int, params: ForestParams | None = None) -> FeatureRanking:
    """Rank features by the mean Gini decrease of a forest trained on ``train``.

    The ranking forest uses default parameters unless ``params`` is given;
    its seed is derived from ``seed`` in a separate domain from the
    evaluation forest.
    """
    if train.n_rows == 0:
        raise DataError("cannot rank features on an empty table")
    if np.unique(train.labels).size < 2:
        raise DataError("feature ranking needs at least 2 classes in the training data")
    base = params or ForestParams()
    forest = train_forest(
        train,
        ForestParams(base.n_trees, base.max_features, base.min_samples_split, base.max_depth, ranking_seed(seed)),
    )
    return ranking_from_importance(train.feature_names, feature_importance(forest), seed)


def apply_selection(table: FeatureTable, ranking: FeatureRanking, k: int) -> FeatureTable:
    """Keep the ``k`` top-ranked columns, in rank order."""
    if table.n_features != len(ranking.feature_names):
        raise SchemaError(f"ranking covers {len(ranking.feature_names)} features, table has {table.n_features}")
    if table.feature_names != ranking.feature_names:
        raise SchemaError("table columns do not match the ranking's feature names")
    if not 1 <= k <= table.n_features:
        raise DataError(f"k={k} outside [1, {table.n_features}]")
    keep = ranking.order[:k]
    return table.with_features([table.feature_names[i] for i in keep], table.values[:, keep])

"""Feature tables: the in-memory data model, CSV ingestion, splitting and synthetic logs.

A :class:`FeatureTable` holds one numeric feature matrix plus the per-row
columns that travel alongside it (class label, optional timestamp, optional
group key such as an AS number). Tables are immutable; every transform in the
package builds a new table through :meth:`FeatureTable.with_features` so the
label/timestamp/group columns are carried through untouched.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "FeatureTable",
    "SynthSpec",
    "load_csv",
    "write_csv",
    "stratified_split",
    "synth_generate",
    "REFERENCE_SPEC",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Numeric feature matrix with labels and optional timestamps / group keys.

    ``labels`` holds integer ids indexing ``class_names``. Subsets of a table
    (splits, per-group partitions) keep the parent's ``class_names`` so ids
    stay comparable across them.
    """

    feature_names: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    timestamps: np.ndarray | None = None
    groups: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.feature_names)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"values must be a 2-D matrix, got shape {values.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n_rows = values.shape[0]
        if values.shape[1] != len(names):
            raise DataError(f"values have {values.shape[1]} columns but {len(names)} feature names were given")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate feature names: {dupes}")
        if labels.shape[0] != n_rows:
            raise DataError(f"{labels.shape[0]} labels for {n_rows} rows")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError("label ids fall outside the class name table")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {r + 1}, column {names[c]!r}")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
            if ts.shape[0] != n_rows:
                raise DataError(f"{ts.shape[0]} timestamps for {n_rows} rows")
            object.__setattr__(self, "timestamps", _readonly(ts))
        if self.groups is not None:
            groups = tuple(str(g) for g in self.groups)
            if len(groups) != n_rows:
                raise DataError(f"{len(groups)} group keys for {n_rows} rows")
            object.__setattr__(self, "groups", groups)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_names(self) -> list[str]:
        return [self.class_names[i] for i in self.labels]

    def take(self, rows: Sequence[int] | np.ndarray) -> FeatureTable:
        """Row subset in the given order; class table is shared with the parent."""
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureTable(
            self.feature_names,
            self.values[rows],
            self.labels[rows],
            self.class_names,
            None if self.timestamps is None else self.timestamps[rows],
            None if self.groups is None else tuple(self.groups[i] for i in rows),
        )

    def with_features(self, feature_names: Iterable[str], values: np.ndarray) -> FeatureTable:
        """Same rows and side columns, new feature matrix."""
        return FeatureTable(
            tuple(feature_names), values, self.labels, self.class_names, self.timestamps, self.groups
        )

    def with_classes(self, class_names: Sequence[str]) -> FeatureTable:
        """Re-express labels against another class table.

        Classes of ``self`` that are missing from ``class_names`` are appended
        in first-appearance order.
        """
        names = list(class_names)
        index = {c: i for i, c in enumerate(names)}
        for c in self.label_names():
            if c not in index:
                index[c] = len(names)
                names.append(c)
        remap = np.array([index[c] for c in self.class_names], dtype=np.int64)
        labels = remap[self.labels] if self.n_rows else self.labels
        return FeatureTable(self.feature_names, self.values, labels, tuple(names), self.timestamps, self.groups)

    def same_content(self, other: FeatureTable) -> bool:
        return (
            self.feature_names == other.feature_names
            and self.class_names == other.class_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
            and _opt_equal(self.timestamps, other.timestamps)
            and self.groups == other.groups
        )


def _opt_equal(a: np.ndarray | None, b: np.ndarray | None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


def _parse_real(cell: str, row: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {column!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {column!r}: non-finite value {cell!r}")
    return v


def load_csv(
    path: str | Path,
    label_column: str = "label",
    timestamp_column: str | None = None,
    group_column: str | None = None,
    classes: Sequence[str] | None = None,
) -> FeatureTable:
    """Read a comma-separated feature log with a header row.

    The designated columns are pulled out; every other column is a feature,
    kept in header order. Label ids follow first appearance, after any names
    already listed in ``classes`` (used to align a test file with its train
    file). Rows are numbered from 1, not counting the header.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        seen: set[str] = set()
        for h in header:
            if h in seen:
                raise DataError(f"{path}: duplicate column name {h!r}")
            seen.add(h)
        designated = {}
        for role, name in (("label", label_column), ("timestamp", timestamp_column), ("group", group_column)):
            if name is None:
                continue
            if name not in seen:
                raise DataError(f"{path}: missing {role} column {name!r}")
            designated[role] = header.index(name)
        feat_idx = [i for i in range(len(header)) if i not in designated.values()]
        feature_names = [header[i] for i in feat_idx]

        class_index: dict[str, int] = {c: i for i, c in enumerate(classes or ())}
        class_names = list(classes or ())
        rows: list[list[float]] = []
        labels: list[int] = []
        stamps: list[float] = []
        groups: list[str] = []
        for rownum, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(cells)} cells, header has {len(header)}")
            rows.append([_parse_real(cells[i], rownum, header[i]) for i in feat_idx])
            lab = cells[designated["label"]].strip()
            if lab not in class_index:
                class_index[lab] = len(class_names)
                class_names.append(lab)
            labels.append(class_index[lab])
            if "timestamp" in designated:
                stamps.append(_parse_real(cells[designated["timestamp"]], rownum, timestamp_column))
            if "group" in designated:
                groups.append(cells[designated["group"]].strip())

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return FeatureTable(
        tuple(feature_names),
        values,
        np.array(labels, dtype=np.int64),
        tuple(class_names),
        np.array(stamps) if "timestamp" in designated else None,
        tuple(groups) if "group" in designated else None,
    )


def format_real(v: float) -> str:
    """Shortest decimal string that parses back to the same 64-bit value."""
    return repr(float(v))


def write_csv(
    table: FeatureTable,
    path: str | Path,
    label_column: str | None = "label",
    timestamp_column: str = "timestamp",
    group_column: str = "group",
) -> None:
    """Write a table as CSV: features, then label / timestamp / group if present.

    Pass ``label_column=None`` for a features-only file.
    """
    header = list(table.feature_names)
    extra: list[list[str]] = []
    if label_column is not None:
        header.append(label_column)
        extra.append(table.label_names())
    if table.timestamps is not None:
        header.append(timestamp_column)
        extra.append([format_real(t) for t in table.timestamps])
    if table.groups is not None:
        header.append(group_column)
        extra.append(list(table.groups))
    lines = [",".join(header)]
    for r in range(table.n_rows):
        cells = [format_real(v) for v in table.values[r]]
        cells.extend(col[r] for col in extra)
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def stratified_split(table: FeatureTable, test_fraction: float, seed: int) -> tuple[FeatureTable, FeatureTable]:
    """Per-class seeded holdout split.

    Each class sends ``max(1, floor(test_fraction * count))`` rows to the test
    side. Both outputs keep the original row order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    in_test = np.zeros(table.n_rows, dtype=bool)
    for c in range(table.n_classes):
        members = np.flatnonzero(table.labels == c)
        count = members.size
        if count == 0:
            continue
        if count < 2:
            raise DataError(f"class {table.class_names[c]!r} has {count} row; stratified split needs at least 2")
        n_test = max(1, math.floor(test_fraction * count + 1e-9))
        if n_test >= count:
            raise DataError(f"class {table.class_names[c]!r}: test fraction {test_fraction} leaves no training rows")
        in_test[rng.permutation(members)[:n_test]] = True
    return table.take(np.flatnonzero(~in_test)), table.take(np.flatnonzero(in_test))


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 5
    n_informative: int = 20
    n_noise: int = 10
    rows_per_class: int = 400
    separation: float = 3.0
    heavy_tail_fraction: float = 0.3
    record_rate_hz: float = 1.0
    seed: int = 7

    def __post_init__(self) -> None:
        if self.n_classes < 1:
            raise DataError("n_classes must be positive")
        if self.n_informative < 0 or self.n_noise < 0 or self.n_informative + self.n_noise < 1:
            raise DataError("need at least one feature (n_informative + n_noise >= 1)")
        if self.rows_per_class < 2:
            raise DataError("rows_per_class must be at least 2")
        if self.separation < 0:
            raise DataError("separation must be non-negative")
        if not 0.0 <= self.heavy_tail_fraction <= 1.0:
            raise DataError("heavy_tail_fraction must lie in [0, 1]")
        if self.record_rate_hz <= 0:
            raise DataError("record_rate_hz must be positive")


REFERENCE_SPEC = SynthSpec(
    n_classes=5, n_informative=20, n_noise=10, rows_per_class=400, separation=3.0, heavy_tail_fraction=0.3, seed=7
)


def synth_generate(spec: SynthSpec) -> FeatureTable:
    """Seeded synthetic feature log.

    Informative feature ``j`` gives each class a mean ``separation * rank``
    where the class ranks are a seeded permutation drawn per feature, with
    unit within-class deviation. A ``heavy_tail_fraction`` share of the
    informative features is exponentiated (log-normal, like byte counters and
    inter-arrival times). Noise features are standard normal for every class.
    Rows are shuffled and stamped at ``1 / record_rate_hz`` spacing.
    """
    rng = np.random.default_rng(spec.seed)
    k, n_inf, per = spec.n_classes, spec.n_informative, spec.rows_per_class
    n_rows = k * per
    ranks = np.array([rng.permutation(k) for _ in range(n_inf)], dtype=np.float64).reshape(n_inf, k)
    n_heavy = int(round(spec.heavy_tail_fraction * n_inf))
    heavy = np.zeros(n_inf, dtype=bool)
    heavy[rng.choice(n_inf, size=n_heavy, replace=False)] = True

    labels = np.repeat(np.arange(k, dtype=np.int64), per)
    means = spec.separation * ranks[:, labels].T
    informative = means + rng.standard_normal((n_rows, n_inf))
    informative[:, heavy] = np.exp(informative[:, heavy])
    noise = rng.standard_normal((n_rows, spec.n_noise))
    values = np.hstack([informative, noise])

    order = rng.permutation(n_rows)
    width = len(str(n_inf + spec.n_noise))
    names = tuple(f"f{j:0{width}d}" for j in range(1, n_inf + spec.n_noise + 1))
    labels = labels[order]
    # relabel so class ids follow first appearance, matching a CSV reload
    first = {}
    for lab in labels:
        first.setdefault(int(lab), len(first))
    class_names = tuple(f"class{c}" for c in sorted(first, key=first.get))
    ids = np.array([first[int(lab)] for lab in labels], dtype=np.int64)
    return FeatureTable(
        names,
        values[order],
        ids,
        class_names,
        timestamps=np.arange(n_rows, dtype=np.float64) / spec.record_rate_hz,
    )

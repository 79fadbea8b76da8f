"""Compression pipelines, sweeps over them, and accuracy-storage operating regions.

A pipeline applies, in this order and each only if configured: top-k
feature selection, PCA, scalar quantization. Every fitted statistic comes
from the training split. Storage is measured on the test split, the part of
the log a deployed monitor would be writing to disk.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codec
from .errors import DataError, SchemaError
from .forest import ForestParams, f1_score, predict, train_forest
from .projector import PcaModel, fit_pca, project
from .quantizer import RangeModel, encode, fit_ranges, levels, quantize_table
from .selector import FeatureRanking, apply_selection, rank_features
from .tabular import FeatureTable

__all__ = [
    "PipelineConfig",
    "FittedPipeline",
    "TradeoffPoint",
    "Region",
    "fit_pipeline",
    "run_config",
    "run_config_grouped",
    "sweep",
    "operating_region",
    "core_sweep_configs",
    "iot_sweep_configs",
    "DEFAULT_BITS",
]

DEFAULT_BITS: tuple[int | None, ...] = (None, 32, 16, 8, 4, 2)
DEFAULT_PCA: tuple[float | None, ...] = (None, 0.99, 0.80)
DEFAULT_SELECT: tuple[int | None, ...] = (None, 100, 20)


@dataclass(frozen=True)
class PipelineConfig:
    selection_k: int | None = None
    pca_target: float | None = None
    bits: int | None = None
    forest: ForestParams = field(default_factory=ForestParams)
    seed: int = 0
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.selection_k is not None and self.selection_k < 1:
            raise DataError(f"selection_k must be positive, got {self.selection_k}")
        if self.pca_target is not None and not 0.0 < self.pca_target <= 1.0:
            raise DataError(f"pca_target must lie in (0, 1], got {self.pca_target}")
        if self.bits is not None:
            levels(self.bits)

    @property
    def stage_key(self) -> tuple[int | None, float | None]:
        """Selection/PCA settings; configs sharing it differ only in bit width."""
        return (self.selection_k, self.pca_target)

    def label(self) -> str:
        parts = []
        if self.selection_k is not None:
            parts.append(f"top{self.selection_k}")
        if self.pca_target is not None:
            parts.append(f"pca{self.pca_target:g}")
        parts.append("lossless" if self.bits is None else f"{self.bits}b")
        return "+".join(parts)


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    config: PipelineConfig
    ranking: FeatureRanking | None
    pca: PcaModel | None
    ranges: RangeModel | None

    def stage(self, table: FeatureTable) -> FeatureTable:
        """Selection and projection, no quantization."""
        if self.ranking is not None:
            table = apply_selection(table, self.ranking, self.config.selection_k)
        if self.pca is not None:
            table = project(table, self.pca)
        return table

    def transform(self, table: FeatureTable) -> FeatureTable:
        """Full pipeline; quantized configs return dequantized values."""
        table = self.stage(table)
        if self.ranges is not None:
            table = quantize_table(table, self.ranges, self.config.bits)
        return table

    def model_bytes(self) -> dict[str, bytes]:
        out = {}
        for name in ("ranking", "pca", "ranges"):
            m = getattr(self, name)
            if m is not None:
                out[name] = m.to_bytes()
        return out


@dataclass(frozen=True, eq=False)
class TradeoffPoint:
    config: PipelineConfig
    f1: float
    storage: codec.StorageReport
    wall_time_seconds: float
    fitted: FittedPipeline | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class Region:
    epsilon: float
    members: tuple[TradeoffPoint, ...]
    min_reduction: float
    max_reduction: float


def fit_pipeline(train: FeatureTable, config: PipelineConfig) -> FittedPipeline:
    """Fit every configured stage on ``train`` alone."""
    table = train
    ranking = pca = ranges = None
    if config.selection_k is not None:
        if config.selection_k > train.n_features:
            raise DataError(f"selection_k={config.selection_k} exceeds the {train.n_features} available features")
        ranking = rank_features(train, config.seed)
        table = apply_selection(table, ranking, config.selection_k)
    if config.pca_target is not None:
        pca = fit_pca(table, config.pca_target, standardize=config.standardize)
        table = project(table, pca)
    if config.bits is not None:
        ranges = fit_ranges(table)
    return FittedPipeline(config, ranking, pca, ranges)


def _aligned(train: FeatureTable, test: FeatureTable) -> FeatureTable:
    if train.feature_names != test.feature_names:
        raise SchemaError("train and test splits have different feature columns")
    if test.class_names != train.class_names:
        test = test.with_classes(train.class_names)
    return test


def _duration(test: FeatureTable, duration: float | None) -> float | None:
    if duration is not None:
        return float(duration)
    if test.timestamps is not None and test.n_rows > 1:
        span = float(test.timestamps.max() - test.timestamps.min())
        if span > 0:
            return span
    return None


def _stored_bytes(fitted: FittedPipeline, test_stage: FeatureTable, level: int) -> tuple[int, int, int]:
    csv_bytes, f32_bytes = codec.baseline_sizes(test_stage, level)
    if fitted.ranges is None:
        return csv_bytes, csv_bytes, f32_bytes
    container = codec.pack(encode(test_stage, fitted.ranges, fitted.config.bits), fitted.ranges)
    return len(codec.seal(container, level)), csv_bytes, f32_bytes


def _report(lossy: int, csv_b: int, f32_b: int, raw_csv: int, duration: float | None) -> codec.StorageReport:
    return codec.StorageReport(
        lossy_bytes=lossy,
        baseline_csv_bytes=csv_b,
        baseline_f32_bytes=f32_b,
        raw_csv_bytes=raw_csv,
        reduction_vs_csv=codec.reduction_factor(csv_b, lossy),
        reduction_vs_f32=codec.reduction_factor(f32_b, lossy),
        reduction_vs_raw_csv=codec.reduction_factor(raw_csv, lossy),
        bits_per_second=None if duration is None else codec.storage_rate(lossy, duration),
    )


def run_config(
    train: FeatureTable,
    test: FeatureTable,
    config: PipelineConfig,
    *,
    duration: float | None = None,
    average: str = "macro",
    level: int = codec.DEFAULT_LEVEL,
) -> TradeoffPoint:
    """Fit on ``train``, score on ``test``, measure the stored test split.

    The forest is trained and evaluated on dequantized values. The storage
    baselines are the same-stage (selected / projected) test split stored
    losslessly, plus the untouched test split as ``raw_csv_bytes``; for the
    unquantized config the stored log *is* the same-stage CSV, so its
    ``reduction_vs_csv`` is exactly 1. ``duration`` defaults to the test
    timestamps' span; without either, the bit rate is left empty.
    """
    test = _aligned(train, test)
    start = time.perf_counter()
    fitted = fit_pipeline(train, config)
    train_stage, test_stage = fitted.stage(train), fitted.stage(test)
    if fitted.ranges is not None:
        train_eval = quantize_table(train_stage, fitted.ranges, config.bits)
        test_eval = quantize_table(test_stage, fitted.ranges, config.bits)
    else:
        train_eval, test_eval = train_stage, test_stage
    model = train_forest(train_eval, config.forest)
    f1 = f1_score(predict(model, test_eval), test_eval.labels, average)

    lossy, csv_b, f32_b = _stored_bytes(fitted, test_stage, level)
    raw_csv = codec.baseline_sizes(test, level)[0]
    storage = _report(lossy, csv_b, f32_b, raw_csv, _duration(test, duration))
    return TradeoffPoint(config, f1, storage, time.perf_counter() - start, fitted)


def run_config_grouped(
    train: FeatureTable,
    test: FeatureTable,
    config: PipelineConfig,
    *,
    duration: float | None = None,
    average: str = "macro",
    level: int = codec.DEFAULT_LEVEL,
) -> TradeoffPoint:
    """One pipeline and forest per group key (e.g. per AS).

    Predictions from all groups are pooled before scoring; stored bytes and
    baselines are summed over groups. Test rows of groups unseen in training
    are an error. The returned point carries no single fitted pipeline.
    """
    if train.groups is None or test.groups is None:
        raise DataError("per-group evaluation needs a group column on both splits")
    test = _aligned(train, test)
    start = time.perf_counter()
    train_keys = sorted(set(train.groups))
    unseen = sorted(set(test.groups) - set(train_keys))
    if unseen:
        raise DataError(f"test split has groups absent from training: {unseen}")
    preds, truth = [], []
    lossy = csv_b = f32_b = raw_csv = 0
    tr_groups = np.array(train.groups)
    te_groups = np.array(test.groups)
    for key in train_keys:
        sub_test = test.take(np.flatnonzero(te_groups == key))
        if sub_test.n_rows == 0:
            continue
        sub_train = train.take(np.flatnonzero(tr_groups == key))
        fitted = fit_pipeline(sub_train, config)
        tr_stage, te_stage = fitted.stage(sub_train), fitted.stage(sub_test)
        if fitted.ranges is not None:
            tr_stage_eval = quantize_table(tr_stage, fitted.ranges, config.bits)
            te_stage_eval = quantize_table(te_stage, fitted.ranges, config.bits)
        else:
            tr_stage_eval, te_stage_eval = tr_stage, te_stage
        model = train_forest(tr_stage_eval, config.forest)
        preds.append(predict(model, te_stage_eval))
        truth.append(sub_test.labels)
        a, b, c = _stored_bytes(fitted, te_stage, level)
        lossy, csv_b, f32_b = lossy + a, csv_b + b, f32_b + c
        raw_csv += codec.baseline_sizes(sub_test, level)[0]
    f1 = f1_score(np.concatenate(preds), np.concatenate(truth), average)
    storage = _report(lossy, csv_b, f32_b, raw_csv, _duration(test, duration))
    return TradeoffPoint(config, f1, storage, time.perf_counter() - start, None)


def _run_one(args) -> TradeoffPoint:
    train, test, config, kwargs, grouped = args
    runner = run_config_grouped if grouped else run_config
    return runner(train, test, config, **kwargs)


def sweep(
    train: FeatureTable,
    test: FeatureTable,
    configs: list[PipelineConfig],
    *,
    jobs: int = 1,
    grouped: bool = False,
    **kwargs,
) -> list[TradeoffPoint]:
    """Run every config; results keep the input order whatever ``jobs`` is."""
    if not configs:
        raise DataError("sweep needs at least one configuration")
    work = [(train, test, c, kwargs, grouped) for c in configs]
    if jobs <= 1 or len(configs) == 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        return list(pool.map(_run_one, work))


def _grid(bits_list, stage_values, make) -> list[PipelineConfig]:
    return [make(stage, bits) for stage, bits in itertools.product(stage_values, bits_list)]


def core_sweep_configs(
    bits_list=DEFAULT_BITS, pca_list=DEFAULT_PCA, forest: ForestParams | None = None, seed: int = 0
) -> list[PipelineConfig]:
    """Bit widths x PCA targets, grouped by PCA setting (18 configs by default)."""
    forest = forest or ForestParams(seed=seed)
    return _grid(bits_list, pca_list, lambda p, b: PipelineConfig(None, p, b, forest, seed))


def iot_sweep_configs(
    bits_list=DEFAULT_BITS, select_list=DEFAULT_SELECT, forest: ForestParams | None = None, seed: int = 0
) -> list[PipelineConfig]:
    """Bit widths x selection sizes, grouped by selection setting."""
    forest = forest or ForestParams(seed=seed)
    return _grid(bits_list, select_list, lambda k, b: PipelineConfig(k, None, b, forest, seed))


def operating_region(points: list[TradeoffPoint], epsilon: float = 0.02) -> Region:
    """Points whose F1 is within ``epsilon`` of their own stage's lossless baseline.

    Each point is compared with the unquantized point sharing its
    selection/PCA settings; reductions are ``reduction_vs_csv``.
    """
    if epsilon < 0:
        raise DataError(f"epsilon must be non-negative, got {epsilon}")
    if not points:
        raise DataError("operating region of an empty point set")
    baselines = {p.config.stage_key: p for p in points if p.config.bits is None}
    members = []
    for p in points:
        base = baselines.get(p.config.stage_key)
        if base is None:
            k, pca = p.config.stage_key
            raise DataError(f"no unquantized baseline point for selection_k={k}, pca_target={pca}")
        if p.f1 >= base.f1 - epsilon:
            members.append(p)
    reductions = [p.storage.reduction_vs_csv for p in members]
    return Region(epsilon, tuple(members), min(reductions), max(reductions))

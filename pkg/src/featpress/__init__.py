"""Task-aware lossy compression of network traffic feature logs.

Pipeline stages (each optional): top-k feature selection, PCA, uniform scalar
quantization, then DEFLATE. Every configuration is scored by the macro-F1 of a
Random Forest trained on the compressed representation.
"""

from .codec import Container, StorageReport, baseline_sizes, pack, reduction_factor, seal, storage_rate, unpack, unseal
from .errors import DataError, FeatpressError, FormatError, SchemaError
from .experiment import (
    PipelineConfig,
    Region,
    TradeoffPoint,
    core_sweep_configs,
    iot_sweep_configs,
    operating_region,
    run_config,
    sweep,
)
from .forest import ForestModel, ForestParams, feature_importance, macro_f1, predict, train_forest
from .projector import PcaModel, fit_pca, project
from .quantizer import CodeTable, RangeModel, decode, encode, fit_ranges
from .report import write_report
from .selector import FeatureRanking, apply_selection, rank_features
from .tabular import REFERENCE_SPEC, FeatureTable, SynthSpec, load_csv, stratified_split, synth_generate, write_csv

__version__ = "0.1.0"

__all__ = [
    "apply_selection",
    "baseline_sizes",
    "CodeTable",
    "Container",
    "core_sweep_configs",
    "DataError",
    "decode",
    "encode",
    "FeatpressError",
    "feature_importance",
    "FeatureRanking",
    "FeatureTable",
    "fit_pca",
    "fit_ranges",
    "ForestModel",
    "ForestParams",
    "FormatError",
    "iot_sweep_configs",
    "load_csv",
    "macro_f1",
    "operating_region",
    "pack",
    "PcaModel",
    "PipelineConfig",
    "predict",
    "project",
    "RangeModel",
    "rank_features",
    "reduction_factor",
    "REFERENCE_SPEC",
    "Region",
    "run_config",
    "SchemaError",
    "seal",
    "storage_rate",
    "StorageReport",
    "stratified_split",
    "sweep",
    "synth_generate",
    "SynthSpec",
    "TradeoffPoint",
    "train_forest",
    "unpack",
    "unseal",
    "write_csv",
    "write_report",
]

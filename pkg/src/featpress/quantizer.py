"""Feature-wise uniform scalar quantization.

Ranges are fitted once on training rows and then applied unchanged to any
other table; values outside a fitted range clamp to the extreme levels.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SchemaError
from .tabular import FeatureTable

__all__ = ["RangeModel", "CodeTable", "fit_ranges", "encode", "decode", "decode_values", "quantize_table", "levels"]

MAX_BITS = 32


def levels(bits: int) -> int:
    """Index of the top level, ``2**bits - 1``."""
    if not isinstance(bits, (int, np.integer)) or isinstance(bits, bool) or not 1 <= bits <= MAX_BITS:
        raise DataError(f"bit width must be an integer in [1, {MAX_BITS}], got {bits!r}")
    return (1 << int(bits)) - 1


@dataclass(frozen=True, eq=False)
class RangeModel:
    feature_names: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.ascontiguousarray(self.lo, dtype=np.float64).reshape(-1)
        hi = np.ascontiguousarray(self.hi, dtype=np.float64).reshape(-1)
        names = tuple(self.feature_names)
        if not lo.shape == hi.shape == (len(names),):
            raise DataError("lo/hi length must match the number of feature names")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DataError("ranges must be finite")
        if np.any(lo > hi):
            raise DataError("every range needs lo <= hi")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RangeModel):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def to_bytes(self) -> bytes:
        names = "\x00".join(self.feature_names).encode("utf-8")
        return names + b"\x01" + self.lo.astype("<f8").tobytes() + self.hi.astype("<f8").tobytes()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def check_schema(self, feature_names: tuple[str, ...]) -> None:
        if tuple(feature_names) != self.feature_names:
            raise SchemaError(
                f"feature schema mismatch: ranges cover {list(self.feature_names)}, table has {list(feature_names)}"
            )


@dataclass(frozen=True, eq=False)
class CodeTable:
    feature_names: tuple[str, ...]
    codes: np.ndarray
    bits: int

    def __post_init__(self) -> None:
        top = levels(self.bits)
        codes = np.ascontiguousarray(self.codes, dtype=np.uint64)
        if codes.ndim != 2 or codes.shape[1] != len(self.feature_names):
            raise DataError(f"codes shape {codes.shape} does not match {len(self.feature_names)} features")
        if codes.size and int(codes.max()) > top:
            raise DataError(f"code {int(codes.max())} does not fit in {self.bits} bits")
        codes.setflags(write=False)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "bits", int(self.bits))

    @property
    def row_count(self) -> int:
        return self.codes.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodeTable):
            return NotImplemented
        return (
            self.bits == other.bits
            and self.feature_names == other.feature_names
            and np.array_equal(self.codes, other.codes)
        )


def fit_ranges(train: FeatureTable) -> RangeModel:
    """Exact per-feature min/max over the training rows."""
    if train.n_rows == 0:
        raise DataError("cannot fit quantization ranges on an empty table")
    return RangeModel(train.feature_names, train.values.min(axis=0), train.values.max(axis=0))


def encode(table: FeatureTable, ranges: RangeModel, bits: int) -> CodeTable:
    """Map each value to the nearest of ``2**bits`` evenly spaced levels.

    Ties round half away from zero; values outside the fitted range clamp to
    level 0 or the top level; constant features encode as 0.
    """
    top = levels(bits)
    ranges.check_schema(table.feature_names)
    span = ranges.hi - ranges.lo
    live = span > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (table.values - ranges.lo) / np.where(live, span, 1.0) * float(top)
    q = np.floor(np.clip(t, 0.0, float(top)) + 0.5)
    q = np.minimum(q, float(top))
    q[:, ~live] = 0.0
    return CodeTable(table.feature_names, q.astype(np.uint64), bits)


def decode_values(codes: CodeTable, ranges: RangeModel) -> np.ndarray:
    """Representative value of each code: ``lo + q * (hi - lo) / (2**bits - 1)``."""
    top = levels(codes.bits)
    ranges.check_schema(codes.feature_names)
    if codes.codes.size and int(codes.codes.max()) > top:
        raise DataError(f"corrupt codes: {int(codes.codes.max())} exceeds {top}")
    q = codes.codes.astype(np.float64)
    out = ranges.lo + q * ((ranges.hi - ranges.lo) / float(top))
    # exact endpoints; top * (span / top) can miss hi by an ulp
    return np.where(codes.codes == top, ranges.hi, out)


def decode(codes: CodeTable, ranges: RangeModel, like: FeatureTable | None = None) -> FeatureTable:
    """Dequantize a code table.

    Codes carry no labels. With ``like`` (the table that was encoded, or any
    table with the same rows) its labels, timestamps and groups are
    reattached; without it every row gets the placeholder class ``""``.
    """
    values = decode_values(codes, ranges)
    if like is None:
        return FeatureTable(codes.feature_names, values, np.zeros(codes.row_count, dtype=np.int64), ("",))
    if like.n_rows != codes.row_count:
        raise DataError(f"{codes.row_count} code rows but the template table has {like.n_rows}")
    return like.with_features(codes.feature_names, values)


def quantize_table(table: FeatureTable, ranges: RangeModel, bits: int) -> FeatureTable:
    """``decode(encode(table))`` with the table's side columns kept."""
    return decode(encode(table, ranges, bits), ranges, like=table)

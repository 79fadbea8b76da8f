"""Standardized PCA fitted on training rows, keeping a target share of variance."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SchemaError
from .tabular import FeatureTable

__all__ = ["PcaModel", "fit_pca", "project"]


@dataclass(frozen=True, eq=False)
class PcaModel:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray  # k x n_features, rows orthonormal
    eigenvalues: np.ndarray  # k, descending
    variance_target: float
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(f"pc{i}" for i in range(1, self.k + 1))

    def explained_ratio(self) -> np.ndarray:
        """Cumulative share of variance kept by the first 1..k components."""
        return np.cumsum(self.eigenvalues) / self.total_variance

    def to_bytes(self) -> bytes:
        parts = ["\x00".join(self.feature_names).encode("utf-8"), b"\x01"]
        for a in (self.mean, self.scale, self.components, self.eigenvalues):
            parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
        parts.append(np.array([self.variance_target, self.total_variance], dtype="<f8").tobytes())
        return b"".join(parts)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PcaModel):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (first on ties)."""
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _first_nonzero(v: np.ndarray, tol: float) -> int:
    nz = np.flatnonzero(np.abs(v) > tol)
    return int(nz[0]) if nz.size else v.size


def fit_pca(train: FeatureTable, variance_target: float, standardize: bool = True) -> PcaModel:
    """Fit PCA on the training split.

    Features are z-scored with the training mean and sample deviation unless
    ``standardize`` is off; zero-deviation features get scale 1. The number of
    components is the smallest ``k`` whose cumulative eigenvalue share reaches
    ``variance_target``.
    """
    if not 0.0 < variance_target <= 1.0:
        raise DataError(f"variance target must lie in (0, 1], got {variance_target}")
    if train.n_rows < 2:
        raise DataError("PCA needs at least 2 training rows")
    x = train.values
    mean = x.mean(axis=0)
    if standardize:
        scale = x.std(axis=0, ddof=1)
        scale[~(scale > 0)] = 1.0
    else:
        scale = np.ones(x.shape[1])
    z = (x - mean) / scale
    cov = (z.T @ z) / (x.shape[0] - 1)
    cov = (cov + cov.T) / 2.0

    evals, evecs = np.linalg.eigh(cov)
    top = float(evals.max()) if evals.size else 0.0
    if not top > 0.0:
        raise DataError("covariance is all zero: every feature is constant on the training split")
    # round-off eigenvalues of a rank-deficient covariance count as zero
    tol = top * cov.shape[0] * np.finfo(np.float64).eps * 10
    evals = np.where(evals > tol, evals, 0.0)
    evecs = _fix_signs(evecs)

    vec_tol = np.sqrt(np.finfo(np.float64).eps)
    order = sorted(range(evals.size), key=lambda i: (-evals[i], _first_nonzero(evecs[:, i], vec_tol)))
    evals = evals[order]
    evecs = evecs[:, order]

    cum = np.cumsum(evals)
    total = float(cum[-1])
    ratio = cum / total
    k = int(np.searchsorted(ratio, variance_target, side="left")) + 1
    k = min(k, int(np.count_nonzero(evals)))
    return PcaModel(
        train.feature_names,
        mean,
        scale,
        np.ascontiguousarray(evecs[:, :k].T),
        evals[:k].copy(),
        float(variance_target),
        total,
    )


def project(table: FeatureTable, model: PcaModel) -> FeatureTable:
    """Project rows onto the fitted components; side columns are kept."""
    if table.feature_names != model.feature_names:
        raise SchemaError(
            f"PCA was fitted on {list(model.feature_names)}, table has {list(table.feature_names)}"
        )
    z = (table.values - model.mean) / model.scale
    return table.with_features(model.output_names, z @ model.components.T)

"""Principal component analysis on flattened maps (eigen-maps)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, NumericError
from .linalg import fix_signs, sym_eig
from .preprocess import normalize_gray

# Gram (N x N) path is used whenever D exceeds this multiple of N
GRAM_RATIO = 4


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # D x P, orthonormal columns
    eigenvalues: np.ndarray  # scatter eigenvalues, descending
    map_dims: tuple

    @property
    def n_features(self) -> int:
        return self.components.shape[1]

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def project(self, x) -> np.ndarray:
        return project_pca(self, x)

    def truncate(self, p: int) -> "PcaModel":
        """Model with the leading ``p`` components; equal to refitting with ``p``."""
        if not 1 <= p <= self.n_features:
            raise DimensionError(f"p={p} outside 1..{self.n_features}")
        return PcaModel(self.mean, self.components[:, :p].copy(), self.eigenvalues[:p].copy(), self.map_dims)


def _as_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        x = x.reshape(x.shape[0], -1)
    if not np.all(np.isfinite(x)):
        raise NumericError("data contains non-finite values")
    return x


def scatter_eig(centered: np.ndarray, p: int, method: str = "auto"):
    """Top-``p`` eigenpairs of ``S_T = B^T B`` for centered rows ``B`` (N x D).

    ``method='gram'`` decomposes the N x N matrix ``B B^T`` and maps each
    eigenvector back through ``B^T``; ``'direct'`` decomposes the D x D scatter.
    """
    n, d = centered.shape
    if method == "auto":
        method = "gram" if d > GRAM_RATIO * n else "direct"
    if method not in ("direct", "gram"):
        raise ValueError(f"unknown method {method!r}")
    pairs = sym_eig(centered.T @ centered if method == "direct" else centered @ centered.T)
    values = pairs.values[:p].copy()
    if values[-1] <= 1e-12 * max(pairs.values[0], 0.0):
        raise NumericError(f"training data has rank below the requested {p} components")
    if method == "direct":
        return values, pairs.vectors[:, :p].copy()
    u = centered.T @ pairs.vectors[:, :p]
    u /= np.linalg.norm(u, axis=0)
    return values, fix_signs(u)


def fit_pca(data, p: int, map_dims=None, method: str = "auto") -> PcaModel:
    """Fit a ``p``-component PCA on N samples (rows, or maps flattened row-major).

    Eigenvalues are those of the unnormalised scatter matrix, not the covariance.
    """
    raw = np.asarray(data, dtype=float)
    if map_dims is None:
        map_dims = tuple(raw.shape[1:]) if raw.ndim > 2 else (raw.shape[1],)
    x = _as_data(raw)
    n, d = x.shape
    if n < 2:
        raise DegenerateLabelsError(f"PCA needs at least 2 samples, got {n}")
    if not 1 <= p <= min(n - 1, d):
        raise DimensionError(f"p={p} outside 1..{min(n - 1, d)}")
    if int(np.prod(map_dims)) != d:
        raise DimensionError(f"map_dims {map_dims} do not match D={d}")
    mean = x.mean(axis=0)
    values, vectors = scatter_eig(x - mean, p, method)
    return PcaModel(mean, vectors, np.maximum(values, 0.0), tuple(int(v) for v in map_dims))


def _as_rows(model: PcaModel, x) -> np.ndarray:
    """Accept a vector, a batch of vectors, or map-shaped input(s)."""
    x = np.asarray(x, dtype=float)
    dims = model.map_dims
    if len(dims) > 1:
        if x.shape == dims:
            x = x.reshape(-1)
        elif x.shape[1:] == dims:
            x = x.reshape(x.shape[0], -1)
    if x.shape[-1] != model.dim:
        raise DimensionError(f"expected length {model.dim}, got {x.shape[-1]}")
    return x


def project_pca(model: PcaModel, x) -> np.ndarray:
    """``U^T (x - mean)``; accepts one vector or a batch of rows."""
    x = _as_rows(model, x)
    return (x - model.mean) @ model.components


def reconstruct(model: PcaModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.n_features:
        raise DimensionError(f"expected {model.n_features} features, got {y.shape[-1]}")
    return model.mean + y @ model.components.T


def display_map(vector, dims) -> np.ndarray:
    return normalize_gray(np.asarray(vector, dtype=float).reshape(tuple(dims)))


def eigen_map(model: PcaModel, p: int, raw: bool = False) -> np.ndarray:
    """Component ``p`` (1-based) reshaped to the map grid and scaled to [0, 255]."""
    if not 1 <= p <= model.n_features:
        raise DimensionError(f"component index {p} outside 1..{model.n_features}")
    u = model.components[:, p - 1]
    if raw:
        return u.reshape(model.map_dims)
    return display_map(u, model.map_dims)

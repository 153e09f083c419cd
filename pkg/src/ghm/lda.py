"""Two-stage PCA + LDA (Fisher) projector on flattened maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, SingularityError
from .linalg import gen_sym_eig, ridge
from .pca import PcaModel, _as_rows, display_map, fit_pca, project_pca

RIDGE_FACTOR = 1e-8


@dataclass(frozen=True)
class FisherModel:
    pca: PcaModel
    lda_components: np.ndarray  # P x P'
    eigenvalues: np.ndarray  # generalized eigenvalues, descending
    combined: np.ndarray  # D x P' = pca.components @ lda_components
    class_means: np.ndarray  # c x D
    classes: np.ndarray
    ridged: bool = False

    @property
    def mean(self) -> np.ndarray:
        return self.pca.mean

    @property
    def map_dims(self) -> tuple:
        return self.pca.map_dims

    @property
    def n_features(self) -> int:
        return self.combined.shape[1]

    def project(self, x) -> np.ndarray:
        return project_fisher(self, x)


def class_scatter(z: np.ndarray, labels: np.ndarray, classes=None):
    """Between- and within-class scatter of rows ``z`` (within uses class means)."""
    labels = np.asarray(labels)
    classes = np.unique(labels) if classes is None else np.asarray(classes)
    mu = z.mean(axis=0)
    dim = z.shape[1]
    s_b = np.zeros((dim, dim))
    s_w = np.zeros((dim, dim))
    for c in classes:
        zc = z[labels == c]
        if zc.shape[0] == 0:
            raise DegenerateLabelsError(f"class {c!r} has no samples")
        mc = zc.mean(axis=0)
        d = mc - mu
        s_b += zc.shape[0] * np.outer(d, d)
        dc = zc - mc
        s_w += dc.T @ dc
    return s_b, s_w


def fisher_directions(s_b, s_w, k: int):
    """Leading ``k`` generalized eigenpairs, with a ridge fallback on ``s_w``."""
    try:
        return gen_sym_eig(s_b, s_w, k), False
    except SingularityError:
        pass
    try:
        return gen_sym_eig(s_b, ridge(s_w, RIDGE_FACTOR), k), True
    except SingularityError as exc:
        raise SingularityError(f"within-class scatter is singular even after ridge: {exc}") from None


def lda_on_pca(pca: PcaModel, data, labels, p_prime: int | None = None) -> FisherModel:
    """Second (LDA) stage on top of an already fitted PCA model."""
    x = _as_rows(pca, data)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    c = classes.shape[0]
    if c < 2:
        raise DegenerateLabelsError("LDA needs at least two classes")
    p = pca.n_features
    if p_prime is None:
        p_prime = min(p, c - 1)
    if not 1 <= p_prime <= min(p, c - 1):
        raise DimensionError(f"p_prime={p_prime} exceeds the rank bound min(P={p}, c-1={c - 1})")
    z = project_pca(pca, x)
    s_b, s_w = class_scatter(z, labels, classes)
    pairs, ridged = fisher_directions(s_b, s_w, p_prime)
    w_lda = pairs.vectors
    class_means = np.stack([x[labels == k].mean(axis=0) for k in classes])
    return FisherModel(
        pca=pca,
        lda_components=w_lda,
        eigenvalues=pairs.values,
        combined=pca.components @ w_lda,
        class_means=class_means,
        classes=classes,
        ridged=ridged,
    )


def fit_pca_lda(data, labels, p: int, p_prime: int | None = None, map_dims=None) -> FisherModel:
    """PCA to ``p`` dimensions, then Fisher LDA to ``p_prime <= c - 1`` dimensions.

    ``p`` must not exceed ``N - c`` so that the within-class scatter in PCA
    space can be full rank.
    """
    raw = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    if raw.shape[0] != labels.shape[0]:
        raise DimensionError(f"{raw.shape[0]} samples but {labels.shape[0]} labels")
    n = raw.shape[0]
    c = np.unique(labels).shape[0]
    if c < 2:
        raise DegenerateLabelsError("LDA needs at least two classes")
    if not 1 <= p <= n - c:
        raise DimensionError(f"p={p} outside 1..N-c={n - c}")
    pca = fit_pca(raw, p, map_dims=map_dims)
    return lda_on_pca(pca, raw, labels, p_prime)


def project_fisher(model: FisherModel, x) -> np.ndarray:
    x = _as_rows(model.pca, x)
    return (x - model.pca.mean) @ model.combined


def discriminant_map(model: FisherModel, p: int, raw: bool = False) -> np.ndarray:
    """Column ``p`` (1-based) of the combined projection as a [0, 255] map."""
    if not 1 <= p <= model.n_features:
        raise DimensionError(f"discriminant index {p} outside 1..{model.n_features}")
    u = model.combined[:, p - 1]
    if raw:
        return u.reshape(model.map_dims)
    return display_map(u, model.map_dims)

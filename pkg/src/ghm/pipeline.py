"""Subspace learner + ECOC-SVM chain with one interface for all three methods."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .lda import FisherModel, fit_pca_lda, lda_on_pca
from .pca import PcaModel, fit_pca
from .svm import EcocClassifier, train_ecoc
from .umlda import UmldaModel, fit_rumlda

METHODS = ("pca", "pca_lda", "rumlda")


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "rumlda"
    p: int = 3
    p_prime: int | None = None  # pca_lda only; defaults to min(p, c - 1)
    gamma: float = 1e-2
    max_iter: int = 20
    tol: float = 1e-6
    svm_c: float = 1.0
    svm_scale: float | str = "median"
    svm_tol: float = 1e-3
    coding: str = "ovo"
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if int(self.p) < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.p_prime is not None and int(self.p_prime) < 1:
            raise ConfigError(f"p_prime must be >= 1, got {self.p_prime}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not self.svm_c > 0:
            raise ConfigError(f"svm_c must be positive, got {self.svm_c}")
        if isinstance(self.svm_scale, str):
            if self.svm_scale != "median":
                raise ConfigError(f"svm_scale must be a positive number or 'median', got {self.svm_scale!r}")
        elif not self.svm_scale > 0:
            raise ConfigError(f"svm_scale must be positive, got {self.svm_scale}")
        if self.coding not in ("ovo", "dense"):
            raise ConfigError(f"unknown coding {self.coding!r}; expected ovo or dense")
        if int(self.threads) < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def with_p(self, p: int) -> "PipelineConfig":
        d = asdict(self)
        d["p"] = int(p)
        return PipelineConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Pipeline:
    config: PipelineConfig
    subspace: PcaModel | FisherModel | UmldaModel
    classifier: EcocClassifier

    @property
    def classes(self) -> np.ndarray:
        return self.classifier.classes

    def features(self, x) -> np.ndarray:
        return self.subspace.project(x)

    def scores(self, x) -> np.ndarray:
        return self.classifier.scores(self.features(x))

    def predict(self, x):
        return self.classifier.predict(self.features(x))


def rank_bound(method: str, n: int, n_classes: int, dims) -> int:
    """Largest admissible P for ``n`` training samples of shape ``dims``."""
    d = int(np.prod(dims))
    if method == "pca":
        return min(n - 1, d)
    if method == "pca_lda":
        return min(n - n_classes, d)
    if len(dims) < 2:
        raise DimensionError("rumlda needs map- or pair-shaped samples, not vectors")
    return min(n - 1, dims[0], dims[1])


def fit_base(x, labels, cfg: PipelineConfig, p: int):
    """Subspace model fitted once at ``p`` features; see :func:`specialize`.

    For ``pca_lda`` the base is the PCA stage alone, since the LDA stage must be
    refitted for every truncation.
    """
    x = np.asarray(x, dtype=float)
    if cfg.method == "pca":
        return fit_pca(x, p)
    if cfg.method == "pca_lda":
        n = x.shape[0]
        c = np.unique(labels).shape[0]
        if not 1 <= p <= n - c:
            raise DimensionError(f"p={p} outside 1..N-c={n - c}")
        return fit_pca(x, p)
    return fit_rumlda(x, labels, p, gamma=cfg.gamma, max_iter=cfg.max_iter, tol=cfg.tol)


def specialize(base, x, labels, cfg: PipelineConfig, p: int):
    """The model a direct fit at ``p`` features would give, derived from ``base``."""
    if p == base.n_features and cfg.method != "pca_lda":
        return base
    if cfg.method == "pca_lda":
        p_prime = None if cfg.p_prime is None else min(cfg.p_prime, p)
        return lda_on_pca(base.truncate(p), x, labels, p_prime)
    return base.truncate(p)


def fit_subspace(x, labels, cfg: PipelineConfig):
    if cfg.method == "pca_lda":
        return fit_pca_lda(x, labels, cfg.p, cfg.p_prime)
    return fit_base(x, labels, cfg, cfg.p)


def train_classifier(features, labels, cfg: PipelineConfig) -> EcocClassifier:
    return train_ecoc(
        features, labels, c=cfg.svm_c, scale=cfg.svm_scale, tol=cfg.svm_tol, coding=cfg.coding, threads=cfg.threads
    )


def attach_classifier(subspace, x, labels, cfg: PipelineConfig) -> Pipeline:
    return Pipeline(cfg, subspace, train_classifier(subspace.project(x), labels, cfg))


def fit_pipeline(x, labels, cfg: PipelineConfig) -> Pipeline:
    """Fit the subspace learner, then the ECOC-SVM on its training features."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    if x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape[0]} samples but {labels.shape[0]} labels")
    return attach_classifier(fit_subspace(x, labels, cfg), x, labels, cfg)

"""Regularized uncorrelated multilinear discriminant analysis (R-UMLDA).

Each feature is one elementary multilinear projection (EMP): a unit vector
per tensor mode, found by alternating mode-wise generalized eigenproblems.
Features are extracted greedily; feature ``p`` is decorrelated from features
``1..p-1`` by Gram-Schmidt deflation over the training samples, and that
deflation is part of the objective while the EMP is being searched, so each
EMP maximises the Fisher ratio of the feature that is actually kept.

The regularised objective for one EMP is::

    J = b / (w + gamma * r)

where ``b`` and ``w`` are the between- and within-class scatter of the
(deflated) scalar feature and ``r`` is a fixed scale: the within-class
scatter of the feature obtained with the uniform initial EMP. For unit mode
vectors the mode-``m`` update maximising ``J`` is the leading eigenvector of
``S_B^(m) u = lam (S_W^(m) + gamma r I) u``, so ``J`` never decreases.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, NumericError, SingularityError
from .lda import class_scatter
from .linalg import fix_signs, gen_sym_eig, ridge
from .preprocess import normalize_gray

log = logging.getLogger(__name__)

DEFAULT_GAMMA = 1e-2
DEFAULT_MAX_ITER = 20
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class Emp:
    vectors: tuple  # one unit vector per mode

    @property
    def order(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class UmldaModel:
    emps: tuple
    mean: np.ndarray
    gamma: float
    deflation: np.ndarray  # P x P, strictly lower triangular regression weights
    training_features: np.ndarray  # N x P, decorrelated
    classes: np.ndarray
    reg_scale: float
    fisher_history: tuple = field(default=(), compare=False)
    converged: tuple = field(default=(), compare=False)

    @property
    def order(self) -> int:
        return self.mean.ndim

    @property
    def dims(self) -> tuple:
        return tuple(self.mean.shape)

    @property
    def map_dims(self) -> tuple:
        return self.dims[:2]

    @property
    def n_features(self) -> int:
        return len(self.emps)

    def project(self, t) -> np.ndarray:
        return project_tvp(self, t)

    def truncate(self, p: int) -> "UmldaModel":
        """Leading ``p`` features; identical to a fit with ``p`` (extraction is greedy)."""
        if not 1 <= p <= self.n_features:
            raise DimensionError(f"p={p} outside 1..{self.n_features}")
        return UmldaModel(
            emps=self.emps[:p],
            mean=self.mean,
            gamma=self.gamma,
            deflation=self.deflation[:p, :p].copy(),
            training_features=self.training_features[:, :p].copy(),
            classes=self.classes,
            reg_scale=self.reg_scale,
            fisher_history=self.fisher_history[:p],
            converged=self.converged[:p],
        )


def _einsum_spec(order: int, skip: int | None) -> str:
    letters = string.ascii_lowercase[1 : order + 1]
    ops = ",".join(letters[m] for m in range(order) if m != skip)
    out = "a" + (letters[skip] if skip is not None else "")
    return f"a{letters},{ops}->{out}"


def contract_except(x: np.ndarray, vectors, skip: int | None) -> np.ndarray:
    """Contract every mode of the batch ``x`` (N, d1, ..., dM) except ``skip`` (0-based).

    Returns (N, d_skip), or (N,) when ``skip`` is None.
    """
    order = x.ndim - 1
    ops = [vectors[m] for m in range(order) if m != skip]
    return np.einsum(_einsum_spec(order, skip), x, *ops, optimize=True)


class _Deflator:
    """Projects sample-indexed vectors onto the complement of earlier features."""

    def __init__(self, n: int):
        self.cols: list[np.ndarray] = []
        self.norms: list[float] = []
        self.n = n

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        coef = np.zeros((len(self.cols),) + v.shape[1:])
        for q, (g, nn) in enumerate(zip(self.cols, self.norms)):
            if nn > 0.0:
                coef[q] = np.tensordot(g, v, axes=(0, 0)) / nn
        return coef

    def apply(self, v: np.ndarray) -> np.ndarray:
        # modified Gram-Schmidt: project sequentially for stability
        out = np.array(v, dtype=float, copy=True)
        for g, nn in zip(self.cols, self.norms):
            if nn > 0.0:
                out -= np.multiply.outer(g, np.tensordot(g, out, axes=(0, 0)) / nn)
        return out

    def add(self, g: np.ndarray) -> None:
        self.cols.append(g)
        self.norms.append(float(g @ g))


def _scalar_scatter(g: np.ndarray, labels: np.ndarray, classes) -> tuple[float, float]:
    mu = g.mean()
    b = 0.0
    w = 0.0
    for c in classes:
        gc = g[labels == c]
        mc = gc.mean()
        b += gc.shape[0] * (mc - mu) ** 2
        w += float(((gc - mc) ** 2).sum())
    return b, w


def mode_scatter(xc, labels, vectors, mode: int, deflator: _Deflator | None = None, classes=None):
    """Between/within scatter of the mode-``mode`` (0-based) sample vectors."""
    v = contract_except(xc, vectors, mode)
    if deflator is not None:
        v = deflator.apply(v)
    return class_scatter(v, labels, classes)


def _uniform(dims) -> list[np.ndarray]:
    return [np.full(d, 1.0 / np.sqrt(d)) for d in dims]


def _leading(s_b, s_w_reg) -> np.ndarray:
    try:
        pairs = gen_sym_eig(s_b, s_w_reg, 1)
    except SingularityError:
        pairs = gen_sym_eig(s_b, ridge(s_w_reg, 1e-10), 1)
    u = pairs.vectors[:, 0]
    u = u / np.linalg.norm(u)
    return fix_signs(u)


def _validate(data, labels):
    x = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    if x.ndim not in (3, 4):
        raise DimensionError(f"expected N second- or third-order tensors, got array of shape {x.shape}")
    if x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape[0]} samples but {labels.shape[0]} labels")
    if not np.all(np.isfinite(x)):
        raise NumericError("data contains non-finite values")
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise DegenerateLabelsError("between-class scatter is zero: need at least two classes")
    return x, labels, classes


def fit_rumlda(
    data,
    labels,
    p: int,
    gamma: float = DEFAULT_GAMMA,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> UmldaModel:
    """Extract ``p`` decorrelated EMP features from N labelled tensors.

    ``data`` has shape (N, d1, d2) for maps or (N, d1, d2, d3) for pairs.
    Iterations for one EMP stop once the regularised Fisher ratio improves by
    less than ``tol`` relatively; EMPs that hit ``max_iter`` are kept with a
    ``converged`` flag of False.
    """
    x, labels, classes = _validate(data, labels)
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    n = x.shape[0]
    dims = x.shape[1:]
    bound = min(n - 1, *dims[:2])
    if not 1 <= p <= bound:
        raise DimensionError(f"p={p} outside 1..{bound}")

    mean = x.mean(axis=0)
    xc = x - mean

    g0 = contract_except(xc, _uniform(dims), None)
    _, r = _scalar_scatter(g0, labels, classes)
    if not r > 0.0:
        r = float(np.sum([((xc[labels == c] - xc[labels == c].mean(axis=0)) ** 2).sum() for c in classes]))
        r /= float(np.prod(dims))
    if not r > 0.0:
        r = 1.0

    deflator = _Deflator(n)
    emps = []
    feats = []
    deflation = np.zeros((p, p))
    histories = []
    flags = []
    for k in range(p):
        vectors = _uniform(dims)
        g = deflator.apply(contract_except(xc, vectors, None))
        b, w = _scalar_scatter(g, labels, classes)
        history = [b / (w + gamma * r) if (w + gamma * r) > 0 else 0.0]
        converged = False
        for _ in range(max_iter):
            for m in range(len(dims)):
                s_b, s_w = mode_scatter(xc, labels, vectors, m, deflator, classes)
                vectors[m] = _leading(s_b, s_w + gamma * r * np.eye(dims[m]))
            g = deflator.apply(contract_except(xc, vectors, None))
            b, w = _scalar_scatter(g, labels, classes)
            ratio = b / (w + gamma * r) if (w + gamma * r) > 0 else 0.0
            history.append(ratio)
            prev = history[-2]
            if ratio - prev <= tol * max(abs(prev), 1e-300):
                converged = True
                break
        if not converged:
            log.info("EMP %d did not converge in %d iterations", k + 1, max_iter)
        raw = contract_except(xc, vectors, None)
        deflation[k, :k] = deflator.coefficients(raw)
        # same arithmetic as project_tvp so training features are reproduced exactly
        y = raw - (np.stack(feats, axis=1) @ deflation[k, :k] if feats else 0.0)
        deflator.add(y)
        feats.append(y)
        emps.append(Emp(tuple(v.copy() for v in vectors)))
        histories.append(np.array(history))
        flags.append(converged)

    return UmldaModel(
        emps=tuple(emps),
        mean=mean,
        gamma=float(gamma),
        deflation=deflation,
        training_features=np.stack(feats, axis=1),
        classes=classes,
        reg_scale=float(r),
        fisher_history=tuple(histories),
        converged=tuple(flags),
    )


def raw_projection(model: UmldaModel, t) -> np.ndarray:
    """EMP contractions of centred input(s) before decorrelation, shape (..., P)."""
    t = np.asarray(t, dtype=float)
    single = t.shape == model.dims
    if single:
        t = t[None]
    if t.shape[1:] != model.dims:
        raise DimensionError(f"expected tensors of shape {model.dims}, got {t.shape[1:]}")
    tc = t - model.mean
    z = np.stack([contract_except(tc, e.vectors, None) for e in model.emps], axis=1)
    return z[0] if single else z


def project_tvp(model: UmldaModel, t) -> np.ndarray:
    """Decorrelated features: raw contractions with the training-time deflation applied."""
    z = raw_projection(model, t)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    y = np.empty_like(z)
    for k in range(model.n_features):
        y[:, k] = z[:, k] - y[:, :k] @ model.deflation[k, :k]
    return y[0] if single else y


def emp_map(model: UmldaModel, p: int, raw: bool = False) -> np.ndarray:
    """Rank-one (time x frequency) map ``u1 u2^T`` of EMP ``p`` (1-based), scaled to [0, 255]."""
    if not 1 <= p <= model.n_features:
        raise DimensionError(f"EMP index {p} outside 1..{model.n_features}")
    u = model.emps[p - 1].vectors
    m = np.outer(u[0], u[1])
    return m if raw else normalize_gray(m)

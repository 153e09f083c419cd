"""Gaussian-kernel soft-margin SVM (SMO solver) and ECOC multiclass wrapper."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, NumericError

DEFAULT_C = 1.0
DEFAULT_SCALE = 1.0
DEFAULT_TOL = 1e-3
_TAU = 1e-12


def gaussian_kernel(x1, x2, scale: float = DEFAULT_SCALE) -> float:
    """``exp(-||x1 - x2||^2 / scale)``; ``scale = 1`` is the plain Gaussian kernel."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise DimensionError(f"vector shapes differ: {x1.shape} vs {x2.shape}")
    if not scale > 0:
        raise ValueError(f"kernel scale must be positive, got {scale}")
    d = x1 - x2
    return float(np.exp(-(d @ d) / scale))


def sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a2 = np.einsum("ij,ij->i", a, a)
    b2 = np.einsum("ij,ij->i", b, b)
    d = a2[:, None] + b2[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d, 0.0)


def kernel_matrix(a, b, scale: float = DEFAULT_SCALE) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return np.exp(-sq_distances(a, b) / scale)


def median_scale(xs) -> float:
    """Median squared pairwise distance between distinct training points (1.0 if degenerate)."""
    xs = np.asarray(xs, dtype=float)
    if xs.shape[0] < 2:
        return 1.0
    d = sq_distances(xs, xs)
    vals = d[np.triu_indices(xs.shape[0], 1)]
    med = float(np.median(vals))
    return med if med > 0 else 1.0


def resolve_scale(scale, xs) -> float:
    if isinstance(scale, str):
        if scale != "median":
            raise ValueError(f"unknown kernel scale rule {scale!r}")
        return median_scale(xs)
    scale = float(scale)
    if not scale > 0:
        raise ValueError(f"kernel scale must be positive, got {scale}")
    return scale


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray  # S x d
    weights: np.ndarray  # signed alpha_j * y_j
    bias: float
    scale: float
    box_c: float
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, x) -> np.ndarray | float:
        return decision(self, x)


def _canonical_order(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    keys = tuple(xs[:, k] for k in range(xs.shape[1] - 1, -1, -1)) + (ys,)
    return np.lexsort(keys)


def _smo(k: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int):
    """Dual coordinate pairs with maximal-violating-pair selection.

    Minimises ``0.5 a^T Q a - sum(a)`` with ``Q = y y^T * K``, ``0 <= a <= c``,
    ``y^T a = 0``. Returns (alpha, gradient, iterations).
    """
    n = y.shape[0]
    q = (y[:, None] * y[None, :]) * k
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    for it in range(max_iter):
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        score = -y * grad
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        if s_up[i] - s_low[j] <= tol:
            return alpha, grad, it
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(q[i, i] + q[j, j] + 2.0 * q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            new_i = ai + delta
            new_j = aj + delta
            if diff > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, diff
            elif new_i < 0:
                new_i, new_j = 0.0, -diff
            if diff > 0:
                if new_i > c:
                    new_i, new_j = c, c - diff
            elif new_j > c:
                new_j, new_i = c, c + diff
        else:
            quad = max(q[i, i] + q[j, j] - 2.0 * q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            new_i = ai - delta
            new_j = aj + delta
            if total > c:
                if new_i > c:
                    new_i, new_j = c, total - c
            elif new_j < 0:
                new_j, new_i = 0.0, total
            if total > c:
                if new_j > c:
                    new_j, new_i = c, total - c
            elif new_i < 0:
                new_i, new_j = 0.0, total
        d_i = new_i - ai
        d_j = new_j - aj
        alpha[i] = new_i
        alpha[j] = new_j
        grad += q[:, i] * d_i + q[:, j] * d_j
    raise NumericError(f"SMO did not reach tolerance {tol} within {max_iter} iterations")


def _bias(alpha, grad, y, c) -> float:
    score = -y * grad
    free = (alpha > 0) & (alpha < c)
    if np.any(free):
        return float(score[free].mean())
    pos = y > 0
    up = np.where(pos, alpha < c, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < c)
    hi = score[up].max() if np.any(up) else score[low].min()
    lo = score[low].min() if np.any(low) else hi
    return float(0.5 * (hi + lo))


def train_binary_svm(
    xs,
    ys,
    c: float = DEFAULT_C,
    scale=DEFAULT_SCALE,
    tol: float = DEFAULT_TOL,
    max_iter: int = 1_000_000,
) -> BinarySvm:
    """Soft-margin SVM with Gaussian kernel, trained by SMO.

    Samples are put in a canonical order first, so the result does not
    depend on the order in which they are supplied.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.shape[0] != ys.shape[0]:
        raise DimensionError(f"{xs.shape[0]} samples but {ys.shape[0]} labels")
    if not np.all(np.isfinite(xs)):
        raise NumericError("features contain non-finite values")
    if not np.all(np.isin(ys, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not (np.any(ys > 0) and np.any(ys < 0)):
        raise DegenerateLabelsError("binary SVM needs both labels present")
    if not c > 0:
        raise ValueError(f"box constraint must be positive, got {c}")
    scale = resolve_scale(scale, xs)
    order = _canonical_order(xs, ys)
    xs = xs[order]
    ys = ys[order]
    k = kernel_matrix(xs, xs, scale)
    alpha, grad, iters = _smo(k, ys, float(c), tol, max_iter)
    b = _bias(alpha, grad, ys, c)
    keep = alpha > 0
    return BinarySvm(
        support_vectors=xs[keep].copy(),
        weights=(alpha * ys)[keep].copy(),
        bias=b,
        scale=scale,
        box_c=float(c),
        iterations=iters,
    )


def decision(svm: BinarySvm, x):
    """``sum_j w_j K(sv_j, x) + b``; one vector gives a float, rows give an array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != svm.dim:
        raise DimensionError(f"expected {svm.dim} features, got {x2.shape[1]}")
    if svm.support_vectors.shape[0] == 0:
        out = np.full(x2.shape[0], svm.bias)
    else:
        out = kernel_matrix(x2, svm.support_vectors, svm.scale) @ svm.weights + svm.bias
    return float(out[0]) if single else out


def dual_objective(xs, ys, alpha, c: float, scale: float) -> float:
    """``sum(a) - 0.5 a^T Q a`` of the SVM dual (to be maximised)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k = kernel_matrix(xs, xs, scale)
    ay = alpha * ys
    return float(alpha.sum() - 0.5 * ay @ k @ ay)


def recover_alpha(svm: BinarySvm, xs, ys) -> np.ndarray:
    """Dual variables aligned to ``xs`` (zero for non-support vectors)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    alpha = np.zeros(xs.shape[0])
    for sv, w in zip(svm.support_vectors, svm.weights):
        hits = np.where(np.all(xs == sv, axis=1) & (np.sign(w) == ys))[0]
        if hits.size:
            alpha[hits[0]] = abs(w)
    return alpha


# ---------------------------------------------------------------- ECOC


def one_vs_one_coding(n_classes: int) -> np.ndarray:
    pairs = list(itertools.combinations(range(n_classes), 2))
    code = np.zeros((n_classes, len(pairs)), dtype=int)
    for col, (a, b) in enumerate(pairs):
        code[a, col] = 1
        code[b, col] = -1
    return code


def dense_coding(n_classes: int) -> np.ndarray:
    """Exhaustive code: every split of the classes into two non-empty groups once."""
    cols = []
    for mask in range(1, 2 ** (n_classes - 1)):
        # class 0 always +1, remaining classes by bits of mask
        col = [1] + [(-1 if (mask >> (k - 1)) & 1 else 1) for k in range(1, n_classes)]
        cols.append(col)
    return np.array(cols, dtype=int).T


@dataclass(frozen=True)
class EcocClassifier:
    coding: np.ndarray  # c x L in {-1, 0, +1}
    learners: tuple
    classes: np.ndarray

    @property
    def dim(self) -> int:
        return self.learners[0].dim

    def scores(self, x) -> np.ndarray:
        return ecoc_scores(self, x)

    def predict(self, x):
        return predict_ecoc(self, x)


def train_ecoc(
    features,
    labels,
    c: float = DEFAULT_C,
    scale=DEFAULT_SCALE,
    tol: float = DEFAULT_TOL,
    coding: str = "ovo",
    threads: int = 1,
) -> EcocClassifier:
    """Train one binary SVM per coding column.

    A ``"median"`` kernel scale is resolved once on all training features, so
    every learner shares the same kernel.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    labels = np.asarray(labels)
    if x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape[0]} samples but {labels.shape[0]} labels")
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise DegenerateLabelsError("ECOC needs at least two classes")
    if coding == "ovo":
        code = one_vs_one_coding(classes.shape[0])
    elif coding == "dense":
        code = dense_coding(classes.shape[0])
    else:
        raise ValueError(f"unknown coding {coding!r}")
    scale = resolve_scale(scale, x)
    idx = np.searchsorted(classes, labels)

    def fit_column(col):
        cv = code[idx, col]
        sel = cv != 0
        return train_binary_svm(x[sel], cv[sel].astype(float), c=c, scale=scale, tol=tol)

    cols = range(code.shape[1])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            learners = tuple(pool.map(fit_column, cols))
    else:
        learners = tuple(fit_column(col) for col in cols)
    return EcocClassifier(coding=code, learners=learners, classes=classes)


def ecoc_scores(clf: EcocClassifier, x) -> np.ndarray:
    """Learner scores, shape (L,) for one vector or (N, L) for rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    s = np.stack([np.atleast_1d(decision(learner, x2)) for learner in clf.learners], axis=1)
    return s[0] if single else s


def hinge_losses(coding: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Per-class mean hinge loss over the class's non-zero code entries."""
    scores = np.atleast_2d(scores)
    mask = coding != 0
    loss = np.maximum(0.0, 1.0 - coding[None, :, :] * scores[:, None, :])
    loss = np.where(mask[None], loss, 0.0).sum(axis=2)
    return loss / mask.sum(axis=1)[None, :]


def predict_ecoc(clf: EcocClassifier, x):
    """Loss-weighted decoding; ties go to the lowest class index."""
    x = np.asarray(x)
    single = x.ndim == 1
    s = np.atleast_2d(ecoc_scores(clf, x))
    idx = np.argmin(hinge_losses(clf.coding, s), axis=1)
    pred = clf.classes[idx]
    return pred[0] if single else pred


def predict_majority(clf: EcocClassifier, x):
    """Majority vote over learner signs (ties to the lowest class index)."""
    x = np.asarray(x)
    single = x.ndim == 1
    s = np.atleast_2d(ecoc_scores(clf, x))
    votes = (np.sign(s)[:, None, :] == clf.coding[None, :, :]) & (clf.coding[None] != 0)
    idx = np.argmax(votes.sum(axis=2), axis=1)
    pred = clf.classes[idx]
    return pred[0] if single else pred

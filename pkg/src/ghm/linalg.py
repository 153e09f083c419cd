"""Dense eigen-solvers and third-order tensor primitives.

The symmetric eigensolver is the cyclic (row-by-row) Jacobi method, compiled
with numba. Jacobi gives eigenvectors orthogonal to working precision, which
the downstream eigen-map and decorrelation checks depend on.

Tensor layout: ``mode_unfold`` places mode-``m`` fibers in columns, with the
remaining indices ordered lower-numbered mode fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from numba import njit

from .errors import DimensionError, NumericError, SingularityError

__all__ = [
    "EigenPairs",
    "sym_eig",
    "gen_sym_eig",
    "cholesky",
    "fix_signs",
    "mode_unfold",
    "mode_refold",
    "mode_vec_product",
    "multi_vec_product",
]

_MAX_SWEEPS = 60


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues sorted descending and matching unit eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def top(self, k: int) -> "EigenPairs":
        return EigenPairs(self.values[:k].copy(), self.vectors[:, :k].copy())

    def __len__(self) -> int:
        return self.values.shape[0]


def _as_square(a, name="a") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its entry of largest magnitude is positive.

    Ties in magnitude resolve to the lowest row index.
    """
    v = np.array(vectors, dtype=float, copy=True)
    if v.ndim == 1:
        return v if v[np.argmax(np.abs(v))] >= 0 else -v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[idx, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    return v * signs


@njit(cache=True)
def _jacobi_sweeps(a, tol, max_sweeps):
    """Cyclic-by-row Jacobi on a copy of ``a``; returns (diag, V, sweeps or -1)."""
    n = a.shape[0]
    w = a.copy()
    vt = np.eye(n)
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += w[i, j] * w[i, j]
        if np.sqrt(2.0 * off) <= tol:
            return np.diag(w).copy(), vt.T.copy(), sweep
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                app = w[p, p]
                aqq = w[q, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * (abs(app) + abs(aqq)):
                    continue
                rotated = True
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    if k == p or k == q:
                        continue
                    wpk = w[p, k]
                    wqk = w[q, k]
                    npk = c * wpk - s * wqk
                    nqk = s * wpk + c * wqk
                    w[p, k] = npk
                    w[q, k] = nqk
                    w[k, p] = npk
                    w[k, q] = nqk
                w[p, p] = app - t * apq
                w[q, q] = aqq + t * apq
                w[p, q] = 0.0
                w[q, p] = 0.0
                for k in range(n):
                    vp = vt[p, k]
                    vq = vt[q, k]
                    vt[p, k] = c * vp - s * vq
                    vt[q, k] = s * vp + c * vq
        if not rotated:
            return np.diag(w).copy(), vt.T.copy(), sweep
    return np.diag(w).copy(), vt.T.copy(), -1


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        n = a.shape[0]
        return np.zeros(n), np.eye(n)
    values, vectors, sweeps = _jacobi_sweeps(np.ascontiguousarray(a), 1e-15 * scale, _MAX_SWEEPS)
    if sweeps < 0:
        raise NumericError("Jacobi iteration did not converge")
    return values, vectors


def sym_eig(a) -> EigenPairs:
    """Full eigendecomposition of a real symmetric matrix.

    The input is symmetrised as ``(a + a.T) / 2`` first. Eigenvalues are
    returned in descending order; each eigenvector has its largest-magnitude
    entry positive.
    """
    a = _as_square(a)
    a = 0.5 * (a + a.T)
    values, vectors = _jacobi(a)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    # one re-orthonormalisation pass removes accumulated rotation drift
    vectors /= np.linalg.norm(vectors, axis=0)
    return EigenPairs(values, fix_signs(vectors))


def cholesky(w) -> np.ndarray:
    """Lower-triangular ``L`` with ``w = L @ L.T`` (Cholesky-Banachiewicz)."""
    w = _as_square(w, "w")
    n = w.shape[0]
    low = np.zeros_like(w)
    for j in range(n):
        d = w[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            raise SingularityError(f"matrix is not positive definite (pivot {j} = {d:.3e})")
        low[j, j] = np.sqrt(d)
        if j + 1 < n:
            low[j + 1 :, j] = (w[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def _forward(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``low @ x = b`` for lower-triangular ``low``."""
    x = np.zeros_like(b, dtype=float)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def _backward(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``up @ x = b`` for upper-triangular ``up``."""
    n = up.shape[0]
    x = np.zeros_like(b, dtype=float)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1 :] @ x[i + 1 :]) / up[i, i]
    return x


def gen_sym_eig(b, w, k: int | None = None) -> EigenPairs:
    """Top-``k`` pairs of ``b u = lam w u`` for symmetric ``b`` and SPD ``w``.

    Reduces to a standard problem through ``w = L L^T``:
    ``L^-1 b L^-T z = lam z`` and ``u = L^-T z``. Returned vectors satisfy
    ``u.T @ w @ u = 1``; their sign follows the largest-magnitude-positive rule.

    Raises
    ------
    SingularityError
        If ``w`` is not positive definite. Callers may retry with a ridge of
        ``1e-10 * trace(w) / n`` on the diagonal.
    """
    b = _as_square(b, "b")
    w = _as_square(w, "w")
    if b.shape != w.shape:
        raise DimensionError(f"b {b.shape} and w {w.shape} differ in size")
    n = b.shape[0]
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise DimensionError(f"k={k} outside 1..{n}")
    b = 0.5 * (b + b.T)
    w = 0.5 * (w + w.T)
    low = cholesky(w)
    tmp = _forward(low, b)  # L^-1 b
    reduced = _forward(low, tmp.T)  # L^-1 (L^-1 b)^T = L^-1 b L^-T
    pairs = sym_eig(reduced)
    z = pairs.vectors[:, :k]
    u = _backward(low.T, z)
    u = fix_signs(u)
    # u^T w u = z^T z = 1 already; renormalise to absorb rounding
    norms = np.sqrt(np.einsum("ij,ik,kj->j", u, w, u))
    return EigenPairs(pairs.values[:k].copy(), u / norms)


def ridge(w: np.ndarray, factor: float) -> np.ndarray:
    """``w + factor * trace(w) / n * I``; used as the Cholesky fallback."""
    n = w.shape[0]
    tr = float(np.trace(w))
    lift = factor * (tr / n if tr > 0 else 1.0)
    return w + lift * np.eye(n)


# ---------------------------------------------------------------- tensors


def _check_mode(t: np.ndarray, m: int) -> int:
    if not 1 <= m <= t.ndim:
        raise DimensionError(f"mode {m} out of range 1..{t.ndim}")
    return m - 1


def mode_unfold(t, m: int) -> np.ndarray:
    """Mode-``m`` unfolding (``m`` is 1-based) of a tensor.

    Rows are indexed by mode ``m``; columns run over the remaining indices
    with the lower-numbered mode varying fastest.
    """
    t = np.asarray(t, dtype=float)
    ax = _check_mode(t, m)
    moved = np.moveaxis(t, ax, 0)
    return moved.reshape(t.shape[ax], -1, order="F")


def mode_refold(mat, m: int, shape) -> np.ndarray:
    """Inverse of :func:`mode_unfold` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    mat = np.asarray(mat, dtype=float)
    if not 1 <= m <= len(shape):
        raise DimensionError(f"mode {m} out of range 1..{len(shape)}")
    ax = m - 1
    rest = shape[:ax] + shape[ax + 1 :]
    if mat.shape != (shape[ax], int(np.prod(rest))):
        raise DimensionError(f"matrix {mat.shape} cannot refold to {shape} along mode {m}")
    moved = mat.reshape((shape[ax],) + rest, order="F")
    return np.moveaxis(moved, 0, ax)


def mode_vec_product(t, v, m: int) -> np.ndarray:
    """Contract mode ``m`` (1-based) of ``t`` with vector ``v``; order drops by one."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    ax = _check_mode(t, m)
    if v.ndim != 1 or v.shape[0] != t.shape[ax]:
        raise DimensionError(f"vector of length {v.shape} does not match mode {m} size {t.shape[ax]}")
    return np.tensordot(t, v, axes=([ax], [0]))


def multi_vec_product(t, vectors) -> float:
    """Contract every mode of ``t`` with the matching vector (full TVP to a scalar)."""
    t = np.asarray(t, dtype=float)
    if len(vectors) != t.ndim:
        raise DimensionError(f"{len(vectors)} vectors for an order-{t.ndim} tensor")
    out = t
    for v in reversed(vectors):
        out = mode_vec_product(out, v, out.ndim)
    return float(out)

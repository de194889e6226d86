"""Symmetric matrix containers and eigensolvers.

`SparseSymMatrix` stores the upper triangle of a real symmetric matrix once;
every weight matrix and Laplacian in the package is carried in it.
`smallest_eigenpairs` is a block Lanczos iteration with full
reorthogonalization, thick restarts and locking. `dense_eig` is the dense
reference solver used for the degenerate full-spectrum request and as the
oracle in tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class EigenSolverError(RuntimeError):
    """Raised when the Lanczos iteration fails to converge."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Real symmetric sparse matrix stored as upper-triangle triplets.

    Each stored ``(row, col, value)`` with ``row <= col`` stands for both
    ``(row, col)`` and ``(col, row)``. Triplets are kept sorted by
    ``(row, col)``, unique, and nonzero.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and vals must have equal length")
        if self.n < 0:
            raise ValueError("dimension must be nonnegative")
        if rows.size:
            if rows.min() < 0 or cols.max() >= self.n:
                raise ValueError("index out of range")
            if np.any(rows > cols):
                raise ValueError("entries must satisfy row <= col")
            if np.any(vals == 0) or not np.all(np.isfinite(vals)):
                raise ValueError("stored values must be finite and nonzero")
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                raise ValueError("duplicate (row, col) entries")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "cols", _frozen(cols))
        object.__setattr__(self, "vals", _frozen(vals))

    # constructors

    @classmethod
    def from_triplets(cls, n, rows, cols, vals) -> "SparseSymMatrix":
        """Build from possibly unordered triplets; (i, j) and (j, i) are merged
        by mapping to the upper triangle, duplicates are summed and zeros dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        coo = sp.coo_matrix((vals, (lo, hi)), shape=(n, n))
        coo.sum_duplicates()
        keep = coo.data != 0
        return cls(n, coo.row[keep], coo.col[keep], coo.data[keep])

    @classmethod
    def from_dense(cls, a) -> "SparseSymMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix must be exactly symmetric")
        r, c = np.nonzero(np.triu(a))
        return cls(a.shape[0], r, c, a[r, c])

    @classmethod
    def from_scipy(cls, m) -> "SparseSymMatrix":
        up = sp.triu(sp.csr_matrix(m)).tocoo()
        up.sum_duplicates()
        keep = up.data != 0
        return cls(m.shape[0], up.row[keep], up.col[keep], up.data[keep])

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        idx = np.arange(n)
        return cls(n, idx, idx, np.ones(n))

    @classmethod
    def zeros(cls, n: int) -> "SparseSymMatrix":
        empty = np.zeros(0)
        return cls(n, empty, empty, empty)

    # views

    @property
    def nnz_stored(self) -> int:
        return int(self.vals.size)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        m = sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        on = self.rows == self.cols
        d[self.rows[on]] = self.vals[on]
        return d

    def offdiag(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stored strictly-upper entries as ``(rows, cols, vals)``."""
        off = self.rows != self.cols
        return self.rows[off], self.cols[off], self.vals[off]

    def frobenius_norm(self) -> float:
        off = self.rows != self.cols
        sq = np.sum(self.vals[~off] ** 2) + 2.0 * np.sum(self.vals[off] ** 2)
        return float(np.sqrt(sq))

    def __matmul__(self, other):
        return self.csr @ other


def matvec(m: SparseSymMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != m.n:
        raise ValueError(f"vector of length {v.shape[0] if v.ndim else 0} does not match dimension {m.n}")
    return m.csr @ v


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Smallest eigenvalues (ascending) with orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))
        object.__setattr__(self, "vectors", _frozen(np.asarray(self.vectors, dtype=np.float64)))
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.values.size:
            raise ValueError("vectors must be an N x n_e matrix matching values")

    @property
    def n_e(self) -> int:
        return int(self.values.size)


def dense_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues (ascending) and eigenvectors of a dense symmetric matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    return np.linalg.eigh(0.5 * (a + a.T))


def nullity(a, zero_tol: float | None = None) -> int:
    """Number of eigenvalues below ``zero_tol``.

    The default tolerance is ``1e-8 * max(1, largest eigenvalue)``.
    """
    vals, _ = dense_eig(a)
    if vals.size == 0:
        return 0
    if zero_tol is None:
        zero_tol = 1e-8 * max(1.0, float(vals[-1]))
    return int(np.sum(vals < zero_tol))


def _orthonormalize(w: np.ndarray, against: list[np.ndarray], rank_tol: float) -> np.ndarray:
    """Orthogonalize the columns of ``w`` against every block in ``against``
    (two Gram-Schmidt passes), then against each other. Columns that vanish
    are dropped."""
    for _ in range(2):
        for q in against:
            if q.shape[1]:
                w = w - q @ (q.T @ w)
    if w.shape[1] == 0:
        return w
    u, s, _ = np.linalg.svd(w, full_matrices=False)
    keep = s > rank_tol * max(1.0, s[0]) if s.size else s.astype(bool)
    q = u[:, keep]
    # one more pass: the SVD basis may carry tiny components along `against`
    for p in against:
        if p.shape[1]:
            q = q - p @ (p.T @ q)
    if q.shape[1]:
        q, _ = np.linalg.qr(q)
    return q


def smallest_eigenpairs(
    m: SparseSymMatrix,
    n_e: int,
    tol: float = 1e-10,
    *,
    block_size: int | None = None,
    subspace_dim: int | None = None,
    max_restarts: int = 500,
    seed: int = 0,
) -> EigenBasis:
    """The ``n_e`` smallest eigenpairs of a symmetric PSD matrix.

    Block Lanczos with full reorthogonalization. Each cycle builds a block
    Krylov space on top of the retained Ritz vectors, performs Rayleigh-Ritz
    against the explicitly projected matrix and locks every Ritz pair whose
    residual satisfies ``||Mx - theta x|| <= tol * max(1, ||M||_F)``.
    Locked vectors are deflated from all later cycles, and every restart
    injects fresh random directions so that repeated eigenvalues are found.
    The iteration stops once ``n_e`` pairs are locked and a fresh cycle
    reports nothing below the largest wanted locked value.
    """
    n = m.n
    if not 1 <= n_e <= n:
        raise ValueError(f"n_e must lie in [1, {n}], got {n_e}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if n_e == n:
        vals, vecs = dense_eig(m.to_dense())
        return EigenBasis(vals, vecs)

    a = m.csr
    scale = max(1.0, m.frobenius_norm())
    res_tol = tol * scale
    b = block_size or min(n_e, 8)
    dim = subspace_dim or max(4 * n_e, 120)
    rng = np.random.default_rng(seed)
    rank_tol = 1e-10

    locked_x = np.zeros((n, 0))
    locked_v = np.zeros(0)
    keep = np.zeros((n, 0))
    keep_av = np.zeros((n, 0))
    start = rng.standard_normal((n, b))
    best_res = np.inf

    for _ in range(max_restarts):
        room = n - locked_x.shape[1]
        if room <= 0:
            break
        cap = min(dim, room)
        basis = [keep] if keep.shape[1] else []
        av = [keep_av] if keep_av.shape[1] else []
        size = keep.shape[1]
        blk = _orthonormalize(start, [locked_x] + basis, rank_tol)
        while size < cap:
            if blk.shape[1] == 0:
                # invariant subspace reached; continue from random directions
                blk = _orthonormalize(rng.standard_normal((n, b)), [locked_x] + basis, rank_tol)
                if blk.shape[1] == 0:
                    break
            blk = blk[:, : cap - size]
            ablk = a @ blk
            basis.append(blk)
            av.append(ablk)
            size += blk.shape[1]
            blk = _orthonormalize(ablk, [locked_x] + basis, rank_tol)

        v = np.hstack(basis)
        avm = np.hstack(av)
        h = v.T @ avm
        theta, s = np.linalg.eigh(0.5 * (h + h.T))
        y = v @ s
        ay = avm @ s
        resid = ay - y * theta
        res = np.linalg.norm(resid, axis=0)

        done_before = locked_x.shape[1] >= n_e
        conv = res <= res_tol
        if done_before:
            wanted_max = np.sort(locked_v)[n_e - 1]
            # a fresh cycle confirms the locked set when it holds nothing
            # (converged or plausibly converging) below the wanted maximum
            if not np.any(theta - res < wanted_max - res_tol):
                break
        if np.any(conv):
            locked_x = np.hstack([locked_x, y[:, conv]])
            locked_v = np.concatenate([locked_v, theta[conv]])
        if (~conv).any():
            best_res = min(best_res, float(res[~conv].min()))

        # thick restart: retain the smallest unconverged Ritz vectors and seed
        # the next Krylov block with their residuals plus random directions
        idx = np.flatnonzero(~conv)
        need = max(n_e - locked_x.shape[1], 0) + b
        idx = idx[: min(need, max(cap // 2, 1))]
        keep = y[:, idx]
        keep_av = ay[:, idx]
        if keep.shape[1]:
            keep = _orthonormalize(keep, [locked_x], rank_tol)
            keep_av = a @ keep if keep.shape[1] else np.zeros((n, 0))
        seeds = [resid[:, idx[:b]]] if idx.size else []
        seeds.append(rng.standard_normal((n, b)))
        start = np.hstack(seeds)
    else:
        if locked_x.shape[1] < n_e:
            raise EigenSolverError(
                f"Lanczos locked {locked_x.shape[1]} of {n_e} eigenpairs after {max_restarts} restarts",
                best_res,
            )

    if locked_x.shape[1] < n_e:
        raise EigenSolverError("Lanczos ran out of search space", best_res)
    order = np.argsort(locked_v, kind="stable")[:n_e]
    vals = locked_v[order]
    vecs = locked_x[:, order]
    return EigenBasis(vals, vecs)

"""Thresholded persistent-Laplacian family built from a base graph Laplacian.

For ``k = 1 .. l_n`` an off-diagonal entry ``L_ij`` of the base becomes 0 when
``L_ij <= (k / l_n) * d + L_min`` and -1 otherwise (``d = L_max - L_min``,
extrema over stored off-diagonal entries). The diagonal is the negated row
sum, so each member is the unnormalized Laplacian of an unweighted graph.
Only entries the sparse base actually stores are compared; absent entries
stay 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import SparseSymMatrix


@dataclass(frozen=True, eq=False)
class LaplacianFamily:
    base: SparseSymMatrix
    members: tuple[SparseSymMatrix, ...]
    ks: tuple[int, ...]
    l_n: int
    offdiag_stats: tuple[float, float, float]
    invert_threshold: bool = False

    def __len__(self):
        return len(self.members)


def offdiag_range(base: SparseSymMatrix) -> tuple[float, float, float]:
    """``(L_min, L_max, L_max - L_min)`` over stored off-diagonal entries."""
    _, _, v = base.offdiag()
    if v.size == 0:
        raise ValueError("base matrix has no off-diagonal entries")
    lo, hi = float(v.min()), float(v.max())
    return lo, hi, hi - lo


def _threshold(k: int, l_n: int, stats: tuple[float, float, float]) -> float:
    lo, hi, d = stats
    if k == l_n:
        return hi  # (l_n/l_n)*d + L_min can round below L_max
    return (k / l_n) * d + lo


def _edge_mask(vals: np.ndarray, thr: float, invert: bool) -> np.ndarray:
    return vals <= thr if invert else vals > thr


def _member_from_edges(n: int, r: np.ndarray, c: np.ndarray) -> SparseSymMatrix:
    deg = np.bincount(r, minlength=n) + np.bincount(c, minlength=n)
    nz = np.flatnonzero(deg)
    return SparseSymMatrix(
        n,
        np.concatenate([nz, r]),
        np.concatenate([nz, c]),
        np.concatenate([deg[nz].astype(np.float64), -np.ones(r.size)]),
    )


def persistent_laplacian(base: SparseSymMatrix, k: int, l_n: int, invert_threshold: bool = False,
                         stats: tuple[float, float, float] | None = None) -> SparseSymMatrix:
    """The ``k``-th member of the thresholded family.

    ``invert_threshold`` keeps an edge when ``L_ij <= threshold`` instead,
    so that the strongest similarities survive longest.
    """
    if l_n < 2:
        raise ValueError(f"l_n must be an integer greater than 1, got {l_n}")
    if not 1 <= k <= l_n:
        raise ValueError(f"k must lie in [1, {l_n}], got {k}")
    stats = stats or offdiag_range(base)
    r, c, v = base.offdiag()
    keep = _edge_mask(v, _threshold(k, l_n, stats), invert_threshold)
    return _member_from_edges(base.n, r[keep], c[keep])


def build_family(base: SparseSymMatrix, l_n: int, include_last: bool = False,
                 invert_threshold: bool = False) -> LaplacianFamily:
    """Members for ``k = 1 .. l_n`` (``.. l_n - 1`` unless ``include_last``).

    The ``k = l_n`` member is the zero matrix under the default threshold
    direction, which is why it is left out by default.
    """
    if l_n < 2:
        raise ValueError(f"l_n must be an integer greater than 1, got {l_n}")
    stats = offdiag_range(base)
    if stats[2] == 0:
        warnings.warn("all off-diagonal entries of the base Laplacian are equal; "
                      "every family member degenerates", RuntimeWarning, stacklevel=2)
    ks = tuple(range(1, l_n + 1 if include_last else l_n))
    members = tuple(persistent_laplacian(base, k, l_n, invert_threshold, stats) for k in ks)
    return LaplacianFamily(base, members, ks, l_n, stats, invert_threshold)


def member_edges(member: SparseSymMatrix) -> set[tuple[int, int]]:
    r, c, _ = member.offdiag()
    return set(zip(r.tolist(), c.tolist()))


def write_coo(member: SparseSymMatrix, path) -> None:
    """Coordinate-list text export: header ``n nnz`` then ``row col value`` lines
    for the stored upper triangle."""
    with open(path, "w") as fh:
        fh.write(f"{member.n} {member.nnz_stored}\n")
        for i, j, v in zip(member.rows.tolist(), member.cols.tolist(), member.vals.tolist()):
            fh.write(f"{i} {j} {v!r}\n")

"""k-nearest-neighbor similarity graphs and the symmetric normalized Laplacian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .linalg import SparseSymMatrix

METRICS = ("euclidean", "cosine")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with optional integer class labels.

    ``labels`` uses ``-1`` for points without a known class.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if x.shape[0] < 2 or x.shape[1] < 1:
            raise ValueError(f"need N >= 2 points and d >= 1 features, got {x.shape}")
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.shape != (x.shape[0],):
                raise ValueError("labels must have one entry per point")
            if np.any(y < -1):
                raise ValueError("labels must be class ids >= 0, or -1 for unlabeled")
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None or not np.any(self.labels >= 0):
            return 0
        return int(self.labels.max()) + 1


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    weights: SparseSymMatrix
    n_neighbors: int
    sigma: float


def _prepare(x: np.ndarray, metric: str) -> np.ndarray:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        bad = np.flatnonzero(norms == 0)
        if bad.size:
            raise ValueError(f"cosine metric undefined for zero vector at point {bad[0]}")
        return x / norms[:, None]
    return x


def _row_distances(x: np.ndarray, i: int, idx: np.ndarray, metric: str) -> np.ndarray:
    # shared by the brute-force and accelerated paths so both see identical values
    if metric == "cosine":
        return np.maximum(1.0 - x[idx] @ x[i], 0.0)
    diff = x[idx] - x[i]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _select(dist: np.ndarray, idx: np.ndarray, n_n: int) -> tuple[np.ndarray, np.ndarray]:
    # ties at equal distance go to the lower index
    order = np.lexsort((idx, dist))[:n_n]
    return idx[order], dist[order]


def knn_graph(
    data: Dataset | np.ndarray,
    n_n: int,
    metric: str = "euclidean",
    accelerate: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Union-symmetrized ``n_n``-nearest-neighbor pairs.

    Returns ``(pairs, dist)`` where ``pairs`` is an ``E x 2`` array with
    ``i < j`` sorted lexicographically. A pair is kept when either endpoint
    selects the other. ``accelerate`` uses a KD-tree to prune candidates and
    then ranks them exactly like the brute-force path.
    """
    x = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= n_n < n:
        raise ValueError(f"n_n must satisfy 1 <= n_n < N={n}, got {n_n}")
    xp = _prepare(x, metric)
    everyone = np.arange(n)

    if accelerate:
        tree = cKDTree(xp)
        kth, _ = tree.query(xp, k=n_n + 1)
        radius = kth[:, -1] * (1 + 1e-9) + 1e-12

    src, dst, dd = [], [], []
    for i in range(n):
        if accelerate:
            cand = np.asarray(tree.query_ball_point(xp[i], radius[i]), dtype=np.int64)
            cand = cand[cand != i]
        else:
            cand = np.delete(everyone, i)
        nbr, d = _select(_row_distances(xp, i, cand, metric), cand, n_n)
        src.append(np.full(n_n, i))
        dst.append(nbr)
        dd.append(d)

    src = np.concatenate(src)
    dst = np.concatenate(dst)
    dd = np.concatenate(dd)
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    order = np.lexsort((hi, lo))
    lo, hi, dd = lo[order], hi[order], dd[order]
    first = np.ones(lo.size, dtype=bool)
    first[1:] = (np.diff(lo) != 0) | (np.diff(hi) != 0)
    return np.column_stack([lo[first], hi[first]]), dd[first]


def auto_sigma(dist: np.ndarray) -> float:
    """Median kNN distance; keeps the Gaussian weights spread over (0, 1]."""
    sigma = float(np.median(dist))
    if not sigma > 0:
        positive = dist[dist > 0]
        if positive.size == 0:
            raise ValueError("all neighbor distances are zero; cannot pick sigma")
        sigma = float(np.median(positive))
    return sigma


def gaussian_weights(pairs: np.ndarray, dist: np.ndarray, sigma: float, n: int, n_neighbors: int = 0) -> SimilarityGraph:
    """``w = exp(-d^2 / sigma^2)`` on the retained pairs."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValueError("self-loops are not allowed")
    w = np.exp(-(np.asarray(dist, dtype=np.float64) ** 2) / sigma**2)
    keep = w > 0  # underflow for very distant pairs
    lo = np.minimum(pairs[:, 0], pairs[:, 1])[keep]
    hi = np.maximum(pairs[:, 0], pairs[:, 1])[keep]
    m = SparseSymMatrix.from_triplets(n, lo, hi, w[keep])
    return SimilarityGraph(m, n_neighbors, float(sigma))


def build_graph(data: Dataset, n_n: int, sigma: float | str = "auto", metric: str = "euclidean",
                accelerate: bool = False) -> SimilarityGraph:
    pairs, dist = knn_graph(data, n_n, metric, accelerate=accelerate)
    if sigma == "auto":
        sigma = auto_sigma(dist)
    return gaussian_weights(pairs, dist, float(sigma), data.n, n_n)


def symmetric_laplacian(g: SimilarityGraph | SparseSymMatrix) -> SparseSymMatrix:
    """``I - D^{-1/2} W D^{-1/2}``; raises on isolated vertices."""
    w = g.weights if isinstance(g, SimilarityGraph) else g
    r, c, v = w.offdiag()
    deg = np.bincount(r, weights=v, minlength=w.n) + np.bincount(c, weights=v, minlength=w.n)
    iso = np.flatnonzero(deg <= 0)
    if iso.size:
        raise ValueError(f"vertex {iso[0]} is isolated (degree 0); the normalized Laplacian is undefined")
    inv_sqrt = 1.0 / np.sqrt(deg)
    off = -v * inv_sqrt[r] * inv_sqrt[c]
    idx = np.arange(w.n)
    return SparseSymMatrix(
        w.n,
        np.concatenate([idx, r]),
        np.concatenate([idx, c]),
        np.concatenate([np.ones(w.n), off]),
    )

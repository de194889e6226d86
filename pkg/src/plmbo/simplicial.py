"""Vietoris-Rips filtrations and persistent combinatorial Laplacians.

Simplices are capped at dimension 2, which is enough for the q = 0 and
q = 1 Laplacians. Orientation follows ascending vertex order; the boundary
of ``(v_0, .., v_q)`` puts ``(-1)^i`` on the face that omits ``v_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .linalg import dense_eig

KERNEL_TOL = 1e-10


@dataclass(frozen=True)
class Simplex:
    vertices: tuple[int, ...]
    birth: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True, eq=False)
class Filtration:
    points: np.ndarray
    simplices: tuple[Simplex, ...]

    def complex_at(self, radius: float, q: int) -> list[tuple[int, ...]]:
        """q-simplices with birth <= radius, in filtration order."""
        return [s.vertices for s in self.simplices if s.dim == q and s.birth <= radius]


@dataclass(frozen=True)
class PersistentSpectrum:
    q: int
    r_t: float
    r_tp: float
    eigenvalues: np.ndarray
    betti: int
    lambda_min_nonzero: float | None


def rips_filtration(points, max_radius: float) -> Filtration:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    m = pts.shape[0]
    if m < 1:
        raise ValueError("need at least one point")
    if max_radius < 0:
        raise ValueError("max_radius must be nonnegative")
    dist = squareform(pdist(pts)) if m > 1 else np.zeros((1, 1))

    simplices = [Simplex((i,), 0.0) for i in range(m)]
    adj = [[] for _ in range(m)]
    for i, j in combinations(range(m), 2):
        if dist[i, j] <= max_radius:
            simplices.append(Simplex((i, j), float(dist[i, j])))
            adj[i].append(j)
    for i in range(m):
        for j, k in combinations(adj[i], 2):
            if dist[j, k] <= max_radius:
                birth = max(dist[i, j], dist[i, k], dist[j, k])
                simplices.append(Simplex((i, j, k), float(birth)))
    simplices.sort(key=lambda s: (s.birth, s.dim, s.vertices))
    return Filtration(pts, tuple(simplices))


def boundary_matrix_from(faces: list[tuple[int, ...]], cofaces: list[tuple[int, ...]]) -> np.ndarray:
    """Oriented boundary matrix with rows indexed by ``faces`` and columns by
    ``cofaces``. Faces missing from ``faces`` are an error."""
    row = {f: i for i, f in enumerate(faces)}
    b = np.zeros((len(faces), len(cofaces)), dtype=np.int64)
    for j, s in enumerate(cofaces):
        for i in range(len(s)):
            b[row[s[:i] + s[i + 1:]], j] = (-1) ** i
    return b


def boundary_matrix(f: Filtration, q: int, radius: float) -> tuple[np.ndarray, list, list]:
    """``(B_q, row simplices, column simplices)`` of the complex at ``radius``."""
    if q not in (1, 2):
        raise ValueError("q must be 1 or 2")
    faces = f.complex_at(radius, q - 1)
    cofaces = f.complex_at(radius, q)
    return boundary_matrix_from(faces, cofaces), faces, cofaces


def _null_space(a: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Orthonormal kernel basis via SVD (rank-revealing)."""
    if a.shape[1] == 0:
        return np.zeros((0, 0))
    if a.shape[0] == 0:
        return np.eye(a.shape[1])
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def persistent_laplacian_q(f: Filtration, q: int, r_t: float, r_tp: float,
                           kernel_basis=None) -> np.ndarray:
    """p-persistent q-combinatorial Laplacian from ``K_t`` to ``K_{t+p}``.

    The up part uses the (q+1)-chains of ``K_{t+p}`` whose boundary lies in
    ``K_t``, realized as an orthonormal kernel basis of the boundary rows
    indexed by q-simplices that are new in ``K_{t+p}``. ``kernel_basis`` can
    override that basis (any orthonormal basis gives the same spectrum).
    """
    if q not in (0, 1):
        raise ValueError("q must be 0 or 1")
    if r_t > r_tp:
        raise ValueError(f"r_t={r_t} exceeds r_tp={r_tp}")
    qs_t = f.complex_at(r_t, q)
    qs_tp = f.complex_at(r_tp, q)
    up_tp = f.complex_at(r_tp, q + 1)
    size = len(qs_t)

    old = set(qs_t)
    order = qs_t + [s for s in qs_tp if s not in old]
    d = boundary_matrix_from(order, up_tp).astype(np.float64)
    d_old, d_new = d[:size], d[size:]
    z = _null_space(d_new) if kernel_basis is None else np.asarray(kernel_basis, dtype=np.float64)
    b_up = d_old @ z if z.size else np.zeros((size, 0))
    lap = b_up @ b_up.T

    if q > 0:
        b_down = boundary_matrix_from(f.complex_at(r_t, q - 1), qs_t).astype(np.float64)
        lap = lap + b_down.T @ b_down
    return lap


def new_simplex_kernel(f: Filtration, q: int, r_t: float, r_tp: float) -> np.ndarray:
    """Orthonormal basis of the persistent (q+1)-chains used by
    `persistent_laplacian_q`; exposed for basis-invariance checks."""
    qs_t = f.complex_at(r_t, q)
    old = set(qs_t)
    order = qs_t + [s for s in f.complex_at(r_tp, q) if s not in old]
    d = boundary_matrix_from(order, f.complex_at(r_tp, q + 1)).astype(np.float64)
    return _null_space(d[len(qs_t):])


def spectrum(lap: np.ndarray, q: int, r_t: float, r_tp: float, zero_tol: float | None = None) -> PersistentSpectrum:
    vals, _ = dense_eig(lap)
    if zero_tol is None:
        zero_tol = 1e-8 * max(1.0, float(vals[-1]) if vals.size else 0.0)
    zero = vals < zero_tol
    nonzero = vals[~zero]
    return PersistentSpectrum(q, r_t, r_tp, vals, int(zero.sum()),
                              float(nonzero[0]) if nonzero.size else None)


def spectra_curves(points, radius_grid, q_max: int = 1) -> list[dict]:
    """Betti numbers and first nonzero eigenvalues along a radius grid (p = 0).

    Returns one record per radius with ``beta0, beta1, lambda0, lambda1``
    (``None`` where the spectrum has no nonzero eigenvalue).
    """
    grid = [float(r) for r in radius_grid]
    if not grid:
        raise ValueError("radius grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("radius grid must be ascending")
    f = rips_filtration(points, grid[-1])
    out = []
    for r in grid:
        row = {"radius": r}
        for q in range(q_max + 1):
            s = spectrum(persistent_laplacian_q(f, q, r, r), q, r, r)
            row[f"beta{q}"] = s.betti
            row[f"lambda{q}"] = s.lambda_min_nonzero
        out.append(row)
    return out

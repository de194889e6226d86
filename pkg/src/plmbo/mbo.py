"""Graph MBO iteration on a single Laplacian.

One iteration: truncated-eigenbasis diffusion with a fidelity forcing term,
row-wise Euclidean projection onto the probability simplex, and displacement
of every row to the nearest simplex vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Dataset
from .linalg import EigenBasis, SparseSymMatrix, smallest_eigenpairs

INIT_MODES = ("random", "voronoi")


@dataclass(frozen=True, eq=False)
class FidelitySpec:
    """Per-point fidelity strengths and the indicator matrix of known labels."""

    mu: np.ndarray
    labeled_mask: np.ndarray
    u_labeled: np.ndarray

    @classmethod
    def from_labels(cls, labels, mask, n_classes: int, mu: float | np.ndarray) -> "FidelitySpec":
        labels = np.asarray(labels, dtype=np.int64)
        mask = np.asarray(mask, dtype=bool)
        if labels.shape != mask.shape:
            raise ValueError("labels and mask must have the same length")
        if np.any(labels[mask] < 0) or np.any(labels[mask] >= n_classes):
            raise ValueError("every labeled point needs a class id in [0, K)")
        n = labels.size
        u_lab = np.zeros((n, n_classes))
        idx = np.flatnonzero(mask)
        u_lab[idx, labels[idx]] = 1.0
        mu_vec = np.where(mask, np.broadcast_to(np.asarray(mu, dtype=np.float64), (n,)), 0.0)
        if np.any(mu_vec < 0):
            raise ValueError("mu must be nonnegative")
        return cls(mu_vec, mask, u_lab)

    @property
    def n_classes(self) -> int:
        return self.u_labeled.shape[1]

    @property
    def labels(self) -> np.ndarray:
        """Class id of each labeled point, -1 elsewhere."""
        return np.where(self.labeled_mask, self.u_labeled.argmax(axis=1), -1)


@dataclass(frozen=True)
class MboConfig:
    dt: float = 0.1
    n_t: int = 30
    n_e: int = 50
    epsilon: float = 1.0
    seed: int = 0
    init_mode: str = "voronoi"
    eig_tol: float = 1e-8

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_t < 0:
            raise ValueError("n_t must be nonnegative")
        if self.n_e < 1:
            raise ValueError("n_e must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")


@dataclass
class MboResult:
    u: np.ndarray
    iterations: int
    trace: list[dict] = field(default_factory=list)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Works row-wise on 2-D input. Sort descending, find the largest ``rho``
    with ``v_(rho) + (1 - sum_{j<=rho} v_(j)) / rho > 0``, shift and clip.
    """
    v = np.asarray(v, dtype=np.float64)
    squeeze = v.ndim == 1
    x = np.atleast_2d(v)
    k = x.shape[1]
    srt = -np.sort(-x, axis=1)
    css = np.cumsum(srt, axis=1) - 1.0
    ks = np.arange(1, k + 1)
    cond = srt - css / ks > 0
    rho = k - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(x.shape[0]), rho - 1] / rho
    out = np.maximum(x - tau[:, None], 0.0)
    # clipping leaves the sum within rounding of 1; renormalize the support
    out /= out.sum(axis=1, keepdims=True)
    return out[0] if squeeze else out


def _indicators(cls: np.ndarray, k: int) -> np.ndarray:
    u = np.zeros((cls.size, k))
    u[np.arange(cls.size), cls] = 1.0
    return u


def displacement(u_half) -> np.ndarray:
    """Project each row to the simplex, then snap it to ``e_k`` for the
    largest coordinate (lowest index on ties)."""
    p = project_to_simplex(np.atleast_2d(u_half))
    return _indicators(np.argmax(p, axis=1), p.shape[1])


def initialize_state(n: int, k: int, fid: FidelitySpec, data: Dataset | None, cfg: MboConfig) -> np.ndarray:
    """Random or Voronoi (nearest labeled point) initial state; labeled rows
    are always the indicators of their known class."""
    lab = np.flatnonzero(fid.labeled_mask)
    if cfg.init_mode == "random":
        rng = np.random.default_rng(cfg.seed)
        u = project_to_simplex(rng.random((n, k)))
    else:
        if data is None:
            raise ValueError("voronoi initialization needs the dataset features")
        present = np.unique(fid.labels[lab])
        missing = sorted(set(range(k)) - set(present.tolist()))
        if missing:
            raise ValueError(f"voronoi initialization needs a labeled point in every class; none for {missing}")
        seeds = data.features[lab]
        nearest = np.empty(n, dtype=np.int64)
        step = max(1, 2_000_000 // (seeds.size or 1))
        for start in range(0, n, step):
            diff = data.features[start:start + step, None, :] - seeds[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            nearest[start:start + step] = np.argmin(d2, axis=1)  # first minimum = lowest index
        u = _indicators(fid.labels[lab][nearest], k)
    u[lab] = fid.u_labeled[lab]
    return u


def diffusion_step(u: np.ndarray, basis: EigenBasis, fid: FidelitySpec, dt: float) -> np.ndarray:
    """``X (I + dt*Lambda)^{-1} X^T (U - dt*mu*(U - U_labeled))``."""
    u = np.asarray(u, dtype=np.float64)
    x = basis.vectors
    if u.shape[0] != x.shape[0] or u.shape != fid.u_labeled.shape:
        raise ValueError(f"shape mismatch: U {u.shape}, basis {x.shape}, fidelity {fid.u_labeled.shape}")
    update = u - dt * fid.mu[:, None] * (u - fid.u_labeled)
    damp = 1.0 / (1.0 + dt * basis.values)
    return x @ (damp[:, None] * (x.T @ update))


def gl_energy(u: np.ndarray, member: SparseSymMatrix, fid: FidelitySpec, epsilon: float) -> float:
    """Graph Ginzburg-Landau energy with multiwell potential and fidelity."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    u = np.asarray(u, dtype=np.float64)
    k = u.shape[1]
    dirichlet = float(np.sum(u * (member @ u)))
    eye = np.eye(k)
    l1 = np.abs(u[:, None, :] - eye[None, :, :]).sum(axis=2)  # N x K
    well = float(np.sum(np.prod(0.25 * l1**2, axis=1)))
    fidelity = float(np.sum(0.5 * fid.mu * np.sum((u - fid.u_labeled) ** 2, axis=1) * fid.labeled_mask))
    return 0.5 * epsilon * dirichlet + well / (2.0 * epsilon) + fidelity


def member_basis(member: SparseSymMatrix, cfg: MboConfig) -> EigenBasis:
    return smallest_eigenpairs(member, min(cfg.n_e, member.n), cfg.eig_tol, seed=cfg.seed)


def mbo_run(member: SparseSymMatrix, fid: FidelitySpec, data: Dataset | None, cfg: MboConfig,
            basis: EigenBasis | None = None, u0: np.ndarray | None = None,
            trace: bool = False) -> MboResult:
    """Run up to ``n_t`` MBO iterations on one family member.

    The eigenbasis is computed once (or passed in). The loop stops early when
    an iteration reproduces the previous assignment exactly, after which the
    trajectory would be constant.
    """
    n, k = fid.u_labeled.shape
    if member.n != n:
        raise ValueError("member dimension does not match the fidelity spec")
    u = initialize_state(n, k, fid, data, cfg) if u0 is None else np.array(u0, dtype=np.float64)
    if cfg.n_t == 0:
        return MboResult(u, 0)
    if basis is None:
        basis = member_basis(member, cfg)
    records = []
    it = 0
    while it < cfg.n_t:
        nxt = displacement(diffusion_step(u, basis, fid, cfg.dt))
        it += 1
        changed = int(np.sum(np.any(nxt != u, axis=1)))
        u = nxt
        if trace:
            records.append({"iteration": it, "energy": gl_energy(u, member, fid, cfg.epsilon),
                            "changed_rows": changed})
        if changed == 0:
            break
    return MboResult(u, it, records)


def write_trace(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,energy,changed_rows\n")
        for r in records:
            fh.write(f"{r['iteration']},{r['energy']!r},{r['changed_rows']}\n")

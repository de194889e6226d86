"""Synthetic benchmark analogs, CSV I/O and labeled-subset sampling.

All randomness comes from numpy's PCG64 bit generator
(``numpy.random.default_rng``), whose streams are identical across
platforms for a given seed.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .graph import Dataset

# class-1 crescent: the class-0 arc translated by this offset, then mirrored in y
BANANA_SHIFT = (0.5, -0.3)


@dataclass(frozen=True)
class TrialPlan:
    n_labeled: int
    n_trials: int = 10
    seed: int = 0
    per_class_balance: bool = True

    def __post_init__(self):
        if self.n_labeled < 1:
            raise ValueError("n_labeled must be positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")


def gaussian_separation(bayes_error: float) -> float:
    """Mean distance giving the requested Bayes error for two unit-variance
    Gaussians with equal priors."""
    if not 0 < bayes_error < 0.5:
        raise ValueError(f"bayes_error must lie in (0, 0.5), got {bayes_error}")
    return float(-2.0 * norm.ppf(bayes_error))


def _balanced_labels(n: int, rng) -> np.ndarray:
    y = np.zeros(n, dtype=np.int64)
    y[(n + 1) // 2:] = 1
    return rng.permutation(y)


def gen_two_gaussians(n: int, dim: int, bayes_error: float = 0.05, seed: int = 0) -> Dataset:
    """Two isotropic Gaussians with means at ``-/+ delta/2`` along the unit
    diagonal direction ``(1, .., 1) / sqrt(dim)``."""
    if n < 2 or dim < 1:
        raise ValueError("need n >= 2 and dim >= 1")
    delta = gaussian_separation(bayes_error)
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, rng)
    direction = np.full(dim, 1.0 / np.sqrt(dim))
    x = rng.standard_normal((n, dim)) + np.where(y == 1, 0.5, -0.5)[:, None] * delta * direction
    return Dataset(x, y, name=f"two-gaussians-n{n}-d{dim}")


def banana_curves(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free crescents at parameter ``t`` in [0, pi]."""
    upper = np.column_stack([np.cos(t), np.sin(t)])
    sx, sy = BANANA_SHIFT
    lower = np.column_stack([np.cos(t) + sx, -(np.sin(t) + sy)])
    return upper, lower


def gen_banana(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half-circle crescents of radius 1 with Gaussian jitter.

    Class 0 lies on the upper unit half circle. Class 1 is that arc shifted
    by ``BANANA_SHIFT`` and mirrored in y, so its tips reach into the first
    crescent's hollow.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, rng)
    t = rng.uniform(0.0, np.pi, size=n)
    upper, lower = banana_curves(t)
    x = np.where((y == 0)[:, None], upper, lower)
    x = x + noise * rng.standard_normal((n, 2))
    return Dataset(x, y, name=f"banana-n{n}")


def write_csv(data: Dataset, fh) -> None:
    """Columns ``f0..f{d-1}`` then ``label`` (empty for unlabeled points).
    Floats use their shortest round-trip repr (at most 17 significant digits)."""
    w = csv.writer(fh, lineterminator="\n")
    header = [f"f{j}" for j in range(data.dim)]
    if data.labels is not None:
        header.append("label")
    w.writerow(header)
    for i in range(data.n):
        row = [repr(float(v)) for v in data.features[i]]
        if data.labels is not None:
            row.append("" if data.labels[i] < 0 else str(int(data.labels[i])))
        w.writerow(row)


def save_csv(data: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        write_csv(data, fh)


def load_csv(path, name: str | None = None) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file (header row required)")
    header = [h.strip() for h in rows[0]]
    has_label = bool(header) and header[-1] == "label"
    feat_cols = header[:-1] if has_label else header
    if feat_cols != [f"f{j}" for j in range(len(feat_cols))] or not feat_cols:
        raise ValueError(f"{path}: header must be f0..f{{d-1}} optionally followed by label")
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, found {len(row)}")
        try:
            feats.append([float(v) for v in row[:len(feat_cols)]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric feature ({exc})") from None
        if has_label:
            cell = row[-1].strip()
            try:
                labels.append(int(cell) if cell else -1)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: label must be an integer or empty") from None
    return Dataset(np.array(feats, dtype=np.float64).reshape(-1, len(feat_cols)),
                   np.array(labels, dtype=np.int64) if has_label else None,
                   name=name or path.stem)


def write_manifest(path, params: dict) -> Path:
    """Sidecar ``<csv>.json`` echoing generator parameters."""
    side = Path(str(path) + ".json")
    side.write_text(json.dumps(params, indent=2, sort_keys=True) + "\n")
    return side


def sample_labels(data: Dataset, plan: TrialPlan, trial_index: int) -> np.ndarray:
    """Boolean mask of exactly ``plan.n_labeled`` points for one trial.

    Drawn from ``default_rng([seed, trial_index])``. Balanced mode gives each
    class ``n_labeled // K`` points, the first ``n_labeled % K`` classes one
    more.
    """
    if data.labels is None or np.any(data.labels < 0):
        raise ValueError("label sampling needs ground truth for every point")
    n = data.n
    if plan.n_labeled > n:
        raise ValueError(f"n_labeled={plan.n_labeled} exceeds N={n}")
    rng = np.random.default_rng([plan.seed, trial_index])
    mask = np.zeros(n, dtype=bool)
    if not plan.per_class_balance:
        mask[rng.choice(n, size=plan.n_labeled, replace=False)] = True
        return mask
    k = data.n_classes
    if plan.n_labeled < k:
        raise ValueError(f"balanced sampling needs n_labeled >= K={k}")
    base, extra = divmod(plan.n_labeled, k)
    for c in range(k):
        members = np.flatnonzero(data.labels == c)
        want = base + (1 if c < extra else 0)
        if members.size < want:
            raise ValueError(f"class {c} has {members.size} points, {want} requested")
        mask[rng.choice(members, size=want, replace=False)] = True
    return mask

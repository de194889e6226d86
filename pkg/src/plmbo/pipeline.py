"""End-to-end PL-MBO classification with repeated labeled-subset trials."""
from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import datagen
from .ensemble import accuracy, concatenate_outputs, forest_fit, forest_predict, split_by_mask
from .family import LaplacianFamily, build_family, write_coo
from .graph import Dataset, build_graph, symmetric_laplacian
from .linalg import EigenBasis
from .mbo import FidelitySpec, MboConfig, initialize_state, mbo_run, member_basis, write_trace

log = logging.getLogger(__name__)

THREADS_ENV = "PLMBO_THREADS"
GENERATORS = {"two-gaussians": datagen.gen_two_gaussians, "banana": datagen.gen_banana}


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


@dataclass
class RunConfig:
    data: str | None = None
    generator: dict | None = None
    n_n: int = 15
    metric: str = "euclidean"
    sigma: float | str = "auto"
    l_n: int = 4
    include_last: bool = False
    invert_threshold: bool = False
    n_e: int = 50
    dt: float = 0.1
    mu: float = 50.0
    n_t: int = 30
    epsilon: float = 1.0
    init_mode: str = "voronoi"
    eig_tol: float = 1e-8
    n_labeled: int = 50
    n_trials: int = 10
    per_class_balance: bool = True
    seed: int = 0
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 1
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        if (self.data is None) == (self.generator is None):
            raise ConfigError("set exactly one of 'data' (CSV path) or 'generator'")
        if self.generator is not None:
            kind = self.generator.get("kind")
            if kind not in GENERATORS:
                raise ConfigError(f"generator kind must be one of {sorted(GENERATORS)}")
        if not isinstance(self.sigma, str):
            if not self.sigma > 0:
                raise ConfigError("sigma must be positive or 'auto'")
        elif self.sigma != "auto":
            raise ConfigError("sigma must be a number or 'auto'")
        checks = {
            "n_n": self.n_n >= 1, "l_n": self.l_n >= 2, "n_e": self.n_e >= 1, "dt": self.dt > 0,
            "mu": self.mu >= 0, "n_t": self.n_t >= 0, "epsilon": self.epsilon > 0,
            "n_labeled": self.n_labeled >= 1, "n_trials": self.n_trials >= 1,
            "n_trees": self.n_trees >= 1, "max_depth": self.max_depth >= 1, "min_leaf": self.min_leaf >= 1,
            "eig_tol": self.eig_tol > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ConfigError(f"out-of-range values for: {', '.join(bad)}")
        if self.init_mode not in ("random", "voronoi"):
            raise ConfigError("init_mode must be 'random' or 'voronoi'")
        if self.metric not in ("euclidean", "cosine"):
            raise ConfigError("metric must be 'euclidean' or 'cosine'")

    def mbo_config(self, n: int) -> MboConfig:
        return MboConfig(dt=self.dt, n_t=self.n_t, n_e=min(self.n_e, n - 1), epsilon=self.epsilon,
                         seed=self.seed, init_mode=self.init_mode, eig_tol=self.eig_tol)


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.data is not None:
        return datagen.load_csv(cfg.data)
    params = dict(cfg.generator)
    kind = params.pop("kind")
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad generator parameters: {exc}") from None


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class Prepared:
    """Graph-dependent state shared by every trial."""

    data: Dataset
    family: LaplacianFamily
    bases: list[EigenBasis]
    sigma: float
    timings: dict = field(default_factory=dict)


def prepare(cfg: RunConfig, data: Dataset) -> Prepared:
    timings = {}
    t0 = time.perf_counter()
    graph = build_graph(data, cfg.n_n, cfg.sigma, cfg.metric)
    base = symmetric_laplacian(graph)
    timings["graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    family = build_family(base, cfg.l_n, cfg.include_last, cfg.invert_threshold)
    timings["family"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mcfg = cfg.mbo_config(data.n)
    with ThreadPoolExecutor(_threads()) as pool:
        bases = list(pool.map(lambda m: member_basis(m, mcfg), family.members))
    timings["eigensolve"] = time.perf_counter() - t0
    return Prepared(data, family, bases, graph.sigma, timings)


def run_trial(cfg: RunConfig, prep: Prepared, trial: int, trace_dir=None) -> dict:
    data = prep.data
    plan = datagen.TrialPlan(cfg.n_labeled, cfg.n_trials, cfg.seed, cfg.per_class_balance)
    mask = datagen.sample_labels(data, plan, trial)
    if mask.all():
        raise ValueError("every point is labeled; the test set would be empty")
    k = data.n_classes
    fid = FidelitySpec.from_labels(data.labels, mask, k, cfg.mu)
    mcfg = dataclasses.replace(cfg.mbo_config(data.n), seed=cfg.seed + trial)

    t0 = time.perf_counter()
    u0 = initialize_state(data.n, k, fid, data, mcfg)
    labeled_ok = bool(np.array_equal(u0[mask], fid.u_labeled[mask]))
    with ThreadPoolExecutor(_threads()) as pool:
        results = list(pool.map(lambda mb: mbo_run(mb[0], fid, data, mcfg, basis=mb[1], u0=u0,
                                                   trace=trace_dir is not None),
                                zip(prep.family.members, prep.bases)))
    if trace_dir is not None:
        for k_member, r in zip(prep.family.ks, results):
            write_trace(r.trace, Path(trace_dir) / f"trace_trial{trial}_k{k_member}.csv")
    t_mbo = time.perf_counter() - t0

    indicator_ok = all(np.all(r.u.sum(axis=1) == 1) and np.all((r.u == 0) | (r.u == 1)) for r in results)

    t0 = time.perf_counter()
    x = concatenate_outputs([r.u for r in results], k)
    x_tr, y_tr, x_te, y_te = split_by_mask(x, data.labels, mask)
    model = forest_fit(x_tr, y_tr, cfg.n_trees, cfg.max_depth, cfg.min_leaf, seed=cfg.seed + trial, n_classes=k)
    pred = forest_predict(model, x_te)
    t_forest = time.perf_counter() - t0

    return {
        "trial": trial,
        "accuracy": accuracy(pred, y_te),
        "n_train": int(mask.sum()),
        "n_test": int((~mask).sum()),
        "mbo_iterations": [r.iterations for r in results],
        "indicator_rows": bool(indicator_ok),
        "labeled_init_rows": labeled_ok,
        "timings": {"mbo": t_mbo, "forest": t_forest},
    }


def run_classify(cfg: RunConfig, data: Dataset | None = None, trace_dir=None, export_dir=None) -> dict:
    """Run all trials and assemble the report. Trial failures are recorded
    in the report and do not stop the remaining trials.

    ``trace_dir`` receives per-iteration CSV traces (iteration, energy,
    changed rows); ``export_dir`` receives the family members as
    coordinate-list text files.
    """
    cfg.validate()
    data = load_dataset(cfg) if data is None else data
    if data.labels is None or np.any(data.labels < 0):
        raise ConfigError("classification scoring needs ground-truth labels for every point")
    if cfg.n_labeled >= data.n:
        raise ConfigError(f"n_labeled={cfg.n_labeled} leaves no test points (N={data.n})")
    t_start = time.perf_counter()
    prep = prepare(cfg, data)
    for d in (trace_dir, export_dir):
        if d is not None:
            Path(d).mkdir(parents=True, exist_ok=True)
    if export_dir is not None:
        for k, m in zip(prep.family.ks, prep.family.members):
            write_coo(m, Path(export_dir) / f"member_k{k}.coo")
    trials = []
    for t in range(cfg.n_trials):
        try:
            trials.append(run_trial(cfg, prep, t, trace_dir))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            log.warning("trial %d failed: %s", t, exc)
            trials.append({"trial": t, "error": f"{type(exc).__name__}: {exc}"})
    accs = [t["accuracy"] for t in trials if "accuracy" in t]
    timings = dict(prep.timings)
    timings["trials"] = [t.pop("timings", None) for t in trials]
    timings["total"] = time.perf_counter() - t_start
    return {
        "config": cfg.to_dict(),
        "dataset": {"name": data.name, "n": data.n, "dim": data.dim, "n_classes": data.n_classes},
        "sigma": prep.sigma,
        "family": {"ks": list(prep.family.ks), "l_min": prep.family.offdiag_stats[0],
                   "l_max": prep.family.offdiag_stats[1], "d": prep.family.offdiag_stats[2],
                   "edges": [m.nnz_stored - int(np.sum(m.rows == m.cols)) for m in prep.family.members]},
        "trials": trials,
        "accuracy_mean": float(np.mean(accs)) if accs else None,
        "accuracy_std": float(np.std(accs)) if accs else None,
        "failed_trials": [t["trial"] for t in trials if "error" in t],
        "timings": timings,
    }

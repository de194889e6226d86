"""Command-line entry point: ``plmbo {gen,classify,filtration,bench}``.

Exit codes: 0 success, 2 usage/config/input error, 3 runtime or numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen
from .linalg import EigenSolverError
from .pipeline import ConfigError, RunConfig, load_dataset, run_classify
from .simplicial import spectra_curves

EXIT_USAGE = 2
EXIT_RUNTIME = 3
MAX_FILTRATION_POINTS = 200


class UsageError(Exception):
    pass


def _write_text(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# gen

def cmd_gen(args) -> int:
    if args.kind == "two-gaussians":
        params = {"n": args.n, "dim": args.dim, "bayes_error": args.bayes_error, "seed": args.seed}
        data = datagen.gen_two_gaussians(**params)
    else:
        params = {"n": args.n, "noise": args.noise, "seed": args.seed}
        data = datagen.gen_banana(**params)
    if args.output in (None, "-"):
        datagen.write_csv(data, sys.stdout)
    else:
        datagen.save_csv(data, args.output)
        datagen.write_manifest(args.output, {"generator": args.kind, **params})
    return 0


# classify

_FLAG_FIELDS = {
    "n_n": int, "metric": str, "l_n": int, "n_e": int, "dt": float, "mu": float, "n_t": int,
    "epsilon": float, "init_mode": str, "eig_tol": float, "n_labeled": int, "n_trials": int,
    "seed": int, "n_trees": int, "max_depth": int, "min_leaf": int,
}


def _sigma(text: str):
    return text if text == "auto" else float(text)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    p.add_argument("--data", help="CSV dataset (f0..f{d-1}, label)")
    p.add_argument("--generator", help="generator spec, e.g. 'two-gaussians:n=550,dim=50,bayes_error=0.05,seed=1'")
    for name, typ in _FLAG_FIELDS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--sigma", type=_sigma, default=None, help="Gaussian scale or 'auto'")
    for name in ("include_last", "invert_threshold", "per_class_balance"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--trace-dir", help="write per-iteration MBO traces (CSV) here")
    p.add_argument("--export-family", help="write family members as coordinate-list files here")


def parse_generator(spec: str) -> dict:
    kind, _, rest = spec.partition(":")
    out: dict = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"generator parameter {item!r} is not key=value")
        num = float(val)
        out[key.strip()] = int(num) if key.strip() in ("n", "dim", "seed") else num
    return out


def build_config(args) -> RunConfig:
    d: dict = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(d, dict):
            raise UsageError("config file must hold a JSON object")
    if args.data is not None:
        d["data"], d["generator"] = args.data, None
    if args.generator is not None:
        d["generator"], d["data"] = parse_generator(args.generator), None
    for name in list(_FLAG_FIELDS) + ["sigma", "include_last", "invert_threshold", "per_class_balance"]:
        val = getattr(args, name)
        if val is not None:
            d[name] = val
    if getattr(args, "output", None) is not None:
        d["output"] = args.output
    return RunConfig.from_dict(d)


def cmd_classify(args) -> int:
    cfg = build_config(args)
    report = run_classify(cfg, trace_dir=args.trace_dir, export_dir=args.export_family)
    _write_text(report_json(report), cfg.output)
    if cfg.output not in (None, "-"):
        mean = report["accuracy_mean"]
        print(f"mean accuracy {mean if mean is None else f'{mean:.4f}'} over "
              f"{len(report['trials'])} trials -> {cfg.output}", file=sys.stderr)
    return EXIT_RUNTIME if len(report["failed_trials"]) == cfg.n_trials else 0


# filtration

def parse_grid(args) -> list[float]:
    if args.radii:
        grid = [float(r) for r in args.radii.split(",") if r.strip()]
    elif args.grid:
        try:
            start, stop, step = (float(v) for v in args.grid.split(":"))
        except ValueError:
            raise UsageError("--grid must be start:stop:step") from None
        if step <= 0 or stop < start:
            raise UsageError("--grid needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        grid = [round(start + i * step, 12) for i in range(count)]
    else:
        grid = []
    if not grid:
        raise UsageError("empty radius grid")
    return grid


def cmd_filtration(args) -> int:
    grid = parse_grid(args)
    pts = datagen.load_csv(args.points).features
    if pts.shape[0] > MAX_FILTRATION_POINTS:
        raise UsageError(f"{pts.shape[0]} points exceeds the limit of {MAX_FILTRATION_POINTS}")
    if pts.shape[1] not in (2, 3):
        raise UsageError("filtration input must be 2-D or 3-D points")
    rows = spectra_curves(pts, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius", "beta0", "beta1", "lambda0", "lambda1"])
    for r in rows:
        w.writerow([repr(r["radius"]), r["beta0"], r["beta1"],
                    "" if r["lambda0"] is None else repr(r["lambda0"]),
                    "" if r["lambda1"] is None else repr(r["lambda1"])])
    _write_text(buf.getvalue(), args.output)
    return 0


# bench

def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_bench(args) -> int:
    base = build_config(argparse.Namespace(**{**vars(args), "output": None}))
    l_ns = _int_list(args.sweep_l_n) if args.sweep_l_n else [base.l_n]
    n_labs = _int_list(args.sweep_n_labeled) if args.sweep_n_labeled else [base.n_labeled]
    reports_dir = Path(args.reports_dir) if args.reports_dir else None
    if reports_dir:
        reports_dir.mkdir(parents=True, exist_ok=True)

    data = None
    lines = [["cell", "l_n", "n_labeled", "n_trials", "accuracy_mean", "accuracy_std", "failed"]]
    cell = 0
    for l_n in l_ns:
        for n_lab in n_labs:
            cfg = dataclasses.replace(base, l_n=l_n, n_labeled=n_lab)
            cfg.validate()
            if data is None:
                data = load_dataset(cfg)
            report = run_classify(cfg, data=data)
            if reports_dir:
                (reports_dir / f"cell{cell}_ln{l_n}_nl{n_lab}.json").write_text(report_json(report))
            mean, std = report["accuracy_mean"], report["accuracy_std"]
            lines.append([cell, l_n, n_lab, cfg.n_trials, "" if mean is None else repr(mean),
                          "" if std is None else repr(std), len(report["failed_trials"])])
            cell += 1
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    _write_text(buf.getvalue(), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plmbo", description="Persistent-Laplacian graph MBO classifier")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    gsub = g.add_subparsers(dest="kind", required=True)
    tg = gsub.add_parser("two-gaussians")
    tg.add_argument("--n", type=int, default=550)
    tg.add_argument("--dim", type=int, default=50)
    tg.add_argument("--bayes-error", type=float, default=0.05)
    bn = gsub.add_parser("banana")
    bn.add_argument("--n", type=int, default=5300)
    bn.add_argument("--noise", type=float, default=0.1)
    for sp_ in (tg, bn):
        sp_.add_argument("--seed", type=int, default=0)
        sp_.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("classify", help="run PL-MBO over repeated label trials; JSON report")
    _add_run_flags(c)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_classify)

    f = sub.add_parser("filtration", help="Betti numbers and first nonzero eigenvalues along a Rips filtration")
    f.add_argument("points", help="CSV of 2-D/3-D points (f0, f1[, f2])")
    f.add_argument("--grid", help="start:stop:step")
    f.add_argument("--radii", help="comma-separated radii")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_filtration)

    b = sub.add_parser("bench", help="sweep l_n and/or n_labeled; CSV table")
    _add_run_flags(b)
    b.add_argument("--sweep-l-n")
    b.add_argument("--sweep-n-labeled")
    b.add_argument("--reports-dir")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"plmbo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"plmbo: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EigenSolverError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"plmbo: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Batch experiments: config parsing, per-cell runs, CSV/curve output and summaries."""

from __future__ import annotations

import csv
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import bounds as bl
from .driver import (
    correction_from_approximation,
    dense_mtrsvd_solution,
    dense_oracle_solution,
    semiconvergence_scan,
)
from .kernels import derive_seed
from .problems import PROBLEMS, add_noise, generate, load_problem, synthetic_spectrum_matrix
from .regularizers import KINDS, build_regularizer
from .rsvd import rsvd, truncate

MODES = ("scan", "oracle-compare", "bounds", "sharpness")
OUT_ENV = "MTRSVD_OUT"

RESULT_FIELDS = [
    "problem", "n", "L_kind", "epsilon", "q", "seed", "k", "relative_L_error",
    "residual", "seminorm", "inner_iterations", "converged", "is_k0",
]
TIMING_FIELDS = ["problem", "n", "L_kind", "epsilon", "q", "seed", "k", "wall_time"]
SUMMARY_FIELDS = [
    "problem", "n", "L_kind", "epsilon", "q", "seeds", "median_best_error",
    "min_best_error", "max_best_error", "median_k0", "median_total_inner_iterations",
]
ORACLE_FIELDS = [
    "problem", "n", "L_kind", "epsilon", "q", "seed", "k", "dev_same_sketch", "dev_exact_svd",
]


class ConfigError(ValueError):
    pass


def _per_problem(value, name, what):
    if isinstance(value, dict):
        if name not in value:
            raise ConfigError(f"{what} has no entry for problem {name!r}")
        return value[name]
    return value


def _problem_label(spec):
    if isinstance(spec, str):
        return spec
    return spec.get("name") or Path(spec["matrix"]).stem


@dataclass
class ExperimentConfig:
    problems: list
    n: int = 256
    L_kind: str = "L1"
    epsilons: list = field(default_factory=lambda: [1e-2])
    q: object = 8
    tol: float = 1e-6
    k_max: object = 20
    seeds: list = field(default_factory=lambda: [0])
    mode: str = "scan"
    # bounds / sharpness
    spectra: list = field(default_factory=list)
    ks: list = field(default_factory=lambda: [4, 6, 8])
    qs: list = field(default_factory=lambda: [4, 6, 8])
    paired: bool = True
    trials: int = 200
    bounds: list = field(default_factory=lambda: ["basic_expq", "simplified_expq"])
    plot: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "problems" not in d and d.get("mode") not in ("bounds", "sharpness"):
            raise ConfigError("config needs a 'problems' list")
        d = dict(d)
        d.setdefault("problems", [])
        for key in ("epsilons", "seeds"):
            if key in d and not isinstance(d[key], list):
                d[key] = [d[key]]
        cfg = cls(**d)
        cfg.epsilons = [float(e) for e in cfg.epsilons]
        cfg.tol = float(cfg.tol)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, mode: str | None = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        if mode is not None:
            d["mode"] = mode
        return cls.from_dict(d)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode in ("bounds", "sharpness"):
            self._validate_bounds()
            return
        if not self.problems:
            raise ConfigError("problems list is empty")
        if self.L_kind not in KINDS:
            raise ConfigError(f"L_kind must be one of {KINDS}")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilons must be a non-empty list of positive values")
        if not self.seeds:
            raise ConfigError("seeds list is empty")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.n < 16:
            raise ConfigError("n must be >= 16")
        if self.mode == "oracle-compare" and self.n > 512:
            raise ConfigError("oracle-compare is limited to n <= 512")
        for spec in self.problems:
            name = _problem_label(spec)
            if isinstance(spec, str):
                if spec not in PROBLEMS:
                    raise ConfigError(f"unknown problem {spec!r}")
                if spec in ("shaw", "heat") and self.n % 2:
                    raise ConfigError(f"{spec} needs even n")
            elif not isinstance(spec, dict) or "matrix" not in spec:
                raise ConfigError(f"file problem needs a 'matrix' path: {spec!r}")
            elif not Path(spec["matrix"]).exists():
                raise ConfigError(f"matrix file not found: {spec['matrix']}")
            q = int(_per_problem(self.q, name, "q"))
            k_max = int(_per_problem(self.k_max, name, "k_max"))
            if q < 4:
                raise ConfigError(f"q={q} for {name}: must be >= 4")
            if k_max < 1:
                raise ConfigError(f"k_max={k_max} for {name}: must be >= 1")
            if isinstance(spec, str) and k_max + q >= self.n:
                raise ConfigError(f"k_max + q = {k_max + q} must be < n = {self.n} for {name}")

    def _validate_bounds(self):
        if not self.spectra:
            raise ConfigError("bounds/sharpness modes need a 'spectra' list")
        for sp in self.spectra:
            if sp.get("kind") not in ("geometric", "algebraic"):
                raise ConfigError(f"spectrum kind must be geometric or algebraic: {sp!r}")
            size = int(sp.get("size", self.n))
            if size > 512:
                raise ConfigError("bounds experiments are limited to size <= 512")
        for b in self.bounds:
            if b not in bl.BOUND_NAMES:
                raise ConfigError(f"unknown bound {b!r}")
        if any(q < 4 for q in self.qs):
            raise ConfigError("every q must be >= 4")
        if self.paired and len(self.ks) != len(self.qs):
            raise ConfigError("paired ks/qs must have equal length")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")


def _build_problem(spec, n):
    if isinstance(spec, str):
        return generate(spec, n)
    return load_problem(spec["matrix"], spec.get("x_true"), spec.get("b"), spec.get("name"))


def _cells(cfg):
    for pi, spec in enumerate(cfg.problems):
        name = _problem_label(spec)
        for eps in cfg.epsilons:
            for seed in cfg.seeds:
                yield {
                    "order": pi, "spec": spec, "problem": name, "n": cfg.n, "L_kind": cfg.L_kind,
                    "epsilon": eps, "q": int(_per_problem(cfg.q, name, "q")), "seed": int(seed),
                    "k_max": int(_per_problem(cfg.k_max, name, "k_max")), "tol": cfg.tol,
                    "mode": cfg.mode,
                }


def run_cell(cell: dict) -> dict:
    """One (problem, epsilon, seed) scan; returns result rows, timing rows and curves."""
    base = _build_problem(cell["spec"], cell["n"])
    noisy = add_noise(base, cell["epsilon"], cell["seed"])
    L = build_regularizer(cell["L_kind"], base.A.shape[1])
    sketch_seed = derive_seed(cell["seed"], 1)
    key = {f: cell[f] for f in ("problem", "n", "L_kind", "epsilon", "q", "seed")}
    key["n"] = base.A.shape[1]
    if cell["mode"] == "oracle-compare":
        return _oracle_cell(cell, noisy, L, sketch_seed, key)
    rep = semiconvergence_scan(noisy, L, cell["q"], tol=cell["tol"], k_max=cell["k_max"],
                               seed=sketch_seed)
    rows, timings = [], []
    for i, k in enumerate(rep.ks):
        rec = rep.record(int(k))
        rows.append({**key, **rec, "converged": int(rec["converged"]), "is_k0": int(k == rep.k0)})
        timings.append({**key, "k": int(k), "wall_time": float(rep.wall_times[i])})
    return {"order": cell["order"], "rows": rows, "timings": timings,
            "curves": {"error": (rep.ks, rep.relative_errors),
                       "iterations": (rep.ks, rep.inner_iterations)}}


def _oracle_cell(cell, noisy, L, sketch_seed, key):
    A, b = noisy.A, noisy.b
    rows = []
    for k in range(1, cell["k_max"] + 1):
        approx = truncate(rsvd(A, k, cell["q"], sketch_seed), k)
        x_k, z_k, _ = correction_from_approximation(approx, b, L, tol=cell["tol"])
        x = x_k - z_k
        ref_same = dense_mtrsvd_solution(approx, b, L)
        ref_exact = dense_oracle_solution(A, b, L, k)
        nx = np.linalg.norm(x)
        rows.append({**key, "k": k,
                     "dev_same_sketch": float(np.linalg.norm(x - ref_same) / nx),
                     "dev_exact_svd": float(np.linalg.norm(x - ref_exact) / nx)})
    return {"order": cell["order"], "rows": rows, "timings": [], "curves": {}}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])


def _curve_name(row):
    return f"{row['problem']}_n{row['n']}_{row['L_kind']}_eps{row['epsilon']:g}_q{row['q']}_seed{row['seed']}"


def _write_curves(out, results, plot=False):
    cdir = out / "curves"
    cdir.mkdir(exist_ok=True)
    for res in results:
        if not res["curves"]:
            continue
        stem = _curve_name(res["rows"][0])
        for what, (xs, ys) in res["curves"].items():
            with open(cdir / f"{stem}_{what}.dat", "w") as fh:
                for x, y in zip(xs, ys):
                    fh.write(f"{int(x)} {_fmt(y)}\n")
        if plot:
            _plot_curves(cdir / f"{stem}.svg", res["curves"], stem)


def _plot_curves(path, curves, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3))
    ks, errs = curves["error"]
    a1.semilogy(ks, errs, "o-", ms=3)
    a1.set_xlabel("k")
    a1.set_ylabel("relative error")
    ks, its = curves["iterations"]
    a2.plot(ks, its, "s-", ms=3)
    a2.set_xlabel("k")
    a2.set_ylabel("inner iterations")
    fig.suptitle(title, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _sort_key(row, order):
    return (order, row["epsilon"], row["seed"], row["k"])


def default_out_dir():
    return Path(os.environ.get(OUT_ENV, "results"))


def run(config: ExperimentConfig, out_dir=None, threads: int = 1, seed_override=None) -> Path:
    """Execute ``config`` and write its output files into ``out_dir``.

    Scan mode writes ``results.csv`` (one row per config cell, seed and k),
    ``timings.csv`` and ``curves/*.dat``; oracle-compare writes
    ``oracle.csv``; bounds and sharpness write ``bounds.csv`` and
    ``sharpness_*.csv``. Output is independent of ``threads``.
    """
    if seed_override is not None:
        config.seeds = list(seed_override)
    config.validate()
    out = Path(out_dir) if out_dir is not None else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    if config.mode == "bounds":
        return _run_bounds(config, out)
    if config.mode == "sharpness":
        return _run_sharpness(config, out)

    cells = list(_cells(config))
    results, failure = [], None
    try:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as ex:
                for res in ex.map(run_cell, cells):
                    results.append(res)
        else:
            for cell in cells:
                results.append(run_cell(cell))
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        failure = exc
    finally:
        rows = sorted(((r, res["order"]) for res in results for r in res["rows"]),
                      key=lambda t: _sort_key(*t))
        rows = [r for r, _ in rows]
        if config.mode == "oracle-compare":
            _write_csv(out / "oracle.csv", ORACLE_FIELDS, rows)
        else:
            _write_csv(out / "results.csv", RESULT_FIELDS, rows)
            timings = sorted(((r, res["order"]) for res in results for r in res["timings"]),
                             key=lambda t: _sort_key(*t))
            _write_csv(out / "timings.csv", TIMING_FIELDS, [r for r, _ in timings])
            _write_curves(out, sorted(results, key=lambda r: _sort_key(r["rows"][0], r["order"])),
                          plot=config.plot)
    if failure is not None:
        raise failure
    return out


def _spectrum_matrix(sp, seed, default_size):
    size = int(sp.get("size", default_size))
    m = int(sp.get("m", size))
    n = int(sp.get("n", size))
    kw = {k: float(sp[k]) for k in ("rho", "alpha", "zeta") if k in sp}
    return synthetic_spectrum_matrix(sp["kind"], m, n, seed, **kw), kw


def _kq_pairs(cfg):
    if cfg.paired:
        return list(zip(cfg.ks, cfg.qs))
    return [(k, q) for k in cfg.ks for q in cfg.qs]


def _label(sp):
    p = ",".join(f"{k}={sp[k]}" for k in ("rho", "alpha", "zeta") if k in sp)
    return f"{sp['kind']}({p})"


def _run_bounds(cfg, out):
    rows = []
    for si, sp in enumerate(cfg.spectra):
        A, kw = _spectrum_matrix(sp, derive_seed(cfg.seeds[0], 100 + si), cfg.n)
        names = [b for b in cfg.bounds
                 if not (b == "severe_refined" and "rho" not in kw)
                 and not (b == "moderate_refined" and "alpha" not in kw)]
        sigma = np.linalg.svd(A, compute_uv=False)
        for k, q in _kq_pairs(cfg):
            recs = bl.empirical_bound_check(A, names, k, q, cfg.trials, cfg.seeds[0],
                                            rho=kw.get("rho"), alpha=kw.get("alpha"), sigma=sigma)
            for r in recs:
                rows.append({"spectrum": _label(sp), "bound": r.bound, "k": r.k, "q": r.q,
                             "seed": r.seed, "observed_error": r.observed_error,
                             "bound_value": r.bound_value, "held": int(r.held)})
    fields = ["spectrum", "bound", "k", "q", "seed", "observed_error", "bound_value", "held"]
    _write_csv(out / "bounds.csv", fields, rows)
    return out


def _run_sharpness(cfg, out):
    for si, sp in enumerate(cfg.spectra):
        A, kw = _spectrum_matrix(sp, derive_seed(cfg.seeds[0], 100 + si), cfg.n)
        rows = bl.sharpness_report(A, cfg.ks, cfg.qs, cfg.seeds[0], trials=max(1, min(cfg.trials, 25)),
                                   rho=kw.get("rho"), alpha=kw.get("alpha"))
        bl.write_table_csv(rows, out / f"sharpness_{si}_{sp['kind']}.csv")
    return out


def read_results(path) -> list[dict]:
    """Parse ``results.csv``; malformed content raises ``ValueError`` naming the line."""
    conv = {"n": int, "epsilon": float, "q": int, "seed": int, "k": int,
            "relative_L_error": float, "residual": float, "seminorm": float,
            "inner_iterations": int, "converged": int, "is_k0": int}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: line 1: empty file") from None
        if header != RESULT_FIELDS:
            raise ValueError(f"{path}: line 1: unexpected header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append({f: conv.get(f, str)(v) for f, v in zip(header, rec)})
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return rows


def summarize(results_path, out_path=None) -> Path:
    """Per config cell: median/min/max best error over seeds, median k0 and inner iterations."""
    rows = read_results(results_path)
    cells: dict = {}
    for r in rows:
        ck = (r["problem"], r["n"], r["L_kind"], r["epsilon"], r["q"])
        cells.setdefault(ck, {}).setdefault(r["seed"], []).append(r)
    out_rows = []
    for ck, seeds in cells.items():
        best, k0s, iters = [], [], []
        for seed_rows in seeds.values():
            k0_rows = [r for r in seed_rows if r["is_k0"]]
            pick = k0_rows[0] if k0_rows else min(seed_rows, key=lambda r: r["relative_L_error"])
            best.append(pick["relative_L_error"])
            k0s.append(pick["k"])
            iters.append(sum(r["inner_iterations"] for r in seed_rows))
        out_rows.append(dict(zip(SUMMARY_FIELDS[:5], ck)) | {
            "seeds": len(seeds),
            "median_best_error": float(statistics.median(best)),
            "min_best_error": float(min(best)),
            "max_best_error": float(max(best)),
            "median_k0": float(statistics.median(k0s)),
            "median_total_inner_iterations": float(statistics.median(iters)),
        })
    out_path = Path(out_path) if out_path is not None else Path(results_path).with_name("summary.csv")
    _write_csv(out_path, SUMMARY_FIELDS, out_rows)
    return out_path


def format_cell(error: float, k0) -> str:
    """Table cell in the ``error(k0)`` style, e.g. ``0.2043(7)``."""
    k0 = int(k0) if float(k0).is_integer() else k0
    return f"{error:.4f}({k0})"


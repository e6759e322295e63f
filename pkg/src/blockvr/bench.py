"""Benchmark harness: multi-seed convergence curves over effective passes.

A run takes a flat key=value config, builds one problem instance, resolves a
high-accuracy reference optimum (cached on disk), runs each requested solver
over several seeds, and writes per-solver CSV files of seed-averaged
log10 suboptimality per epoch plus an SVG plot of the curves.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import os
from dataclasses import dataclass

import numpy as np

from . import fast, reference
from .data import (
    SparseDataset,
    make_partition,
    make_sparse_classification,
    parse_libsvm,
)
from .model import ErmModel, Problem, logistic, ridge_logistic, squared_error
from .records import RunRecord
from .regularizer import l1, zero
from .rng import RngStream
from .schedule import ScheduleConfig

SUBOPT_FLOOR = 1e-15


@dataclass
class BenchConfig:
    """Flat benchmark configuration; every field is settable from the config
    file and from -o key=value overrides."""
    dataset: str = "synthetic"   # "synthetic" or a path to a libsvm-format file
    n: int = 200                 # synthetic rows
    d: int = 120                 # synthetic columns
    density: float = 0.05        # synthetic nonzero fraction
    data_seed: int = 0
    loss: str = "logistic"       # "logistic" or "squared"
    lam1: float = 1e-3
    lam2: float = 0.0
    blocks: int = 8
    batch: int = 1
    epochs: int = 12
    inner: int = 0               # inner steps per epoch; 0 -> n*blocks/batch
    mode: str = "practical"      # schedule mode for the accelerated solvers
    nu: float = 4.0
    step_cap: float = 8.0
    solvers: str = "avrbcd,avrbcd-as,svrg,mrbcd2,mrbcd3,katyusha"
    seeds: int = 10
    seed0: int = 1
    ref_epochs: int = 200
    out_dir: str = "bench_out"
    plot: bool = True

    def inner_steps(self, n: int) -> int:
        if self.inner > 0:
            return self.inner
        return max(1, (n * self.blocks) // self.batch)


def parse_config(path: str) -> dict[str, str]:
    """Read a flat key = value file; '#' starts a comment, blanks ignored."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{line_no}: expected key = value")
            key, val = text.split("=", 1)
            raw[key.strip()] = val.strip()
    return raw


def _coerce(name: str, text: str, target_type) -> object:
    if target_type is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config field {name}: not a boolean: {text!r}")
    try:
        return target_type(text)
    except ValueError as exc:
        raise ValueError(f"config field {name}: {exc}") from exc


def build_config(mapping: dict[str, str] | None = None,
                 overrides: list[str] | None = None) -> BenchConfig:
    """Merge a parsed config mapping and key=value override strings."""
    fields = {f.name: f.type for f in dataclasses.fields(BenchConfig)}
    types = {"dataset": str, "loss": str, "mode": str, "solvers": str,
             "out_dir": str}
    defaults = BenchConfig()
    for f in dataclasses.fields(BenchConfig):
        types.setdefault(f.name, type(getattr(defaults, f.name)))
    merged: dict[str, object] = {}
    items = list((mapping or {}).items())
    for ov in overrides or []:
        if "=" not in ov:
            raise ValueError(f"override must be key=value, got {ov!r}")
        key, val = ov.split("=", 1)
        items.append((key.strip(), val.strip()))
    for key, val in items:
        if key not in fields:
            raise ValueError(f"unknown config field: {key}")
        merged[key] = _coerce(key, val, types[key])
    return BenchConfig(**merged)


def config_hash(cfg: BenchConfig) -> str:
    text = repr(sorted(dataclasses.asdict(cfg).items()))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def problem_hash(cfg: BenchConfig) -> str:
    """Hash of the fields that determine the optimization problem itself
    (dataset identity, loss, penalties); runs that share it share the
    reference optimum."""
    keys = ("dataset", "n", "d", "density", "data_seed", "loss", "lam1", "lam2")
    text = repr([(k, getattr(cfg, k)) for k in keys])
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def build_problem(cfg: BenchConfig):
    """Materialize (problem, partition) for a config."""
    if cfg.dataset == "synthetic":
        ds = make_sparse_classification(cfg.n, cfg.d, cfg.density,
                                        seed=cfg.data_seed)
    else:
        ds = parse_libsvm(cfg.dataset)
    if cfg.loss == "logistic":
        kind = ridge_logistic(cfg.lam2) if cfg.lam2 > 0 else logistic()
    elif cfg.loss == "squared":
        if cfg.lam2 != 0.0:
            raise ValueError("lam2 is only supported with the logistic loss")
        kind = squared_error()
    else:
        raise ValueError(f"unknown loss: {cfg.loss}")
    model = ErmModel(ds, kind)
    reg = l1(cfg.lam1) if cfg.lam1 > 0 else zero()
    part = make_partition(ds.d, cfg.blocks)
    return Problem(model, reg), part


def _full_smoothness(model: ErmModel) -> float:
    """Smoothness constant of the averaged smooth part, via power iteration
    on the Gram matrix of the data."""
    ds = model.ds
    rng = np.random.default_rng(0)
    w = rng.standard_normal(ds.d)
    w /= np.linalg.norm(w)
    lam = 0.0
    for _ in range(200):
        t = ds.dot(w)
        w_new = ds.accumulate_rows(t)
        norm = np.linalg.norm(w_new)
        if norm == 0.0:
            break
        lam_new = norm
        w = w_new / norm
        if abs(lam_new - lam) <= 1e-10 * max(lam_new, 1.0):
            lam = lam_new
            break
        lam = lam_new
    return model.kind.curvature * lam / ds.n + model.kind.lam2


def _polish_prox_gradient(problem: Problem, x: np.ndarray,
                          max_iter: int = 2000) -> tuple[np.ndarray, float]:
    """Deterministic full proximal-gradient descent from x; monotone, used to
    tighten the stochastic reference solution."""
    model, reg = problem.model, problem.reg
    from .regularizer import prox_full

    L = max(_full_smoothness(model), 1e-12)
    step = 1.0 / L
    best = problem.objective(x)
    for _ in range(max_iter):
        grad, _ = model.full_gradient(x)
        x_new = prox_full(reg, x - step * grad, step)
        obj = problem.objective(x_new)
        if not np.isfinite(obj):
            break
        x = x_new
        if best - obj <= 1e-15 * max(1.0, abs(best)):
            best = min(best, obj)
            break
        best = min(best, obj)
    return x, best


def compute_reference_optimum(problem: Problem, part, cfg: BenchConfig,
                              cache_dir: str) -> float:
    """Return a high-accuracy objective optimum for the configured problem,
    caching the result (and the minimizer) on disk keyed by the problem
    fields."""
    os.makedirs(cache_dir, exist_ok=True)
    key = problem_hash(cfg)
    path = os.path.join(cache_dir, f"ref_{key}.npz")
    if os.path.exists(path):
        with np.load(path) as blob:
            if str(blob["key"]) == key and int(blob["d"]) == problem.model.d:
                return float(blob["F"])
    profile = problem.model.estimate_smoothness(part)
    sched = ScheduleConfig(mode="practical", step_cap=cfg.step_cap)
    n = problem.model.n
    m = max(1, 2 * n)
    rng = RngStream(cfg.data_seed + 977)
    x, record = fast.avrbcd2_run(problem, part, sched, m, cfg.ref_epochs, rng,
                                 profile=profile, solver_name="reference")
    if not all(np.isfinite(o) for o in record.objectives):
        # aggressive practical steps can diverge on badly scaled data; the
        # conservative schedule always converges, just more slowly
        sched = ScheduleConfig(mode="theory", nu=cfg.nu)
        rng = RngStream(cfg.data_seed + 977)
        x, record = fast.avrbcd2_run(problem, part, sched, m, cfg.ref_epochs,
                                     rng, profile=profile,
                                     solver_name="reference")
    x, f_polished = _polish_prox_gradient(problem, x)
    f_star = min(f_polished, min(record.objectives))
    np.savez(path, F=f_star, x=x, key=key, d=problem.model.d)
    return float(f_star)


# ---------------------------------------------------------------------------
# solver registry

def _sched(cfg: BenchConfig) -> ScheduleConfig:
    return ScheduleConfig(mode=cfg.mode, nu=cfg.nu, step_cap=cfg.step_cap)


def _run_avrbcd(problem, part, profile, cfg, seed) -> RunRecord:
    m = cfg.inner_steps(problem.model.n)
    _, rec = fast.avrbcd2_run(problem, part, _sched(cfg), m, cfg.epochs,
                              RngStream(seed), batch=cfg.batch,
                              profile=profile)
    return rec


def _run_avrbcd_as(problem, part, profile, cfg, seed) -> RunRecord:
    m = cfg.inner_steps(problem.model.n)
    _, rec = fast.avrbcd2_run(problem, part, _sched(cfg), m, cfg.epochs,
                              RngStream(seed), batch=cfg.batch,
                              profile=profile, active_set=True)
    return rec


def _run_svrg(problem, part, profile, cfg, seed) -> RunRecord:
    m = max(1, problem.model.n // cfg.batch)
    _, rec = reference.svrg_run(problem, m, cfg.epochs, RngStream(seed))
    return rec


def _run_mrbcd2(problem, part, profile, cfg, seed) -> RunRecord:
    m = cfg.inner_steps(problem.model.n)
    _, rec = reference.mrbcd2_run(problem, part, m, cfg.epochs,
                                  RngStream(seed), batch=cfg.batch)
    return rec


def _run_mrbcd3(problem, part, profile, cfg, seed) -> RunRecord:
    m = cfg.inner_steps(problem.model.n)
    _, rec = reference.mrbcd3_run(problem, part, m, cfg.epochs,
                                  RngStream(seed), batch=cfg.batch)
    return rec


def _run_katyusha(problem, part, profile, cfg, seed) -> RunRecord:
    m = max(1, problem.model.n // cfg.batch)
    _, rec = reference.katyusha_run(problem, _sched(cfg), m, cfg.epochs,
                                    RngStream(seed), batch=cfg.batch)
    return rec


SOLVER_REGISTRY = {
    "avrbcd": _run_avrbcd,
    "avrbcd-as": _run_avrbcd_as,
    "svrg": _run_svrg,
    "mrbcd2": _run_mrbcd2,
    "mrbcd3": _run_mrbcd3,
    "katyusha": _run_katyusha,
}


# ---------------------------------------------------------------------------
# aggregation and serialization

def log_suboptimality(objectives, f_star: float) -> np.ndarray:
    """log10(F - F*), NaN where the gap is at or below the floor."""
    gap = np.asarray(objectives, dtype=float) - f_star
    out = np.full(gap.shape, np.nan)
    ok = gap > SUBOPT_FLOOR
    out[ok] = np.log10(gap[ok])
    return out


def aggregate_records(records: list[RunRecord], f_star: float) -> dict:
    """Pointwise per-epoch aggregation across seeds.

    Runs containing a non-finite objective are dropped (reported in
    'failed_seeds'); remaining curves are averaged epochwise in log10
    suboptimality, NaN-aware so seeds that reach the floor stop
    contributing without poisoning the mean.
    """
    good, failed = [], []
    for rec in records:
        if all(np.isfinite(o) for o in rec.objectives):
            good.append(rec)
        else:
            failed.append(rec.seed)
    if not good:
        return {"failed_seeds": failed, "runs": 0}
    epochs = min(len(r.objectives) for r in good)
    logs = np.stack([log_suboptimality(r.objectives[:epochs], f_star)
                     for r in good])
    passes = np.stack([np.asarray(r.effective_passes[:epochs]) for r in good])
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(logs, axis=0)
        std = np.nanstd(logs, axis=0)
    return {
        "failed_seeds": failed,
        "runs": len(good),
        "epoch": np.arange(1, epochs + 1),
        "passes": passes.mean(axis=0),
        "mean_log10_subopt": mean,
        "std_log10_subopt": std,
    }


def write_solver_csv(path: str, agg: dict, cfg_hash: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config={cfg_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "effective_passes", "mean_log10_subopt",
                         "std_log10_subopt", "runs"])
        for k in range(len(agg["epoch"])):
            writer.writerow([
                int(agg["epoch"][k]),
                f"{agg['passes'][k]:.6f}",
                f"{agg['mean_log10_subopt'][k]:.10g}",
                f"{agg['std_log10_subopt'][k]:.10g}",
                agg["runs"],
            ])


def read_solver_csv(path: str) -> dict:
    """Round-trip reader for write_solver_csv output; NaN cells survive."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config="):
            raise ValueError(f"{path}: missing config comment line")
        cfg_hash = first.split("=", 1)[1]
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {name: [] for name in header}
    for row in body:
        for name, cell in zip(header, row):
            cols[name].append(cell)
    return {
        "config": cfg_hash,
        "epoch": np.array([int(c) for c in cols["epoch"]]),
        "passes": np.array([float(c) for c in cols["effective_passes"]]),
        "mean_log10_subopt": np.array(
            [float(c) for c in cols["mean_log10_subopt"]]),
        "std_log10_subopt": np.array(
            [float(c) for c in cols["std_log10_subopt"]]),
        "runs": np.array([int(c) for c in cols["runs"]]),
    }


def run_bench(cfg: BenchConfig, *, quiet: bool = False) -> dict:
    """Execute the full protocol; returns {solver: aggregate} plus metadata."""
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    problem, part = build_problem(cfg)
    profile = problem.model.estimate_smoothness(part)
    f_star = compute_reference_optimum(
        problem, part, cfg, os.path.join(out_dir, "cache"))
    cfg_hash = config_hash(cfg)
    say = (lambda *_: None) if quiet else print

    with open(os.path.join(out_dir, "config_used.txt"), "w",
              encoding="utf-8") as fh:
        for f in dataclasses.fields(BenchConfig):
            fh.write(f"{f.name} = {getattr(cfg, f.name)}\n")
        fh.write(f"# hash = {cfg_hash}\n")

    names = [s.strip() for s in cfg.solvers.split(",") if s.strip()]
    results: dict[str, dict] = {}
    curves = []
    for name in names:
        if name not in SOLVER_REGISTRY:
            raise ValueError(f"unknown solver: {name}")
        runner = SOLVER_REGISTRY[name]
        records = []
        for k in range(cfg.seeds):
            records.append(runner(problem, part, profile, cfg, cfg.seed0 + k))
        agg = aggregate_records(records, f_star)
        if agg["failed_seeds"]:
            say(f"[bench] {name}: dropped non-finite runs for seeds "
                f"{agg['failed_seeds']}")
        results[name] = agg
        if agg["runs"] > 0:
            write_solver_csv(os.path.join(out_dir, f"{name}.csv"),
                             agg, cfg_hash)
            curves.append((name, agg["passes"], agg["mean_log10_subopt"]))
            say(f"[bench] {name}: {agg['runs']} runs, final mean log10 gap "
                f"{agg['mean_log10_subopt'][-1]:.3f}")
        else:
            say(f"[bench] {name}: all runs failed, no CSV written")
    plot_path = None
    if cfg.plot and curves:
        from .plotting import render_curves
        plot_path = os.path.join(out_dir, "curves.svg")
        render_curves(plot_path, curves)
        say(f"[bench] wrote {plot_path}")
    results["_meta"] = {
        "f_star": f_star,
        "config_hash": cfg_hash,
        "out_dir": out_dir,
        "plot": plot_path,
    }
    return results

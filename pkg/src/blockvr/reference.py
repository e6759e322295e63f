"""Full-vector solver implementations.

These favor clarity over per-step cost: every inner step manipulates whole
d-vectors, which makes them direct transcriptions of the update equations
and the ground truth that the operation-lean solver in ``fast.py`` is tested
against.  All of them share the coordinate-level work accounting described
in ``records.CostCounters`` so convergence curves are comparable.
"""
from __future__ import annotations

import numpy as np

from .data import BlockPartition, make_partition
from .model import Problem, loss_scalar_deriv
from .records import CostCounters, RunRecord
from .regularizer import prox_block, prox_full
from .rng import RngStream
from .schedule import ScheduleConfig, advance_epoch, init_schedule


def _pad(v: np.ndarray, D: int) -> np.ndarray:
    out = np.zeros(D)
    out[: len(v)] = v
    return out


def _block_nnz(idx: np.ndarray, lo: int, hi: int) -> tuple[int, int]:
    a, b = np.searchsorted(idx, (lo, hi))
    return int(a), int(b)


def avrbcd1_run(
    problem: Problem,
    part: BlockPartition,
    sched_cfg: ScheduleConfig,
    m: int,
    epochs: int,
    rng: RngStream,
    *,
    batch: int = 1,
    x0: np.ndarray | None = None,
    profile=None,
    counters: CostCounters | None = None,
    trace: list | None = None,
    solver_name: str = "avrbcd-ref",
) -> tuple[np.ndarray, RunRecord]:
    """Accelerated variance-reduced block coordinate descent, full-vector form.

    Per epoch: one full gradient at the snapshot, then m inner steps of the
    three-point coupling

        y_k = a1*x_{k-1} + a2*z_{k-1} + a3*snapshot
        [z_k]_l = prox(  [z_{k-1} - eta*v_k]_l )     for one sampled block l
        x_k = y_k + a2*B*(z_k - z_{k-1})

    with v_k the variance-reduced mixed gradient at y_k.  The next snapshot
    is x at a uniformly sampled inner index.
    """
    if m < 1 or epochs < 1:
        raise ValueError("m and epochs must be positive")
    model, reg = problem.model, problem.reg
    ds = model.ds
    n, d = model.n, model.d
    D = part.padded_d
    if profile is None:
        profile = model.estimate_smoothness(part)
    if counters is None:
        counters = CostCounters()
    lam2 = model.kind.lam2

    x = _pad(x0 if x0 is not None else np.zeros(d), D)
    z = x.copy()
    snap = x.copy()

    record = RunRecord(solver=solver_name, seed=rng.seed)
    record.start_clock()
    params = init_schedule(sched_cfg, part.B, profile)
    for s in range(epochs):
        if s > 0:
            params = advance_epoch(params, sched_cfg, part.B, profile)
        mu_d, snap_margins = model.full_gradient(snap)
        mu = _pad(mu_d, D)
        counters.coord_grad_evals += n * d
        counters.full_vector_ops += 1
        sigma = rng.draw_sigma(m)
        a1, a2, a3 = params.alpha1, params.alpha2, params.alpha3
        eta, a2B = params.eta, params.alpha2 * part.B
        x_sigma = None
        for j in range(1, m + 1):
            y = a1 * x + a2 * z + a3 * snap
            ids = rng.draw_batch(n, batch)
            l = rng.draw_block(part.B)
            lo, hi = part.block_range(l)
            v = mu.copy()
            for i in ids:
                idx, val = ds.row(i)
                t_y = float(np.dot(val, y[idx]))
                gd = loss_scalar_deriv(model.kind, t_y, float(ds.labels[i]))
                gd -= loss_scalar_deriv(
                    model.kind, float(snap_margins[i]), float(ds.labels[i])
                )
                v[idx] += (gd / batch) * val
                a_seg, b_seg = _block_nnz(idx, lo, hi)
                counters.coord_grad_evals += b_seg - a_seg
            if lam2:
                v += lam2 * (y - snap)
            z_new_l = prox_block(reg, z[lo:hi] - eta * v[lo:hi], eta)
            if trace is not None:
                trace_y = y.copy()
            x = y
            x[lo:hi] += a2B * (z_new_l - z[lo:hi])
            z[lo:hi] = z_new_l
            counters.inner_steps += 1
            counters.full_vector_ops += 1
            if j == sigma:
                x_sigma = x.copy()
            if trace is not None:
                trace.append((trace_y, x.copy(), z.copy()))
        snap = x_sigma
        obj = model.objective_smooth(snap) + reg.eval(snap[:d])
        record.add(s + 1, counters.effective_passes(n, d), obj, counters.coord_grad_evals)
    record.meta["counters"] = counters
    return snap[:d].copy(), record


def katyusha_run(
    problem: Problem,
    sched_cfg: ScheduleConfig,
    m: int,
    epochs: int,
    rng: RngStream,
    *,
    batch: int = 1,
    x0: np.ndarray | None = None,
    counters: CostCounters | None = None,
) -> tuple[np.ndarray, RunRecord]:
    """Single-block degeneracy of avrbcd1_run: with B = 1 the block update is
    a full-vector proximal step and the coupling reduces to the classic
    negative-momentum accelerated variance-reduced method."""
    part = make_partition(problem.model.d, 1)
    return avrbcd1_run(
        problem, part, sched_cfg, m, epochs, rng,
        batch=batch, x0=x0, counters=counters, solver_name="katyusha",
    )


def svrg_run(
    problem: Problem,
    m: int,
    epochs: int,
    rng: RngStream,
    *,
    eta: float | None = None,
    x0: np.ndarray | None = None,
    counters: CostCounters | None = None,
) -> tuple[np.ndarray, RunRecord]:
    """Proximal stochastic variance-reduced gradient baseline.

    Full-vector updates, step 1/(2 L_max) unless given, snapshot = last
    inner iterate of the epoch.
    """
    model, reg = problem.model, problem.reg
    ds = model.ds
    n, d = model.n, model.d
    if counters is None:
        counters = CostCounters()
    lam2 = model.kind.lam2
    if eta is None:
        eta = 1.0 / (2.0 * float(np.max(model.component_smoothness())))

    x = (x0 if x0 is not None else np.zeros(d)).astype(float).copy()[:d]
    snap = x.copy()
    record = RunRecord(solver="svrg", seed=rng.seed)
    record.start_clock()
    for s in range(epochs):
        mu, snap_margins = model.full_gradient(snap)
        counters.coord_grad_evals += n * d
        counters.full_vector_ops += 1
        for _ in range(m):
            i = int(rng.draw_batch(n, 1)[0])
            idx, val = ds.row(i)
            t_x = float(np.dot(val, x[idx]))
            gd = loss_scalar_deriv(model.kind, t_x, float(ds.labels[i]))
            gd -= loss_scalar_deriv(
                model.kind, float(snap_margins[i]), float(ds.labels[i])
            )
            v = mu.copy()
            v[idx] += gd * val
            if lam2:
                v += lam2 * (x - snap)
            x = prox_full(reg, x - eta * v, eta)
            counters.coord_grad_evals += len(idx)
            counters.inner_steps += 1
            counters.full_vector_ops += 1
        snap = x.copy()
        obj = model.objective_smooth(snap) + reg.eval(snap)
        record.add(s + 1, counters.effective_passes(n, d), obj, counters.coord_grad_evals)
    record.meta["counters"] = counters
    return snap.copy(), record


def mrbcd2_run(
    problem: Problem,
    part: BlockPartition,
    m: int,
    epochs: int,
    rng: RngStream,
    *,
    eta: float | None = None,
    batch: int = 1,
    x0: np.ndarray | None = None,
    counters: CostCounters | None = None,
    active_set: bool = False,
    solver_name: str | None = None,
) -> tuple[np.ndarray, RunRecord]:
    """Mini-batch randomized block coordinate descent with variance reduction.

    Each inner step applies the variance-reduced mixed gradient restricted
    to one sampled block followed by the block prox; there is no momentum
    coupling.  Step size 4/L_max unless given; snapshot = last iterate.

    With ``active_set`` a prox-thresholded support predictor is formed at
    each snapshot and sampled blocks on which the predictor vanishes are
    skipped (the draw is consumed, no gradient work happens).
    """
    model, reg = problem.model, problem.reg
    ds = model.ds
    n, d = model.n, model.d
    D = part.padded_d
    if counters is None:
        counters = CostCounters()
    lam2 = model.kind.lam2
    L_max = float(np.max(model.component_smoothness()))
    if eta is None:
        eta = 4.0 / L_max

    x = _pad(x0 if x0 is not None else np.zeros(d), D)
    snap = x.copy()
    name = solver_name or ("mrbcd3" if active_set else "mrbcd2")
    record = RunRecord(solver=name, seed=rng.seed)
    record.start_clock()
    for s in range(epochs):
        mu_d, snap_margins = model.full_gradient(snap)
        mu = _pad(mu_d, D)
        counters.coord_grad_evals += n * d
        counters.full_vector_ops += 1
        skip_block = None
        if active_set:
            pred = prox_full(reg, snap - mu / L_max, 1.0 / L_max)
            skip_block = [
                not np.any(pred[part.block_range(l)[0] : part.block_range(l)[1]])
                for l in range(part.B)
            ]
            counters.full_vector_ops += 1
        for _ in range(m):
            ids = rng.draw_batch(n, batch)
            l = rng.draw_block(part.B)
            if skip_block is not None and skip_block[l]:
                counters.skipped_steps += 1
                continue
            lo, hi = part.block_range(l)
            v = mu[lo:hi].copy()
            for i in ids:
                idx, val = ds.row(i)
                t_x = float(np.dot(val, x[idx]))
                gd = loss_scalar_deriv(model.kind, t_x, float(ds.labels[i]))
                gd -= loss_scalar_deriv(
                    model.kind, float(snap_margins[i]), float(ds.labels[i])
                )
                a_seg, b_seg = _block_nnz(idx, lo, hi)
                if b_seg > a_seg:
                    v[idx[a_seg:b_seg] - lo] += (gd / batch) * val[a_seg:b_seg]
                counters.coord_grad_evals += b_seg - a_seg
            if lam2:
                v += lam2 * (x[lo:hi] - snap[lo:hi])
            x[lo:hi] = prox_block(reg, x[lo:hi] - eta * v, eta)
            counters.inner_steps += 1
        snap = x.copy()
        obj = model.objective_smooth(snap) + reg.eval(snap[:d])
        record.add(s + 1, counters.effective_passes(n, d), obj, counters.coord_grad_evals)
    record.meta["counters"] = counters
    return snap[:d].copy(), record


def mrbcd3_run(problem, part, m, epochs, rng, **kw):
    """mrbcd2_run with the active-set skip rule enabled."""
    kw["active_set"] = True
    return mrbcd2_run(problem, part, m, epochs, rng, **kw)

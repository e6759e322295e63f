"""Operation-lean accelerated variance-reduced block coordinate descent.

Mathematically this solver produces the same iterates as
``reference.avrbcd1_run``; the difference is that no inner step touches a
full d-vector.  The three coupled sequences are carried implicitly:

* ``zhat``     offset form of z:        z = zhat + xdot
* ``store``    scaled momentum term:    beta_j * u_j = alpha1^pend * store
                                        (blockwise pending decay exponents)
* ``xdot``     the current snapshot, the only dense vector of the epoch

so that  y_j = alpha1^pend * store + gamma * zhat + xdot  with
gamma = alpha2/(1-alpha1), and each inner step only touches the sampled
rows and the sampled block.  Decay by alpha1 is applied lazily: one global
counter increment per step, materialized per block on its next touch.
``alpha1^pend * store`` never divides by alpha1 or beta, so the scheme is
well defined when alpha1 = 0 (beta underflows to exact zero in a few
thousand steps when alpha1 is close to 1, which is why the naive "store u
and beta separately" bookkeeping breaks; see the stability tests).

Sampled-row margins against z are served from a cache: a per-sample stamp
plus a short journal of recent (step, block, delta) z-updates lets stale
margins be replayed forward when that is cheaper than an O(nnz(a_i))
recompute.

The uniformly sampled snapshot index sigma is handled without storing
per-step iterates: when step sigma completes, the solver records the decay
counters and switches the block stores to copy-on-write, so the epoch-end
reconstruction can rebuild x_sigma from the preserved blocks.  All dense
O(d) work happens between epochs; ``CostCounters.full_vector_ops`` stays
flat across inner steps.
"""
from __future__ import annotations

from collections import deque

import numpy as np

from .data import BlockPartition
from .model import Problem, loss_scalar_deriv
from .records import CostCounters, RunRecord
from .regularizer import prox_block, prox_full
from .rng import RngStream
from .schedule import ScheduleConfig, advance_epoch, init_schedule

JOURNAL_LEN = 64


class EpochStateFast:
    """Mutable per-run state of the operation-lean solver, exposed so tests
    can materialize and check the implicit representation mid-run."""

    def __init__(self, D: int, B: int, n: int, x0_padded: np.ndarray):
        self.D = D
        self.B = B
        self.xdot = x0_padded.copy()          # snapshot (dense, per-epoch)
        self.zhat = np.zeros(D)               # z - xdot
        self.store = np.zeros(D)              # alpha1^pend * store = beta*u
        self.pend = np.zeros(B, dtype=np.int64)   # lazy decay exponents
        self.fac = np.ones(B)                 # alpha1**pend, kept in step
        self.xoff_start = np.zeros(D)         # x_bar_0 - xdot, for 0-step epochs
        self.real_steps = 0                   # non-skipped steps this epoch
        # snapshot capture
        self.cow_active = False
        self.cow_store: dict[int, np.ndarray] = {}
        self.cow_zhat: dict[int, np.ndarray] = {}
        self.cap_pend: np.ndarray | None = None
        self.cap_real = 0
        # margin cache for z
        self.margins_zhat = np.zeros(n)
        self.stamps = np.full(n, -1, dtype=np.int64)
        self.journal: deque = deque()
        self.last_evicted = 0
        self.step = 0

    # -- materialization helpers (dense; used by tests and epoch boundaries)

    def momentum_term(self, omega: int) -> np.ndarray:
        """The scaled momentum vector alpha1^pend * store, blockwise."""
        return self.store * np.repeat(self.fac, omega)[: self.D]

    def y_bar(self, gamma: float, omega: int) -> np.ndarray:
        return self.momentum_term(omega) + gamma * self.zhat + self.xdot

    def x_bar(self, alpha1: float, gamma: float, omega: int) -> np.ndarray:
        """Post-step iterate x_j = beta_{j-1}*u_j + gamma*zhat_j + xdot.

        beta_{j-1}*u_j strips one decay: alpha1^(pend-1) * store.  Valid
        once the epoch has at least one non-skipped step (every pend >= 1);
        before that x equals its epoch-start value.
        """
        if self.real_steps == 0:
            return self.xoff_start + self.xdot
        strip = np.power(alpha1, self.pend - 1)
        return self.store * np.repeat(strip, omega)[: self.D] + gamma * self.zhat + self.xdot

    def z_bar(self) -> np.ndarray:
        return self.zhat + self.xdot


def _zhat_margin(state: EpochStateFast, i: int, idx, val, bset, lo_of, omega,
                 counters: CostCounters) -> float:
    """Return a_i . zhat, via cache replay when cheap, else recompute."""
    target = state.step - 1  # z-state version the margin must reflect
    st = int(state.stamps[i])
    if st == target:
        return float(state.margins_zhat[i])
    pending = target - st
    if st >= state.last_evicted and pending <= min(JOURNAL_LEN, state.B):
        mz = float(state.margins_zhat[i])
        for step_t, l_t, delta in reversed(state.journal):
            if step_t <= st:
                break
            if l_t in bset:
                lo = lo_of(l_t)
                a, b = np.searchsorted(idx, (lo, lo + omega))
                if b > a:
                    mz += float(np.dot(val[a:b], delta[idx[a:b] - lo]))
                    counters.block_touches += 1
        state.margins_zhat[i] = mz
        state.stamps[i] = target
        return mz
    mz = float(np.dot(val, state.zhat[idx]))
    counters.block_touches += len(bset)
    state.margins_zhat[i] = mz
    state.stamps[i] = target
    return mz


def avrbcd2_run(
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
    active_set: bool = False,
    trace: list | None = None,
    debug_hook=None,
    solver_name: str | None = None,
) -> tuple[np.ndarray, RunRecord]:
    """Run the operation-lean solver for ``epochs`` epochs of ``m`` steps.

    Draws random indices in the same order as ``reference.avrbcd1_run``
    (batch rows, then block, sigma at epoch start), so with equal seeds the
    two solvers follow the same sample path and their iterates agree to
    rounding.

    ``active_set``: at each snapshot a prox-thresholded support predictor
    is formed; steps drawing a block with an all-zero predictor block skip
    all gradient work (the draw is consumed and the coupling advances with
    a zero block update, exactly what the unskipped step would do whenever
    the prox leaves the dead block at zero).

    ``trace``: if a list is given, (y, x, z) dense triples are appended per
    inner step (test instrumentation; not counted as solver work).
    ``debug_hook``: called as hook(state, epoch, step) after each step.
    """
    if m < 1 or epochs < 1:
        raise ValueError("m and epochs must be positive")
    model, reg = problem.model, problem.reg
    ds = model.ds
    n, d = model.n, model.d
    D, B, omega = part.padded_d, part.B, part.omega
    if profile is None:
        profile = model.estimate_smoothness(part)
    if counters is None:
        counters = CostCounters()
    lam2 = model.kind.lam2
    lo_of = lambda l: l * omega  # noqa: E731

    rows_idx = [ds.indices[ds.indptr[i]: ds.indptr[i + 1]] for i in range(n)]
    rows_val = [ds.values[ds.indptr[i]: ds.indptr[i + 1]] for i in range(n)]
    rows_bid = [idx // omega for idx in rows_idx]
    rows_bset = [set(np.unique(bid).tolist()) for bid in rows_bid]
    labels = ds.labels

    x0p = np.zeros(D)
    x0p[:d] = x0 if x0 is not None else 0.0
    state = EpochStateFast(D, B, n, x0p)
    # epoch 0: z = x0, so zhat = 0 and the momentum store starts empty.

    name = solver_name or ("avrbcd-as" if active_set else "avrbcd")
    record = RunRecord(solver=name, seed=rng.seed)
    record.start_clock()
    mu = np.zeros(D)
    params = init_schedule(sched_cfg, B, profile)
    for s in range(epochs):
        mu_d, margins_snap = model.full_gradient(state.xdot[:d])
        mu[:d] = mu_d
        counters.coord_grad_evals += n * d
        counters.full_vector_ops += 1
        skip_block = None
        if active_set:
            pred = prox_full(reg, state.xdot - mu / profile.L_max, 1.0 / profile.L_max)
            skip_block = np.array(
                [not np.any(pred[lo_of(l): lo_of(l) + omega]) for l in range(B)]
            )
            counters.full_vector_ops += 1
        sigma = rng.draw_sigma(m)
        a1, a2, g = params.alpha1, params.alpha2, params.gamma
        eta = params.eta
        coeff = a2 * B - g
        snap_d = loss_scalar_deriv  # local alias
        kind = model.kind
        for j in range(1, m + 1):
            state.step = j
            ids = rng.draw_batch(n, batch)
            l = rng.draw_block(B)
            if skip_block is not None and skip_block[l]:
                # skipped step: the coupling advances with a zero block
                # update (z untouched, so x_j = y_j and the momentum store
                # just decays lazily); no gradient coordinates are evaluated
                if trace is not None:
                    trace_y = state.y_bar(g, omega)
                state.pend += 1
                state.fac *= a1
                state.real_steps += 1
                counters.skipped_steps += 1
                if debug_hook is not None:
                    debug_hook(state, s, j)
                if trace is not None:
                    trace.append(
                        (trace_y, state.x_bar(a1, g, omega), state.z_bar())
                    )
                if j == sigma:
                    _capture(state)
                continue
            lo = lo_of(l)
            hi = lo + omega
            if trace is not None:
                trace_y = state.y_bar(g, omega)
            # variance-reduced block gradient at the implicit y
            v = mu[lo:hi].copy()
            segs = []
            for i in ids:
                i = int(i)
                idx, val, bid = rows_idx[i], rows_val[i], rows_bid[i]
                t_y = float(np.dot(val * state.store[idx], state.fac[bid]))
                t_y += g * _zhat_margin(
                    state, i, idx, val, rows_bset[i], lo_of, omega, counters
                )
                t_y += float(margins_snap[i])
                gd = snap_d(kind, t_y, float(labels[i]))
                gd -= snap_d(kind, float(margins_snap[i]), float(labels[i]))
                a_seg, b_seg = np.searchsorted(idx, (lo, hi))
                segs.append((i, idx[a_seg:b_seg] - lo, val[a_seg:b_seg]))
                if b_seg > a_seg:
                    v[idx[a_seg:b_seg] - lo] += (gd / batch) * val[a_seg:b_seg]
                counters.coord_grad_evals += int(b_seg - a_seg)
                counters.block_touches += 2
            if lam2:
                # y - xdot restricted to the block
                v += lam2 * (state.fac[l] * state.store[lo:hi] + g * state.zhat[lo:hi])
                counters.block_touches += 1
            # block prox on z = zhat + xdot
            z_blk = state.zhat[lo:hi] + state.xdot[lo:hi]
            z_new = prox_block(reg, z_blk - eta * v, eta) - state.xdot[lo:hi]
            delta = z_new - state.zhat[lo:hi]
            if state.cow_active and l not in state.cow_zhat:
                state.cow_zhat[l] = state.zhat[lo:hi].copy()
            state.zhat[lo:hi] = z_new
            state.journal.append((j, l, delta))
            if len(state.journal) > JOURNAL_LEN:
                state.last_evicted = state.journal.popleft()[0]
            for i, seg_idx, seg_val in segs:
                if len(seg_idx):
                    state.margins_zhat[i] += float(np.dot(seg_val, delta[seg_idx]))
                state.stamps[i] = j
            # momentum store: materialize pending decay on this block, absorb
            # the coupling term, then one lazy global decay for the step
            if state.cow_active and l not in state.cow_store:
                state.cow_store[l] = state.store[lo:hi].copy()
            state.store[lo:hi] = state.fac[l] * state.store[lo:hi] + coeff * delta
            state.pend[l] = 0
            state.pend += 1
            state.fac *= a1
            state.fac[l] = a1
            state.real_steps += 1
            counters.block_touches += 3
            counters.inner_steps += 1
            if debug_hook is not None:
                debug_hook(state, s, j)
            if trace is not None:
                trace.append(
                    (trace_y, state.x_bar(a1, g, omega), state.z_bar())
                )
            if j == sigma:
                _capture(state)
        # ---- epoch boundary: all dense work lives here
        x_m = state.x_bar(a1, g, omega)
        z_m = state.z_bar()
        xdot_next = _reconstruct_sigma(state, a1, g, omega)
        counters.full_vector_ops += 3
        obj = model.objective_smooth(xdot_next[:d]) + reg.eval(xdot_next[:d])
        record.add(s + 1, counters.effective_passes(n, d), obj, counters.coord_grad_evals)
        params = advance_epoch(params, sched_cfg, B, profile)
        state.zhat = z_m - xdot_next
        x_off = x_m - xdot_next
        u0 = x_off - params.gamma * state.zhat
        state.store = params.alpha1 * u0
        state.pend[:] = 0
        state.fac[:] = 1.0
        state.xdot = xdot_next
        state.xoff_start = x_off
        state.real_steps = 0
        state.cow_active = False
        state.cow_store.clear()
        state.cow_zhat.clear()
        state.cap_pend = None
        state.cap_real = 0
        state.stamps[:] = -1
        state.journal.clear()
        state.last_evicted = 0
        state.step = 0
        counters.full_vector_ops += 2
    record.meta["counters"] = counters
    return state.xdot[:d].copy(), record


def _capture(state: EpochStateFast) -> None:
    """Arm the copy-on-write capture of the snapshot-index iterate."""
    state.cap_real = state.real_steps
    if state.real_steps > 0:
        state.cap_pend = state.pend.copy()
    state.cow_active = True
    state.cow_store.clear()
    state.cow_zhat.clear()


def _reconstruct_sigma(state: EpochStateFast, a1: float, gamma: float,
                       omega: int) -> np.ndarray:
    """Rebuild x at the captured inner index from the copy-on-write blocks."""
    if not state.cow_active:
        raise RuntimeError("no snapshot capture armed this epoch")
    if state.cap_real == 0:
        return state.xoff_start + state.xdot
    store = state.store.copy()
    zhat = state.zhat.copy()
    for l, blk in state.cow_store.items():
        store[l * omega: l * omega + omega] = blk
    for l, blk in state.cow_zhat.items():
        zhat[l * omega: l * omega + omega] = blk
    strip = np.power(a1, state.cap_pend - 1)
    x = store * np.repeat(strip, omega)[: state.D]
    x += gamma * zhat
    x += state.xdot
    return x

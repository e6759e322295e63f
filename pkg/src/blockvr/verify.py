"""Quick self-checks runnable from the CLI (`bench verify`).

A few seconds of sanity coverage for an installed copy: schedule identities,
prox properties, gradient finite differences, and reference-vs-lean solver
agreement on a small instance.  The pytest suite is the real gate; this is
a smoke test for environments without the test tree.
"""
from __future__ import annotations

import numpy as np

from . import fast, reference
from .data import make_partition, make_sparse_classification
from .model import ErmModel, Problem, logistic
from .regularizer import l1, prox_full
from .rng import RngStream
from .schedule import ScheduleConfig, advance_epoch, init_schedule


def _check_schedule() -> str | None:
    from .model import SmoothnessProfile

    prof = SmoothnessProfile(L_max=3.0, L_block=2.0,
                             per_block=np.array([2.0, 1.0]), L_combined=4.0)
    cfg = ScheduleConfig(mode="theory", nu=4.0)
    p = init_schedule(cfg, 2, prof)
    for _ in range(2000):
        q = advance_epoch(p, cfg, 2, prof)
        lhs = (1.0 - p.alpha1) / p.alpha2 ** 2
        rhs = q.alpha3 / q.alpha2 ** 2
        if abs(lhs - rhs) > 1e-9 * max(abs(lhs), 1.0):
            return f"schedule invariant broke at epoch {q.s}"
        p = q
    return None


def _check_prox() -> str | None:
    rng = np.random.default_rng(7)
    reg = l1(0.3)
    for _ in range(100):
        v = rng.standard_normal(40)
        t = float(rng.uniform(0.05, 2.0))
        p = prox_full(reg, v, t)
        # optimality of the prox point against random competitors
        base = 0.5 * np.sum((p - v) ** 2) / t + reg.eval(p)
        for _ in range(5):
            q = p + 0.1 * rng.standard_normal(40)
            alt = 0.5 * np.sum((q - v) ** 2) / t + reg.eval(q)
            if alt < base - 1e-12:
                return "prox point is not a minimizer"
    return None


def _check_gradient() -> str | None:
    ds = make_sparse_classification(40, 25, 0.3, seed=3)
    model = ErmModel(ds, logistic())
    rng = np.random.default_rng(1)
    x = rng.standard_normal(25) * 0.5
    g, _ = model.full_gradient(x)
    h = 1e-6
    for k in (0, 7, 24):
        e = np.zeros(25)
        e[k] = h
        num = (model.objective_smooth(x + e) - model.objective_smooth(x - e)) / (2 * h)
        if abs(num - g[k]) > 1e-4 * max(1.0, abs(num)):
            return f"gradient mismatch at coordinate {k}"
    return None


def _check_equivalence() -> str | None:
    ds = make_sparse_classification(30, 20, 0.3, seed=5)
    problem = Problem(ErmModel(ds, logistic()), l1(1e-2))
    part = make_partition(20, 4)
    cfg = ScheduleConfig(mode="proximal")
    x_a, _ = reference.avrbcd1_run(problem, part, cfg, 25, 3, RngStream(11))
    x_b, _ = fast.avrbcd2_run(problem, part, cfg, 25, 3, RngStream(11))
    err = np.max(np.abs(x_a - x_b)) / max(1.0, np.max(np.abs(x_a)))
    if err > 1e-8:
        return f"solver forms disagree: rel err {err:.2e}"
    return None


CHECKS = [
    ("schedule recurrences", _check_schedule),
    ("prox optimality", _check_prox),
    ("gradient finite differences", _check_gradient),
    ("solver form equivalence", _check_equivalence),
]


def run_verify(out=print) -> bool:
    ok = True
    for name, check in CHECKS:
        problem = check()
        if problem is None:
            out(f"[ ok ] {name}")
        else:
            out(f"[FAIL] {name}: {problem}")
            ok = False
    return ok

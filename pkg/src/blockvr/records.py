"""Work counters and per-epoch run records shared by every solver."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CostCounters:
    """Coordinate-level work accounting.

    coord_grad_evals counts evaluated coordinates of component partial
    gradients: a full-gradient pass adds exactly n*d by convention, and an
    inner step adds the number of data nonzeros actually touched by the
    fresh component gradients (snapshot-side gradients are margin-cached and
    free).  Auxiliary arithmetic -- margin assembly, prox, couplings, the
    l2 ridge term -- is tracked through block_touches and full_vector_ops
    instead, so the per-step gradient count stays comparable across solvers.
    """

    coord_grad_evals: int = 0
    block_touches: int = 0
    full_vector_ops: int = 0
    inner_steps: int = 0
    skipped_steps: int = 0

    def effective_passes(self, n: int, d: int) -> float:
        return self.coord_grad_evals / (n * d)


@dataclass
class RunRecord:
    """One row per epoch, written after the snapshot update.

    Wall-clock times are informational only and excluded from determinism
    comparisons; everything else is reproducible bitwise for a fixed seed
    and configuration.
    """

    solver: str = ""
    seed: int | None = None
    epochs: list[int] = field(default_factory=list)
    effective_passes: list[float] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)
    coord_grad_evals: list[int] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    _t0: float = field(default=0.0, repr=False)

    def start_clock(self):
        self._t0 = time.perf_counter()

    def add(self, epoch: int, passes: float, objective: float, evals: int):
        if self.effective_passes and passes <= self.effective_passes[-1]:
            raise ValueError("effective passes must be strictly increasing")
        self.epochs.append(epoch)
        self.effective_passes.append(passes)
        self.objectives.append(objective)
        self.coord_grad_evals.append(evals)
        self.wall_times.append(time.perf_counter() - self._t0)

    def rows(self) -> np.ndarray:
        """(epoch, passes, objective, evals) as a float array, no timings."""
        return np.column_stack([
            np.asarray(self.epochs, dtype=float),
            np.asarray(self.effective_passes, dtype=float),
            np.asarray(self.objectives, dtype=float),
            np.asarray(self.coord_grad_evals, dtype=float),
        ])

    def same_trajectory(self, other: "RunRecord") -> bool:
        return np.array_equal(self.rows(), other.rows())

"""Block-separable regularizers and their proximal maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Regularizer:
    """P(x) = lam1 * ||x||_1, or identically zero when lam1 == 0.

    P is coordinate-separable, so the same prox applies to any coordinate
    block.  lam1 must be nonnegative and finite.
    """

    lam1: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.lam1) or self.lam1 < 0:
            raise ValueError(f"lam1 must be finite and >= 0, got {self.lam1}")

    @property
    def is_zero(self) -> bool:
        return self.lam1 == 0.0

    def eval(self, x: np.ndarray) -> float:
        if self.is_zero:
            return 0.0
        return float(self.lam1 * np.abs(x).sum())


def zero() -> Regularizer:
    return Regularizer(0.0)


def l1(lam1: float) -> Regularizer:
    return Regularizer(lam1)


def prox_block(reg: Regularizer, v: np.ndarray, step: float, out=None) -> np.ndarray:
    """argmin_p step*P(p) + 0.5*||p - v||^2 on one block of coordinates.

    Soft-thresholding for l1; identity for the zero regularizer.  step must
    be positive.
    """
    if step <= 0 or not np.isfinite(step):
        raise ValueError(f"prox step must be positive and finite, got {step}")
    if reg.is_zero:
        if out is None:
            return v.copy()
        out[:] = v
        return out
    t = step * reg.lam1
    if out is None:
        out = np.empty_like(v)
    np.abs(v, out=out)
    out -= t
    np.maximum(out, 0.0, out=out)
    out *= np.sign(v)
    return out


def prox_full(reg: Regularizer, v: np.ndarray, step: float) -> np.ndarray:
    """Full-vector prox (the separable prox applied to all coordinates)."""
    return prox_block(reg, v, step)

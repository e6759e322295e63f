"""Finite-sum linear-predictor models: losses, gradients, smoothness constants.

F(x) = (1/n) sum_i phi_i(a_i.x), optionally plus an l2 ridge folded into
every component so the finite-sum structure is preserved.  All solvers work
through the margin t_i = a_i.x, which is what makes the block-coordinate
bookkeeping cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import BlockPartition, SparseDataset, row_block_segment

LOGISTIC = "logistic"
RIDGE_LOGISTIC = "ridge_logistic"
SQUARED = "squared"
_KINDS = (LOGISTIC, RIDGE_LOGISTIC, SQUARED)


@dataclass(frozen=True)
class LossKind:
    """Scalar loss family.  lam2 is only meaningful for ridge_logistic."""

    kind: str
    lam2: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.lam2 < 0 or not np.isfinite(self.lam2):
            raise ValueError(f"lam2 must be finite and >= 0, got {self.lam2}")
        if self.kind != RIDGE_LOGISTIC and self.lam2 != 0.0:
            raise ValueError(f"lam2 only applies to {RIDGE_LOGISTIC}")

    @property
    def curvature(self) -> float:
        """Upper bound on phi'' as a function of the margin (1/4 logistic, 1 squared)."""
        return 1.0 if self.kind == SQUARED else 0.25


def logistic() -> LossKind:
    return LossKind(LOGISTIC)


def ridge_logistic(lam2: float) -> LossKind:
    return LossKind(RIDGE_LOGISTIC, lam2)


def squared_error() -> LossKind:
    return LossKind(SQUARED)


def loss_scalar(kind: LossKind, margin: float, y: float) -> float:
    """phi_i(t) at margin t (the ridge term is not a function of the margin
    and is added at the objective level)."""
    if kind.kind == SQUARED:
        r = margin - y
        return 0.5 * r * r
    # log(1 + exp(-y t)) computed without overflow
    z = -y * margin
    if z > 0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


def loss_scalar_deriv(kind: LossKind, margin: float, y: float) -> float:
    """d phi_i / d t, overflow-safe for any margin magnitude."""
    if kind.kind == SQUARED:
        return margin - y
    z = y * margin
    if z > 0:
        e = math.exp(-z)
        return -y * e / (1.0 + e)
    return -y / (1.0 + math.exp(z))


def _deriv_vec(kind: LossKind, margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if kind.kind == SQUARED:
        return margins - labels
    z = labels * margins
    out = np.empty_like(margins)
    pos = z > 0
    e = np.exp(-z[pos])
    out[pos] = -labels[pos] * e / (1.0 + e)
    out[~pos] = -labels[~pos] / (1.0 + np.exp(z[~pos]))
    return out


def _loss_vec(kind: LossKind, margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if kind.kind == SQUARED:
        return 0.5 * (margins - labels) ** 2
    return np.logaddexp(0.0, -labels * margins)


@dataclass(frozen=True)
class SmoothnessProfile:
    """Component and block Lipschitz constants of the smooth part.

    L_combined = max(B * L_block, L_max) is the constant that couples the
    two granularities; it is always recomputed from its parts.
    """

    L_max: float
    L_block: float
    per_block: np.ndarray
    L_combined: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.per_block)) and np.all(self.per_block > 0)):
            raise ValueError("per-block constants must be positive and finite")
        if self.L_max <= 0 or not np.isfinite(self.L_max):
            raise ValueError("L_max must be positive and finite")
        if self.L_block != float(np.max(self.per_block)):
            raise ValueError("L_block must equal max(per_block)")
        expected = max(len(self.per_block) * self.L_block, self.L_max)
        if self.L_combined != expected:
            raise ValueError("L_combined must equal max(B*L_block, L_max)")


class ErmModel:
    """Couples a dataset with a loss kind; stateless apart from the data."""

    def __init__(self, dataset: SparseDataset, kind: LossKind):
        if kind.kind in (LOGISTIC, RIDGE_LOGISTIC):
            bad = ~np.isin(dataset.labels, (-1.0, 1.0))
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValueError(
                    f"logistic losses need labels in {{-1,+1}}; sample {i} "
                    f"has label {dataset.labels[i]}"
                )
        self.ds = dataset
        self.kind = kind
        self.n = dataset.n
        self.d = dataset.d

    # -- objective ---------------------------------------------------------

    def margins(self, x: np.ndarray) -> np.ndarray:
        return self.ds.dot(x)

    def objective_smooth(self, x: np.ndarray, margins: np.ndarray | None = None) -> float:
        if margins is None:
            margins = self.margins(x)
        val = float(np.mean(_loss_vec(self.kind, margins, self.ds.labels)))
        if self.kind.lam2:
            val += 0.5 * self.kind.lam2 * float(np.dot(x[: self.d], x[: self.d]))
        return val

    # -- gradients ---------------------------------------------------------

    def full_gradient(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(grad F(x), margins at x).  The margins are returned so callers can
        cache the snapshot margins instead of recomputing component gradients."""
        margins = self.margins(x)
        w = _deriv_vec(self.kind, margins, self.ds.labels) / self.n
        g = self.ds.accumulate_rows(w)
        if self.kind.lam2:
            g = g + self.kind.lam2 * x[: self.d]
        return g, margins

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """grad f_i(x), dense.  Reference/oracle use only."""
        idx, val = self.ds.row(i)
        t = float(np.dot(val, x[idx]))
        g = np.zeros(self.d)
        g[idx] = loss_scalar_deriv(self.kind, t, float(self.ds.labels[i])) * val
        if self.kind.lam2:
            g += self.kind.lam2 * x[: self.d]
        return g

    def mixed_partial_gradient(
        self,
        part: BlockPartition,
        i,
        l: int,
        margin_y,
        margin_snap,
        mu: np.ndarray,
        y_block: np.ndarray | None = None,
        snap_block: np.ndarray | None = None,
        out: np.ndarray | None = None,
    ) -> np.ndarray:
        """Block l of mu + mean_i [grad f_i(y) - grad f_i(snapshot)].

        ``i`` may be a single sample id or a batch (with matching margin
        arrays); the batch contributions are averaged.  For the ridge loss
        the caller must supply the block values of y and of the snapshot,
        since that part of the component gradient is not margin-determined.
        """
        lo, hi = part.block_range(l)
        if out is None:
            out = np.empty(hi - lo)
        width = hi - lo
        mu_l = mu[lo:hi] if hi <= len(mu) else None
        if mu_l is not None and len(mu_l) == width:
            out[:] = mu_l
        else:  # last block may spill past the true dimension
            out[:] = 0.0
            avail = max(0, len(mu) - lo)
            if avail:
                out[:avail] = mu[lo : lo + avail]
        ids = np.atleast_1d(np.asarray(i, dtype=np.int64))
        m_y = np.atleast_1d(np.asarray(margin_y, dtype=np.float64))
        m_s = np.atleast_1d(np.asarray(margin_snap, dtype=np.float64))
        b = len(ids)
        labels = self.ds.labels
        for k in range(b):
            s = int(ids[k])
            gd = loss_scalar_deriv(self.kind, float(m_y[k]), float(labels[s]))
            gd -= loss_scalar_deriv(self.kind, float(m_s[k]), float(labels[s]))
            idx, val = row_block_segment(self.ds, part, s, l)
            if len(idx):
                out[idx - lo] += (gd / b) * val
        if self.kind.lam2:
            if y_block is None or snap_block is None:
                raise ValueError("ridge mixed gradient needs y_block and snap_block")
            out += self.kind.lam2 * (y_block - snap_block)
        return out

    # -- smoothness --------------------------------------------------------

    def component_smoothness(self) -> np.ndarray:
        """L_i = curvature * ||a_i||^2 + lam2 for every sample."""
        return self.kind.curvature * self.ds.row_sq_norms() + self.kind.lam2

    def estimate_smoothness(
        self,
        part: BlockPartition,
        tol: float = 1e-6,
        max_iter: int = 500,
        seed: int = 0,
    ) -> SmoothnessProfile:
        """Power-iteration estimate of the block constants.

        L_l is the top eigenvalue of (curvature/n) A_l^T A_l + lam2 I for the
        column block A_l.  If an estimate stalls before ``tol`` relative
        change, a conservative norm-product bound replaces it.  Blocks with
        no data get a nominal floor so every entry stays positive.
        """
        Li = self.component_smoothness()
        if float(np.max(Li)) <= self.kind.lam2:
            raise ValueError("dataset has no nonzero rows; smoothness undefined")
        L_max = float(np.max(Li))
        c = self.kind.curvature / self.n
        ds = self.ds

        order = np.argsort(ds.indices, kind="stable")
        cols = ds.indices[order]
        vals = ds.values[order]
        rows = ds.row_ids[order]
        bounds = np.searchsorted(cols, [l * part.omega for l in range(part.B + 1)])

        rng = np.random.default_rng(seed)
        row_norms = np.sqrt(ds.row_sq_norms())
        per_block = np.empty(part.B)
        floor = 1e-12 * L_max
        for l in range(part.B):
            a, b = bounds[l], bounds[l + 1]
            if a == b:
                per_block[l] = max(self.kind.lam2, floor)
                continue
            local = cols[a:b] - l * part.omega
            v = rng.standard_normal(part.omega)
            v /= np.linalg.norm(v)
            lam_prev = 0.0
            lam = 0.0
            converged = False
            for _ in range(max_iter):
                w = np.bincount(rows[a:b], weights=vals[a:b] * v[local], minlength=self.n)
                u = c * np.bincount(local, weights=vals[a:b] * w[rows[a:b]], minlength=part.omega)
                lam = float(np.dot(v, u))
                norm = np.linalg.norm(u)
                if norm == 0.0:
                    lam = 0.0
                    converged = True
                    break
                v = u / norm
                if abs(lam - lam_prev) <= tol * max(abs(lam), 1e-300):
                    converged = True
                    break
                lam_prev = lam
            if not converged:
                # norm-product upper bound on the spectral contribution
                seg_norms = np.bincount(rows[a:b], weights=vals[a:b] ** 2, minlength=self.n)
                lam = float(np.max(row_norms) * np.sum(np.sqrt(seg_norms))) * c
            per_block[l] = max(lam + self.kind.lam2, floor)
        L_block = float(np.max(per_block))
        return SmoothnessProfile(
            L_max=L_max,
            L_block=L_block,
            per_block=per_block,
            L_combined=max(part.B * L_block, L_max),
        )


@dataclass(frozen=True)
class Problem:
    """A smooth finite sum plus a block-separable regularizer."""

    model: ErmModel
    reg: "Regularizer"

    def objective(self, x: np.ndarray) -> float:
        from .regularizer import Regularizer  # noqa: F401  (type only)

        d = self.model.d
        return self.model.objective_smooth(x) + self.reg.eval(x[:d])

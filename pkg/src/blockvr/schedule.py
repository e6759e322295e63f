"""Momentum/step schedules and the iterate combination-weight tracker.

The per-epoch parameters follow the coupled recurrence

    alpha2' = (sqrt(alpha2^4 + 4 alpha2^2) - alpha2^2) / 2
    alpha1' = alpha1 * (1 - alpha2'),   alpha3' = 1 - alpha1' - alpha2'

evaluated in the cancellation-free form 2*a^2 / (sqrt(a^4 + 4a^2) + a^2).
gamma = alpha2 / (1 - alpha1) is the fixed point of g -> alpha1*g + alpha2,
the combination coefficient the lazy solver uses for its z-offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .model import SmoothnessProfile

THEORY = "theory"
PROXIMAL = "proximal"
PRACTICAL = "practical"


@dataclass(frozen=True)
class ScheduleConfig:
    """How to initialize and step the schedule.

    mode:
      theory    -- alpha2_0 = 2/nu, alpha3_0 = (nu-2)/nu, analyzed step size
      proximal  -- alpha2_0 = alpha3_0 = 1/(2B), analyzed step size
      practical -- proximal initialization, step 4/(L_max * alpha2_s)
    step_cap bounds the practical step by step_cap/L_max (off by default).
    L_ref_override replaces L_max in the variance-control term of the
    analyzed step size.  force_alpha3_zero is a test-only mode that pins
    alpha3 = 0 and uses L_block for the step (single full-gradient-step
    degeneracy checks).
    """

    mode: str = PROXIMAL
    nu: float = 4.0
    step_cap: float = math.inf
    L_ref_override: float | None = None
    force_alpha3_zero: bool = False

    def __post_init__(self):
        if self.mode not in (THEORY, PROXIMAL, PRACTICAL):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == THEORY and not self.nu > 2:
            raise ValueError(f"theory mode needs nu > 2, got {self.nu}")
        if self.step_cap <= 0:
            raise ValueError("step_cap must be positive")


@dataclass(frozen=True)
class ScheduleParams:
    """Epoch-s parameters.  alpha1+alpha2+alpha3 == 1 and all lie in [0,1]."""

    s: int
    alpha1: float
    alpha2: float
    alpha3: float
    gamma: float
    L_bar: float
    eta: float

    def validate(self, tol: float = 1e-12):
        a1, a2, a3 = self.alpha1, self.alpha2, self.alpha3
        if abs(a1 + a2 + a3 - 1.0) > tol:
            raise ValueError(f"weights sum to {a1 + a2 + a3}, not 1")
        for name, v in (("alpha1", a1), ("alpha2", a2), ("alpha3", a3)):
            if v < -tol or v > 1 + tol:
                raise ValueError(f"{name}={v} outside [0,1]")
        if self.eta <= 0 or not math.isfinite(self.eta):
            raise ValueError(f"step size {self.eta} must be positive and finite")
        if a1 < 1.0:
            g = a2 / (1.0 - a1)
            if abs(self.gamma - g) > tol * max(1.0, abs(g)):
                raise ValueError("gamma inconsistent with alpha1/alpha2")


def _finish(
    cfg: ScheduleConfig,
    profile: SmoothnessProfile,
    B: int,
    s: int,
    alpha1: float,
    alpha2: float,
) -> ScheduleParams:
    if cfg.force_alpha3_zero:
        alpha3 = 0.0
        alpha1 = 1.0 - alpha2
        L_bar = profile.L_block
    else:
        alpha3 = 1.0 - alpha1 - alpha2
        L_ref = cfg.L_ref_override if cfg.L_ref_override is not None else profile.L_max
        L_bar = L_ref / (B * alpha3) + profile.L_block
    if cfg.mode == PRACTICAL:
        eta = min(4.0 / (profile.L_max * alpha2), cfg.step_cap / profile.L_max)
    else:
        eta = 1.0 / (L_bar * alpha2 * B)
    gamma = alpha2 / (1.0 - alpha1) if alpha1 < 1.0 else alpha2
    p = ScheduleParams(
        s=s, alpha1=alpha1, alpha2=alpha2, alpha3=alpha3,
        gamma=gamma, L_bar=L_bar, eta=eta,
    )
    p.validate()
    return p


def init_schedule(
    cfg: ScheduleConfig, B: int, profile: SmoothnessProfile
) -> ScheduleParams:
    """Parameters for epoch s = 0."""
    if cfg.mode == THEORY:
        alpha2 = 2.0 / cfg.nu
        alpha3 = (cfg.nu - 2.0) / cfg.nu
        alpha1 = 1.0 - alpha2 - alpha3
    else:
        alpha2 = 1.0 / (2.0 * B)
        alpha1 = 1.0 - 1.0 / B
    return _finish(cfg, profile, B, 0, alpha1, alpha2)


def advance_epoch(
    prev: ScheduleParams, cfg: ScheduleConfig, B: int, profile: SmoothnessProfile
) -> ScheduleParams:
    """Parameters for epoch s+1 from epoch s."""
    a = prev.alpha2
    a2 = a * a
    alpha2 = 2.0 * a2 / (math.sqrt(a2 * a2 + 4.0 * a2) + a2)
    alpha1 = prev.alpha1 * (1.0 - alpha2)
    return _finish(cfg, profile, B, prev.s + 1, alpha1, alpha2)


class WeightTracker:
    """Expresses the running iterate as a combination of past snapshots and
    the z-sequence, by the recurrences

        gamma_{k+1}^l = alpha1 * gamma_k^l                (l <= k-1)
        gamma_{k+1}^k = alpha1 * gamma_k^k + (1-B)*alpha2
        gamma_{k+1}^{k+1} = B * alpha2
        beta_{j+1} = alpha1 * beta_j + alpha3

    with gamma_0^0 = 1 and beta_0 = 0.  At an epoch boundary the current
    snapshot weight beta is frozen into the lambda pool and decays by alpha1
    like every other retired weight.  The sum of all entries is exactly one
    by construction; the tracker checks it at every step.

    ``full=True`` keeps every individual weight (small-k oracle); the
    default compact mode keeps only the running sums plus the newest z
    weight, which is all the recurrence needs.
    """

    def __init__(self, full: bool = False):
        self.full = full
        self.k = 0
        self.gamma_latest = 1.0  # gamma_0^0
        self.gamma_old_sum = 0.0
        self.beta = 0.0
        self.lambda_sum = 0.0
        self.min_assigned = 1.0
        if full:
            self.gammas = [1.0]
            self.lambdas: list[float] = []

    def step(self, params, B: int, at_epoch_boundary: bool = False):
        """Advance k -> k+1 under epoch parameters ``params``.

        Set ``at_epoch_boundary`` on the first step after a snapshot switch;
        the old snapshot weight is retired into the lambda pool first.
        """
        a1, a2, a3 = params.alpha1, params.alpha2, params.alpha3
        if at_epoch_boundary:
            self.lambda_sum += self.beta
            if self.full:
                self.lambdas.append(self.beta)
            self.beta = 0.0
        w_mid = a1 * self.gamma_latest + (1.0 - B) * a2
        w_new = B * a2
        self.gamma_old_sum = a1 * self.gamma_old_sum + w_mid
        self.gamma_latest = w_new
        self.beta = a1 * self.beta + a3
        self.lambda_sum *= a1
        if self.full:
            self.gammas = [a1 * g for g in self.gammas[:-1]] + [w_mid, w_new]
            self.lambdas = [a1 * v for v in self.lambdas]
        self.min_assigned = min(self.min_assigned, w_mid, w_new, self.beta)
        self.k += 1

    @property
    def total(self) -> float:
        return self.lambda_sum + self.beta + self.gamma_old_sum + self.gamma_latest


__all__ = [
    "THEORY", "PROXIMAL", "PRACTICAL",
    "ScheduleConfig", "ScheduleParams",
    "init_schedule", "advance_epoch", "WeightTracker", "replace",
]

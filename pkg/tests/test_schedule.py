"""Tests for the epoch parameter schedule and the combination-weight tracker."""
import math

import numpy as np
import pytest

from blockvr.data import SparseDataset, make_partition
from blockvr.model import ErmModel, Problem, SmoothnessProfile, squared_error
from blockvr.records import CostCounters
from blockvr.reference import avrbcd1_run
from blockvr.regularizer import zero
from blockvr.rng import RngStream
from blockvr.schedule import (
    ScheduleConfig,
    ScheduleParams,
    WeightTracker,
    advance_epoch,
    init_schedule,
)


def _profile(B: int, L: float = 1.0) -> SmoothnessProfile:
    return SmoothnessProfile(
        L_max=L, L_block=L, per_block=np.full(B, L), L_combined=max(B * L, L)
    )


class TestConfig:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            ScheduleConfig(mode="magic")

    def test_rejects_small_nu(self):
        with pytest.raises(ValueError):
            ScheduleConfig(mode="theory", nu=2.0)

    def test_rejects_bad_cap(self):
        with pytest.raises(ValueError):
            ScheduleConfig(step_cap=0.0)


class TestInitialization:
    def test_theory(self):
        p = init_schedule(ScheduleConfig(mode="theory", nu=4.0), 4, _profile(4))
        assert p.alpha2 == 0.5
        assert p.alpha3 == 0.5
        assert p.alpha1 == 0.0
        assert p.s == 0

    def test_theory_general_nu(self):
        p = init_schedule(ScheduleConfig(mode="theory", nu=10.0), 2, _profile(2))
        assert p.alpha2 == pytest.approx(0.2)
        assert p.alpha3 == pytest.approx(0.8)
        assert p.alpha1 == pytest.approx(0.0, abs=1e-16)

    @pytest.mark.parametrize("B", [1, 2, 8])
    def test_proximal(self, B):
        p = init_schedule(ScheduleConfig(mode="proximal"), B, _profile(B))
        assert p.alpha2 == 1.0 / (2 * B)
        assert p.alpha3 == pytest.approx(1.0 / (2 * B))
        assert p.alpha1 == pytest.approx(1.0 - 1.0 / B)

    def test_analyzed_step_formula(self):
        B = 4
        p = init_schedule(ScheduleConfig(mode="proximal"), B, _profile(B, 2.0))
        assert p.eta == 1.0 / (p.L_bar * p.alpha2 * B)
        assert p.L_bar == pytest.approx(2.0 / (B * p.alpha3) + 2.0)

    def test_practical_step_and_cap(self):
        B = 4
        prof = _profile(B, 2.0)
        p = init_schedule(ScheduleConfig(mode="practical"), B, prof)
        assert p.eta == pytest.approx(4.0 / (2.0 * p.alpha2))
        capped = init_schedule(
            ScheduleConfig(mode="practical", step_cap=1.5), B, prof
        )
        assert capped.eta == pytest.approx(1.5 / 2.0)

    def test_L_ref_override(self):
        B = 2
        base = init_schedule(ScheduleConfig(mode="proximal"), B, _profile(B, 3.0))
        over = init_schedule(
            ScheduleConfig(mode="proximal", L_ref_override=6.0), B, _profile(B, 3.0)
        )
        assert over.L_bar == pytest.approx(6.0 / (B * over.alpha3) + 3.0)
        assert over.L_bar > base.L_bar

    def test_force_alpha3_zero(self):
        B = 50
        p = init_schedule(
            ScheduleConfig(mode="proximal", force_alpha3_zero=True), B, _profile(B)
        )
        assert p.alpha3 == 0.0
        assert p.alpha1 == 1.0 - 1.0 / (2 * B)
        assert p.L_bar == 1.0  # block constant, no variance term


class TestAdvance:
    def test_frozen_first_step(self):
        # alpha2: 0.5 -> (sqrt(1.0625) - 0.25) / 2
        p = init_schedule(ScheduleConfig(mode="theory", nu=4.0), 4, _profile(4))
        q = advance_epoch(p, ScheduleConfig(mode="theory", nu=4.0), 4, _profile(4))
        assert q.alpha2 == pytest.approx(0.39038820320220756, rel=1e-15)
        assert q.s == 1

    def test_alpha2_vanishes_in_limit(self):
        cfg = ScheduleConfig(mode="theory", nu=4.0)
        p = init_schedule(cfg, 2, _profile(2))
        for _ in range(5000):
            p = advance_epoch(p, cfg, 2, _profile(2))
        assert 0.0 < p.alpha2 < 1e-3

    def test_monotonicity_and_bound(self):
        cfg = ScheduleConfig(mode="theory", nu=4.0)
        prof = _profile(4)
        p = init_schedule(cfg, 4, prof)
        for _ in range(300):
            q = advance_epoch(p, cfg, 4, prof)
            assert q.alpha2 <= p.alpha2
            assert q.alpha1 <= p.alpha1
            assert q.alpha3 >= p.alpha3 - 1e-16
            assert q.L_bar <= p.L_bar * (1 + 1e-15)
            assert q.alpha2 <= 2.0 / (q.s + 4.0)
            p = q

    def test_ratio_identities_proximal(self):
        # nontrivial alpha1 branch of the coupled recurrence
        cfg = ScheduleConfig(mode="proximal")
        prof = _profile(8)
        p = init_schedule(cfg, 8, prof)
        for _ in range(500):
            q = advance_epoch(p, cfg, 8, prof)
            lhs = (1.0 - p.alpha1) / p.alpha2**2
            rhs = q.alpha3 / q.alpha2**2
            assert abs(lhs - rhs) <= 1e-12 * abs(rhs)
            lhs = p.alpha1 / p.alpha2**2
            rhs = q.alpha1 / q.alpha2**2
            assert abs(lhs - rhs) <= 1e-12 * abs(rhs)
            p = q

    def test_gamma_fixed_point(self):
        for mode in ("theory", "proximal"):
            cfg = ScheduleConfig(mode=mode)
            prof = _profile(8)
            p = init_schedule(cfg, 8, prof)
            for _ in range(200):
                assert abs(p.alpha1 * p.gamma + p.alpha2 - p.gamma) <= 1e-15 * p.gamma
                p = advance_epoch(p, cfg, 8, prof)


class TestParamsValidation:
    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError, match="sum"):
            ScheduleParams(s=0, alpha1=0.5, alpha2=0.5, alpha3=0.5,
                           gamma=1.0, L_bar=1.0, eta=1.0).validate()

    def test_rejects_bad_eta(self):
        with pytest.raises(ValueError, match="step"):
            ScheduleParams(s=0, alpha1=0.0, alpha2=0.5, alpha3=0.5,
                           gamma=0.5, L_bar=1.0, eta=0.0).validate()

    def test_rejects_inconsistent_gamma(self):
        with pytest.raises(ValueError, match="gamma"):
            ScheduleParams(s=0, alpha1=0.5, alpha2=0.25, alpha3=0.25,
                           gamma=0.9, L_bar=1.0, eta=1.0).validate()


class TestWeightTracker:
    @pytest.mark.parametrize("B", [1, 2, 8])
    def test_base_case_exact(self, B):
        p = init_schedule(ScheduleConfig(mode="proximal"), B, _profile(B))
        w = WeightTracker(full=True)
        w.step(p, B)
        assert w.gammas[0] == 0.5 - 1.0 / (2 * B)
        assert w.gammas[1] == 0.5
        assert w.beta == p.alpha3
        assert w.total == 1.0

    def test_lemma_values_two_blocks(self):
        p = init_schedule(ScheduleConfig(mode="proximal"), 2, _profile(2))
        w = WeightTracker(full=True)
        w.step(p, 2)
        assert w.gammas == [0.25, 0.5]
        assert w.beta == 0.25

    def test_partition_of_unity_short(self):
        p = init_schedule(ScheduleConfig(mode="proximal"), 4, _profile(4))
        w = WeightTracker()
        for _ in range(2000):
            w.step(p, 4)
            assert abs(w.total - 1.0) <= 1e-12
        assert w.min_assigned >= -1e-15

    def test_full_and_compact_agree_across_boundaries(self):
        cfg = ScheduleConfig(mode="proximal")
        prof = _profile(4)
        p = init_schedule(cfg, 4, prof)
        full = WeightTracker(full=True)
        compact = WeightTracker()
        for epoch in range(3):
            for k in range(25):
                boundary = epoch > 0 and k == 0
                full.step(p, 4, at_epoch_boundary=boundary)
                compact.step(p, 4, at_epoch_boundary=boundary)
            p = advance_epoch(p, cfg, 4, prof)
        assert full.total == pytest.approx(compact.total, rel=1e-14)
        assert sum(full.gammas) == pytest.approx(compact.gamma_old_sum
                                                 + compact.gamma_latest, rel=1e-12)
        assert sum(full.lambdas) == pytest.approx(compact.lambda_sum, rel=1e-12)
        assert abs(full.total - 1.0) <= 1e-12

    def test_boundary_retires_snapshot_weight(self):
        p = init_schedule(ScheduleConfig(mode="proximal"), 2, _profile(2))
        w = WeightTracker(full=True)
        for _ in range(5):
            w.step(p, 2)
        beta_before = w.beta
        w.step(p, 2, at_epoch_boundary=True)
        assert w.lambdas[0] == pytest.approx(p.alpha1 * beta_before, rel=1e-14)
        assert w.beta == p.alpha3

    def test_weights_reconstruct_solver_iterates(self):
        """The tracked weights express x_k as a combination of past z iterates
        and snapshots; verify against a traced solver run."""
        # exact small regression instance so snapshots are reproducible
        n, d, B = 6, 8, 2
        rng = np.random.default_rng(42)
        A = rng.integers(-2, 3, size=(n, d)).astype(float)
        A[A == 0] = 1.0
        w_true = rng.standard_normal(d)
        ds = SparseDataset(
            n=n, d=d, labels=A @ w_true,
            indptr=np.arange(0, n * d + 1, d, dtype=np.int64),
            indices=np.tile(np.arange(d, dtype=np.int64), n),
            values=A.ravel(),
        )
        problem = Problem(ErmModel(ds, squared_error()), zero())
        part = make_partition(d, B)
        cfg = ScheduleConfig(mode="proximal")
        prof = problem.model.estimate_smoothness(part)
        m, epochs, seed = 10, 3, 5

        trace = []
        avrbcd1_run(problem, part, cfg, m, epochs, RngStream(seed),
                    counters=CostCounters(), trace=trace)
        sigma_replay = RngStream(seed)

        x0 = np.zeros(part.padded_d)
        zs = [x0.copy()]          # z_0, z_1, ... across all epochs
        snapshots = [x0.copy()]   # snapshot of epoch 0, then x_sigma per epoch
        tracker = WeightTracker(full=True)
        params = init_schedule(cfg, B, prof)
        k = 0
        for s in range(epochs):
            sigma = sigma_replay.draw_sigma(m)
            for j in range(1, m + 1):
                y_t, x_t, z_t = trace[k]
                tracker.step(params, B, at_epoch_boundary=(s > 0 and j == 1))
                zs.append(z_t.copy())
                recon = tracker.beta * snapshots[-1]
                for lam, snap in zip(tracker.lambdas, snapshots[:-1]):
                    recon = recon + lam * snap
                for g_w, z_vec in zip(tracker.gammas, zs):
                    recon = recon + g_w * z_vec
                np.testing.assert_allclose(recon, x_t, rtol=1e-10, atol=1e-12)
                if j == sigma:
                    next_snap = x_t.copy()
                k += 1
            snapshots.append(next_snap)
            params = advance_epoch(params, cfg, B, prof)


class TestLongRunStability:
    def test_alpha2_stays_positive(self):
        cfg = ScheduleConfig(mode="theory", nu=4.0)
        prof = _profile(2)
        p = init_schedule(cfg, 2, prof)
        for _ in range(20000):
            p = advance_epoch(p, cfg, 2, prof)
        assert p.alpha2 > 0.0
        assert math.isfinite(p.eta) and p.eta > 0

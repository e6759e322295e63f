"""Tests for the benchmark harness: config handling, aggregation, file I/O,
and a small end-to-end run."""
import os

import numpy as np
import pytest

from blockvr.bench import (
    BenchConfig,
    SOLVER_REGISTRY,
    aggregate_records,
    build_config,
    build_problem,
    compute_reference_optimum,
    config_hash,
    log_suboptimality,
    parse_config,
    problem_hash,
    read_solver_csv,
    run_bench,
    write_solver_csv,
)
from blockvr.records import RunRecord


def _tiny_cfg(out_dir: str, **kw) -> BenchConfig:
    base = dict(
        n=24, d=16, density=0.3, blocks=4, epochs=3, inner=24, seeds=2,
        ref_epochs=12, solvers="avrbcd,svrg", out_dir=out_dir,
        mode="proximal", lam1=1e-2,
    )
    base.update(kw)
    return BenchConfig(**base)


class TestConfigParsing:
    def test_parse_file(self, tmp_path):
        path = tmp_path / "bench.cfg"
        path.write_text(
            "# comment line\n"
            "n = 50\n"
            "lam1 = 0.01  # trailing comment\n"
            "\n"
            "solvers = avrbcd,svrg\n"
        )
        raw = parse_config(str(path))
        assert raw == {"n": "50", "lam1": "0.01", "solvers": "avrbcd,svrg"}

    def test_parse_rejects_bad_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("this is not a pair\n")
        with pytest.raises(ValueError, match="key = value"):
            parse_config(str(path))

    def test_build_with_overrides(self):
        cfg = build_config({"n": "40"}, ["epochs=5", "plot=off"])
        assert cfg.n == 40
        assert cfg.epochs == 5
        assert cfg.plot is False

    def test_bool_coercion(self):
        assert build_config(None, ["plot=true"]).plot is True
        assert build_config(None, ["plot=0"]).plot is False
        with pytest.raises(ValueError, match="boolean"):
            build_config(None, ["plot=maybe"])

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config field"):
            build_config({"granularity": "3"})

    def test_bad_override_shape(self):
        with pytest.raises(ValueError, match="key=value"):
            build_config(None, ["epochs"])

    def test_numeric_coercion_failure(self):
        with pytest.raises(ValueError, match="epochs"):
            build_config(None, ["epochs=three"])

    def test_inner_steps_default(self):
        cfg = BenchConfig(blocks=8, batch=2, inner=0)
        assert cfg.inner_steps(100) == 400
        assert BenchConfig(inner=33).inner_steps(100) == 33


class TestHashes:
    def test_problem_hash_ignores_run_settings(self):
        a = BenchConfig(epochs=5, seeds=3)
        b = BenchConfig(epochs=50, seeds=9)
        assert problem_hash(a) == problem_hash(b)
        assert config_hash(a) != config_hash(b)

    def test_problem_hash_tracks_data_settings(self):
        assert problem_hash(BenchConfig(n=10)) != problem_hash(BenchConfig(n=11))
        assert problem_hash(BenchConfig(lam1=0.1)) != problem_hash(BenchConfig(lam1=0.2))


class TestBuildProblem:
    def test_synthetic_logistic(self):
        problem, part = build_problem(BenchConfig(n=20, d=12, blocks=3))
        assert problem.model.n == 20
        assert part.B == 3
        assert problem.reg.lam1 == BenchConfig().lam1

    def test_ridge_when_lam2_set(self):
        problem, _ = build_problem(BenchConfig(n=10, d=8, lam2=0.1, blocks=2))
        assert problem.model.kind.lam2 == 0.1

    def test_zero_reg_when_lam1_zero(self):
        problem, _ = build_problem(BenchConfig(n=10, d=8, lam1=0.0, blocks=2))
        assert problem.reg.is_zero

    def test_squared_rejects_lam2(self):
        with pytest.raises(ValueError, match="lam2"):
            build_problem(BenchConfig(loss="squared", lam2=0.1))

    def test_unknown_loss(self):
        with pytest.raises(ValueError, match="unknown loss"):
            build_problem(BenchConfig(loss="hinge"))

    def test_libsvm_path(self, tmp_path):
        path = tmp_path / "data.txt"
        path.write_text("1 1:1.0 3:2.0\n-1 2:0.5\n1 1:0.25\n-1 3:1.5\n")
        problem, part = build_problem(BenchConfig(dataset=str(path), blocks=3))
        assert problem.model.n == 4
        assert problem.model.d == 3


class TestAggregation:
    def _record(self, seed, objectives):
        rec = RunRecord(solver="x", seed=seed)
        rec.start_clock()
        for k, obj in enumerate(objectives):
            rec.add(k + 1, float(k + 1), obj, (k + 1) * 10)
        return rec

    def test_log_suboptimality_floor(self):
        out = log_suboptimality([1.5, 1.0 + 1e-16, 1.0], 1.0)
        assert out[0] == pytest.approx(np.log10(0.5))
        assert np.isnan(out[1]) and np.isnan(out[2])

    def test_mean_and_std(self):
        recs = [self._record(1, [2.0, 1.1]), self._record(2, [4.0, 1.3])]
        agg = aggregate_records(recs, 1.0)
        assert agg["runs"] == 2
        assert agg["failed_seeds"] == []
        np.testing.assert_allclose(
            agg["mean_log10_subopt"][0], (np.log10(1.0) + np.log10(3.0)) / 2
        )

    def test_nonfinite_runs_dropped(self):
        recs = [self._record(1, [2.0, 1.5]), self._record(2, [2.0, np.inf])]
        agg = aggregate_records(recs, 1.0)
        assert agg["runs"] == 1
        assert agg["failed_seeds"] == [2]

    def test_all_failed(self):
        agg = aggregate_records([self._record(1, [np.nan])], 0.0)
        assert agg["runs"] == 0

    def test_floored_seed_does_not_poison_mean(self):
        recs = [self._record(1, [2.0, 1.0]), self._record(2, [2.0, 1.5])]
        agg = aggregate_records(recs, 1.0)
        # seed 1 hits the floor at epoch 2; only seed 2 contributes there
        assert agg["mean_log10_subopt"][1] == pytest.approx(np.log10(0.5))


class TestCsvRoundTrip:
    def test_round_trip_with_nan(self, tmp_path):
        agg = {
            "epoch": np.array([1, 2, 3]),
            "passes": np.array([1.5, 3.0, 4.5]),
            "mean_log10_subopt": np.array([-1.0, np.nan, -3.0]),
            "std_log10_subopt": np.array([0.1, np.nan, 0.05]),
            "runs": 4,
        }
        path = str(tmp_path / "solver.csv")
        write_solver_csv(path, agg, "abc123")
        back = read_solver_csv(path)
        assert back["config"] == "abc123"
        np.testing.assert_array_equal(back["epoch"], agg["epoch"])
        np.testing.assert_allclose(back["passes"], agg["passes"])
        np.testing.assert_allclose(back["mean_log10_subopt"],
                                   agg["mean_log10_subopt"])
        assert np.isnan(back["std_log10_subopt"][1])
        np.testing.assert_array_equal(back["runs"], [4, 4, 4])

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("epoch,effective_passes\n1,2.0\n")
        with pytest.raises(ValueError, match="config"):
            read_solver_csv(str(path))


class TestReferenceOptimum:
    def test_cached_on_disk(self, tmp_path):
        cfg = _tiny_cfg(str(tmp_path))
        problem, part = build_problem(cfg)
        cache = str(tmp_path / "cache")
        f1 = compute_reference_optimum(problem, part, cfg, cache)
        files = [f for f in os.listdir(cache) if f.startswith("ref_")]
        assert len(files) == 1
        stamp = os.path.getmtime(os.path.join(cache, files[0]))
        f2 = compute_reference_optimum(problem, part, cfg, cache)
        assert f2 == f1
        assert os.path.getmtime(os.path.join(cache, files[0])) == stamp

    def test_below_solver_curves(self, tmp_path):
        cfg = _tiny_cfg(str(tmp_path), ref_epochs=30)
        problem, part = build_problem(cfg)
        f_star = compute_reference_optimum(problem, part, cfg,
                                           str(tmp_path / "cache"))
        assert f_star <= problem.objective(np.zeros(problem.model.d))


class TestRunBench:
    def test_end_to_end_files(self, tmp_path):
        out = str(tmp_path / "out")
        results = run_bench(_tiny_cfg(out), quiet=True)
        assert os.path.exists(os.path.join(out, "config_used.txt"))
        assert os.path.exists(os.path.join(out, "avrbcd.csv"))
        assert os.path.exists(os.path.join(out, "svrg.csv"))
        assert os.path.exists(os.path.join(out, "curves.svg"))
        assert np.isfinite(results["_meta"]["f_star"])
        assert results["avrbcd"]["runs"] == 2
        back = read_solver_csv(os.path.join(out, "avrbcd.csv"))
        assert back["config"] == results["_meta"]["config_hash"]

    def test_plot_disabled(self, tmp_path):
        out = str(tmp_path / "out")
        results = run_bench(_tiny_cfg(out, plot=False), quiet=True)
        assert not os.path.exists(os.path.join(out, "curves.svg"))
        assert results["_meta"]["plot"] is None

    def test_unknown_solver_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown solver"):
            run_bench(_tiny_cfg(str(tmp_path), solvers="gradientest"),
                      quiet=True)

    def test_registry_covers_default_solver_list(self):
        defaults = [s.strip() for s in BenchConfig().solvers.split(",")]
        assert set(defaults) == set(SOLVER_REGISTRY)

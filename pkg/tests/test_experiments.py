import math
import os

import numpy as np
import pytest

from ensheat.experiments import (
    ConfigError,
    RunConfig,
    compute_rates,
    load_config,
    run_convergence_study,
    run_single,
    run_stability_study,
    run_timing_study,
    stability_samples,
    timing_samples,
)


class TestComputeRates:
    def test_reference_pair(self):
        # log2(0.003791 / 0.000947) = 2.0011...
        rates = compute_rates([0.003791, 0.000947])
        assert abs(rates[0] - 2.00) <= 0.01

    def test_exact_halving(self):
        x = 0.123
        assert compute_rates([x, x / 2])[0] == 1.0

    def test_first_order_pair(self):
        rates = compute_rates([0.8218800, 0.4629280])
        assert abs(rates[0] - 0.82) <= 0.01

    def test_nonpositive_marker(self):
        rates = compute_rates([1.0, 0.0, 0.5])
        assert math.isnan(rates[0])
        assert math.isnan(rates[1])

    def test_needs_two_levels(self):
        with pytest.raises(ValueError):
            compute_rates([1.0])

    def test_sequence(self):
        rates = compute_rates([8.0, 4.0, 1.0])
        assert rates.tolist() == [1.0, 2.0]


class TestConfigFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "smooth.cfg"
        path.write_text(
            "# comment line\n"
            "algo = a2\n"
            "mesh = 4,8\n"
            "dt = 0.1,0.05\n"
            "T = 1.0\n"
            "seed = 7   # trailing comment\n"
            "solver = cholesky\n"
        )
        cfg = load_config(str(path))
        assert cfg.algo == "a2"
        assert cfg.mesh == (4, 8)
        assert cfg.dt == (0.1, 0.05)
        assert cfg.T == 1.0
        assert cfg.seed == 7

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("mesh_size = 4\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seed = not_a_number\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/x.cfg")

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just a line\n")
        with pytest.raises(ConfigError):
            load_config(str(path))


@pytest.fixture(scope="module")
def small_convergence(tmp_path_factory):
    out = tmp_path_factory.mktemp("conv")
    cfg = RunConfig(
        experiment="converge", algo="a2", mesh=(2, 4), T=0.25, out=str(out)
    )
    return cfg, run_convergence_study(cfg)


class TestConvergenceStudy:
    def test_errors_positive_and_decreasing(self, small_convergence):
        _, res = small_convergence
        d = res.per_algo["a2"]
        for field in ("u1", "u2"):
            for norm in ("l2", "h1"):
                e = d.errors(field, norm)
                assert (e > 0).all()
                assert (e[1] < e[0]).all()

    def test_gate_ran(self, small_convergence):
        _, res = small_convergence
        assert 0.0 < res.gate_residual <= 1e-8

    def test_tables_written(self, small_convergence):
        cfg, _ = small_convergence
        for name in ("table_l2.csv", "table_h1.csv", "rates.csv",
                     "manifest.txt", "samples_a2.txt"):
            assert os.path.exists(os.path.join(cfg.out, name))

    def test_rate_rows_match_error_tables(self, small_convergence):
        _, res = small_convergence
        d = res.per_algo["a2"]
        rates = d.rates("u1", "l2")
        recomputed = compute_rates(d.l2_u1[:, 0])
        assert np.allclose(rates[:, 0], recomputed, equal_nan=True)

    def test_reproducible_csv_bytes(self, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            cfg = RunConfig(experiment="converge", algo="a1", mesh=(2,), T=0.25,
                            out=str(out))
            run_convergence_study(cfg)
            outs.append((out / "table_l2.csv").read_bytes())
        assert outs[0] == outs[1]


class TestStabilityStudy:
    def test_series_and_files(self, tmp_path):
        cfg = RunConfig(
            experiment="stability", algo="a2", mesh=(4,), dt=(0.2, 0.1),
            T=1.0, J=2, seed=3, out=str(tmp_path)
        )
        res = run_stability_study(cfg)
        assert len(res.series) == 2
        for s in res.series:
            assert s.energies[0] > 0.5
            assert s.monotone
            name = f"energy_a2_dt{s.dt:g}.dat"
            text = (tmp_path / name).read_text()
            assert text.startswith("# t energy\n")
            assert "# monotone = True" in text
            rows = [l for l in text.splitlines() if not l.startswith("#")]
            assert len(rows) == len(s.times)
            assert all(len(r.split()) == 2 for r in rows)
        assert (tmp_path / "samples_a2.txt").exists()

    def test_positive_diffusion_over_long_horizon(self):
        # The drawn stability ensembles stay strictly positive out to the
        # full decay horizon.
        s = stability_samples("a2", J=3, seed=0, horizon=10.0)
        for f in s.nu1 + s.nu2:
            assert f.minimum_on(10.0) > 0.0

    def test_deterministic_diffusion_for_a1(self):
        s = stability_samples("a1", J=2, seed=0, horizon=10.0)
        assert all(f.describe() == s.nu1[0].describe() for f in s.nu1)


class TestTimingStudy:
    def test_counters_and_rows(self, tmp_path):
        cfg = RunConfig(
            experiment="timing", mesh=(4,), dt=(0.1,), T=0.3, sizes=(2,),
            seed=5, out=str(tmp_path), timing_repeats=1, timing_warmup=False,
        )
        res = run_timing_study(cfg)
        n_steps = 3
        by_algo = {r.algorithm: r for r in res.rows}
        assert by_algo["baseline"].factorizations == 2 * 4 * n_steps
        assert by_algo["a2"].factorizations == 2 * n_steps
        assert by_algo["a3"].factorizations == 2
        assert (tmp_path / "timing.csv").exists()
        assert res.savings(2, "a2") == 1.0 - by_algo["a2"].seconds / by_algo["baseline"].seconds

    def test_timing_samples_positive(self):
        s = timing_samples(3, seed=0, horizon=0.5)
        assert s.J == 9
        assert (s.kappa > 0.01).all() and (s.kappa < 1.01).all()
        for f in s.nu1:
            assert f.minimum_on(0.5) > 0.0


class TestRunSingle:
    def test_diagnostics_written(self, tmp_path):
        cfg = RunConfig(experiment="run", algo="a2", mesh=(2,), dt=(0.125,),
                        T=0.25, out=str(tmp_path))
        state, diag = run_single(cfg)
        assert state.n == 2
        text = (tmp_path / "diagnostics.csv").read_text()
        header, *rows = text.splitlines()
        assert header == "step,time,energy,max_residual,assembly_ms,factorize_ms,solve_ms"
        assert len(rows) == 3  # levels 0..2
        assert (tmp_path / "samples_run.txt").exists()
        assert (tmp_path / "manifest.txt").exists()

    def test_interpolation_only_baseline(self):
        # Zero steps leave the initial interpolant: study errors then equal
        # interpolation errors and decay quadratically in L2.
        from ensheat.assembly import space
        from ensheat.manufactured import attach_manufactured_forcing
        from ensheat.mesh import build_two_domain_mesh
        from ensheat.sampling import case1_samples
        from ensheat.stepping import ProblemSpec, StepperConfig, init_state

        samples = case1_samples([1.0])
        family = attach_manufactured_forcing(samples)
        errs = []
        for n in (4, 8):
            mesh = build_two_domain_mesh(n)
            prob = ProblemSpec(
                samples=samples,
                u0_1=lambda x, y, j: family[j].u1(x, y, 0.0),
                u0_2=lambda x, y, j: family[j].u2(x, y, 0.0),
            )
            state = init_state(mesh, prob, StepperConfig(dt=0.1, T=0.0, algorithm="a1"))
            s1 = space(mesh, 1)
            errs.append(s1.error_l2(state.u1[:, 0], family[0].u1, 0.0))
        rate = compute_rates(errs)[0]
        assert 1.7 <= rate <= 2.3

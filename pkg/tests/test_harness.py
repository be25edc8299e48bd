"""Harness tests: scenarios, the two-phase protocol, fixtures, exports."""

import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from riskbound.gpr import ConfidenceParams, SquaredExponentialKernel, fit
from riskbound.harness import (
    Scenario,
    builtin_course,
    builtin_scenario,
    export_plot_data,
    figure2_fixture,
    list_builtin_scenarios,
    load_scenario,
    run_experiment,
    save_report,
    save_scenario,
    scenario_ground_truth,
    simulate_phase,
)
from riskbound.risk import Gaussian, analytic_var
from riskbound.surface import SarModel


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestScenarioFiles:
    def test_builtins_present(self):
        names = list_builtin_scenarios()
        assert {"a_like", "b_like", "c_like", "d_like", "noise_free"} <= set(names)

    def test_paper_style_discrepancy_parameters(self):
        expected = {"a_like": (1.0, 0.05), "b_like": (3.0, 0.05),
                    "c_like": (3.0, 0.1), "d_like": (3.0, 0.2)}
        for name, (alpha, beta) in expected.items():
            scn = builtin_scenario(name)
            assert (scn.alpha, scn.beta) == (alpha, beta)
            assert scn.eps == 0.05
            assert scn.n_per_batch == 60
            assert scn.length_scale == 1.0
            assert scn.world.dt == 0.02
            assert scn.world.time_dilation == 20

    def test_round_trip(self, tmp_path):
        scn = builtin_scenario("c_like")
        path = tmp_path / "scn.json"
        save_scenario(scn, path)
        again = load_scenario(path)
        assert again.to_dict() == scn.to_dict()
        assert again.world == scn.world

    def test_unknown_builtin(self):
        with pytest.raises(ValueError, match="unknown builtin"):
            builtin_scenario("windless_void")

    def test_courses_load(self):
        for name in ("low_altitude_lateral", "ascent_descent"):
            course = builtin_course(name)
            assert len(course.waypoints) >= 2
            assert course.arrival_radius == 0.1
            assert course.waypoint_timeout == 10.0


class TestRunExperiment:
    def test_noise_free_speedup_near_one(self):
        report = run_experiment("noise_free", seed=3)
        assert report.mean_speedup == pytest.approx(1.0, abs=0.05)
        assert report.coverage.coverage == 1.0
        assert all(e.baseline_completed and e.augmented_completed for e in report.episodes)

    def test_batch_count_arithmetic(self):
        report = run_experiment("noise_free", seed=3)
        assert report.phase1_steps >= 300
        assert report.iterations == report.phase1_steps // 60

    def test_fitting_uses_less_than_one_traversal(self):
        report = run_experiment("noise_free", seed=3)
        assert report.iterations * 60 <= report.phase1_records

    def test_paired_episodes_share_realizations(self):
        scn = replace(builtin_scenario("b_like"), n_episodes=2)
        report = run_experiment(scn, seed=5)
        again = run_experiment(scn, seed=5)
        for a, b in zip(report.episodes, again.episodes):
            assert a.baseline_seconds == b.baseline_seconds
            assert a.augmented_seconds == b.augmented_seconds

    def test_report_completeness_and_round_trip(self, tmp_path):
        scn = replace(builtin_scenario("b_like"), n_episodes=2)
        report = run_experiment(scn, seed=5)
        payload = report.to_dict()
        for key in ("schema_version", "kind", "label", "seed", "phase1", "fit",
                    "phase2", "coverage"):
            assert key in payload
        assert payload["phase2"]["episodes"]
        assert 0.0 <= payload["coverage"]["coverage"] <= 1.0
        if report.mean_speedup is not None:
            assert report.mean_speedup > 0
        path = tmp_path / "report.json"
        save_report(report, path)
        assert json.loads(path.read_text()) == payload

    def test_moderate_wind_speedup(self):
        scn = replace(builtin_scenario("c_like"), n_episodes=5)
        report = run_experiment(scn, seed=7)
        assert report.mean_speedup >= 1.2
        assert report.win_fraction == 1.0

    def test_simulate_phase_validation(self):
        scn = builtin_scenario("noise_free")
        with pytest.raises(ValueError):
            simulate_phase(scn, 0, "augmented")
        with pytest.raises(ValueError):
            simulate_phase(scn, 0, "warmup")


class TestGroundTruth:
    def test_noise_free_truth_is_zero(self):
        scn = replace(builtin_scenario("noise_free"), coverage_grid=4, coverage_samples=20)
        truth = scenario_ground_truth(scn, seed=1)
        assert len(truth) == 16
        assert all(v < 1e-12 for v in truth.values())

    def test_windy_truth_positive(self):
        scn = replace(builtin_scenario("c_like"), coverage_grid=3, coverage_samples=100)
        truth = scenario_ground_truth(scn, seed=1)
        assert all(v > 0 for v in truth.values())


class TestFigure2Fixture:
    def test_analytic_layering_and_definition(self):
        fixtures = figure2_fixture(n_paths=50, seed=0)
        wiener = fixtures["wiener"]
        t = wiener.times
        for eps in (0.1, 0.05, 0.01):
            expected = [analytic_var(Gaussian(0.0, np.sqrt(ti)), eps) for ti in t]
            assert np.allclose(wiener.analytic_sar[eps], expected)
        assert np.all(wiener.analytic_sar[0.01] >= wiener.analytic_sar[0.05])
        assert np.all(wiener.analytic_sar[0.05] >= wiener.analytic_sar[0.1])
        binom = fixtures["binomial"]
        assert np.all(binom.analytic_sar[0.01] >= binom.analytic_sar[0.05])
        assert np.all(binom.analytic_sar[0.05] >= binom.analytic_sar[0.1])

    def test_empirical_layering_pointwise(self):
        fixtures = figure2_fixture(n_paths=2000, seed=1)
        for fx in fixtures.values():
            assert np.all(fx.empirical_sar[0.01] >= fx.empirical_sar[0.05])
            assert np.all(fx.empirical_sar[0.05] >= fx.empirical_sar[0.1])

    def test_empirical_tracks_analytic(self):
        fixtures = figure2_fixture(n_paths=10**4, seed=2)
        wiener = fixtures["wiener"]
        i = int(np.argmin(np.abs(wiener.times - 1.0)))
        assert wiener.times[i] == pytest.approx(1.0)
        for eps in (0.1, 0.05):
            assert wiener.empirical_sar[eps][i] == pytest.approx(
                wiener.analytic_sar[eps][i], rel=0.05
            )


class TestExport:
    def prior_model(self, bound=2.0):
        kernel = SquaredExponentialKernel(1.0, 1.0)
        return SarModel(
            fit(np.zeros((0, 3)), np.zeros(0), kernel), ConfidenceParams(bound), 0.05, 60
        )

    def test_surface_slice_prior_constant(self, tmp_path):
        paths = export_plot_data(self.prior_model(2.0), "surface-slice", tmp_path, grid_n=5)
        rows = read_csv(paths[0])
        assert rows[0] == ["x", "y", "z", "value"]
        values = {float(r[3]) for r in rows[1:]}
        assert values == {2.0}  # B * signal_variance everywhere on the prior
        assert len(rows) == 1 + 25

    def test_course_3d_schema(self, tmp_path):
        scn = builtin_scenario("noise_free")
        trace, _ = simulate_phase(scn, 1, "baseline")
        paths = export_plot_data(trace, "course-3d", tmp_path)
        rows = read_csv(paths[0])
        assert rows[0] == ["t", "x", "y", "z", "waypoint_id"]
        assert len(rows) == 1 + len(trace.steps)
        assert float(rows[1][0]) == 0.0

    def test_sar_vs_samples_layering(self, tmp_path):
        fixtures = figure2_fixture(n_paths=500, seed=3)
        paths = export_plot_data(fixtures, "sar-vs-samples", tmp_path)
        assert {p.name for p in paths} == {
            "sar_vs_samples_wiener.csv",
            "sar_vs_samples_binomial.csv",
        }
        rows = read_csv([p for p in paths if "wiener" in p.name][0])
        assert rows[0] == ["t", "series", "value"]
        by_series = {}
        for t, series, value in rows[1:]:
            if series.startswith("analytic_sar"):
                by_series.setdefault(series, []).append(float(value))
        a, b, c = (
            by_series["analytic_sar_eps0.01"],
            by_series["analytic_sar_eps0.05"],
            by_series["analytic_sar_eps0.1"],
        )
        assert all(x >= y >= z for x, y, z in zip(a, b, c))

    def test_batch_diagnostics_export(self, tmp_path):
        scn = builtin_scenario("b_like")
        trace, _ = simulate_phase(scn, 2, "baseline")
        from riskbound.harness import fit_from_trace

        model = fit_from_trace(scn, trace)
        paths = export_plot_data(model, "batch-diagnostics", tmp_path)
        rows = read_csv(paths[0])
        assert rows[0] == ["batch_index", "alpha_d", "beta_d", "alpha_ok", "beta_ok"]
        assert len(rows) == 1 + model.iterations

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="unknown export kind"):
            export_plot_data(self.prior_model(), "hologram", tmp_path)

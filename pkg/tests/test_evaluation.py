import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from odofusion.errors import ConfigurationError, ConvergenceError, ExperimentError
from odofusion.estimators import EstimatorSpec, parse_roster, run_estimator
from odofusion.evaluation import (
    FAMILIES,
    FULL_ROSTER,
    REALTIME_ROSTER,
    SMOOTHING_ROSTER,
    ExperimentConfig,
    bias_variance,
    family_limit,
    family_variance,
    find_threshold_N,
    rmse,
    run_monte_carlo,
    simulate_errors,
)
from odofusion.filters import variance_truncated
from odofusion.model import REFERENCE_NOISE, NoiseSpec, TimeGrid
from odofusion.smoothers import pp_optimal_variance

from conftest import make_trace, with_gps

SMALL = TimeGrid(m=20, lam=10, horizon=20.0)


class TestMetrics:
    def test_rmse_examples(self):
        assert rmse([3.0, 4.0], [3.0, 4.0]) == 0.0
        assert rmse(np.full(5, 2.5), np.zeros(5)) == pytest.approx(2.5)
        assert rmse([1.0, 2.0], [0.0, 0.0]) == pytest.approx(math.sqrt(2.5))
        with pytest.raises(ConfigurationError):
            rmse([1.0], [1.0, 2.0])

    def test_bias_variance_examples(self):
        assert bias_variance(np.zeros(4), 0.0) == (0.0, 0.0)
        bias, var = bias_variance([2.0, 0.0], 1.0)
        assert (bias, var) == (0.0, 1.0)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.floats(-10, 10))
    def test_mse_decomposition(self, values, truth):
        bias, var = bias_variance(values, truth)
        mse = np.mean((np.array(values) - truth) ** 2)
        assert mse == pytest.approx(bias ** 2 + var, rel=1e-9, abs=1e-9)


class TestThresholds:
    @pytest.mark.parametrize("kind,expected", [("rt_optimal", 20), ("rt_truncated", 40),
                                               ("pp_optimal", 17), ("pp_asymptotic", 36), ("pp_truncated", 36)])
    def test_reference_thresholds(self, kind, expected):
        assert find_threshold_N(kind, REFERENCE_NOISE, 10) == expected

    def test_infinite_criterion(self):
        for kind in FAMILIES:
            assert find_threshold_N(kind, REFERENCE_NOISE, 10, criterion=math.inf) == 1

    def test_non_convergence(self):
        with pytest.raises(ConvergenceError):
            find_threshold_N("rt_truncated", REFERENCE_NOISE, 10, max_N=10)

    def test_unknown_family(self):
        with pytest.raises(ConfigurationError):
            find_threshold_N("kf", REFERENCE_NOISE, 10)

    def test_limits(self):
        assert math.sqrt(family_limit("rt_optimal", REFERENCE_NOISE, 10)) == pytest.approx(0.6797104695, abs=1e-9)
        assert math.sqrt(family_limit("pp_optimal", REFERENCE_NOISE, 10)) == pytest.approx(0.4869173610, abs=1e-9)
        assert family_variance("pp_optimal", 5, 2, 10, REFERENCE_NOISE) == pp_optimal_variance(5, 2, 10, REFERENCE_NOISE)


class TestEstimatorRegistry:
    def test_parse(self):
        spec = EstimatorSpec.parse("rt_optimal:20")
        assert (spec.kind, spec.N, spec.tag) == ("rt_optimal", 20, "rt_optimal_N20")
        assert EstimatorSpec.parse("kf").tag == "kf"
        assert [s.tag for s in parse_roster("kf, gps")] == ["kf", "gps"]

    @pytest.mark.parametrize("text", ["rt_optimal", "kf:4", "nope", "pp_optimal:x", "pp_optimal:0", ""])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigurationError):
            parse_roster(text)

    def test_rosters(self):
        assert len(REALTIME_ROSTER) == 10 and len(SMOOTHING_ROSTER) == 9
        assert len(FULL_ROSTER) == 16

    def test_raw_sensors(self, trace):
        od = run_estimator(EstimatorSpec("odometer"), trace, REFERENCE_NOISE)
        np.testing.assert_array_equal(od.estimates, trace.odometer)
        assert od.variances[10] == pytest.approx(10 * 0.0025)
        gps = run_estimator(EstimatorSpec("gps"), trace, REFERENCE_NOISE, trace.grid.gps_epochs())
        np.testing.assert_array_equal(gps.estimates, trace.gps)


class TestMonteCarlo:
    def config(self, **kw):
        kw.setdefault("grid", SMALL)
        kw.setdefault("n_sims", 6)
        kw.setdefault("distance", 200.0)
        return ExperimentConfig(**kw)

    def test_deterministic_and_order_independent(self):
        cfg = self.config()
        a, b = run_monte_carlo(cfg), run_monte_carlo(cfg, workers=2)
        for tag in a.tags:
            np.testing.assert_array_equal(a.errors[tag], b.errors[tag])
        single = simulate_errors(cfg, 4)
        np.testing.assert_array_equal(single["kf"][0], a.errors["kf"][4])

    def test_report_shape_and_identity(self):
        rep = run_monte_carlo(self.config())
        assert rep.errors["kf"].shape == (6, 21)
        assert max(rep.identity_gap(t) for t in rep.tags) < 1e-10
        rows = rep.summary()
        assert [r[0] for r in rows] == rep.tags
        assert rep.n_forward["pp_optimal_N17"][-1] == 0
        assert rep.analytic_variance["rt_optimal_N4"][-1] == pytest.approx(
            family_variance("rt_optimal", 4, 0, 10, REFERENCE_NOISE))

    def test_zero_noise_single_simulation(self):
        cfg = self.config(noise=NoiseSpec(0.0, 0.0), estimator_noise=REFERENCE_NOISE, n_sims=1)
        rep = run_monte_carlo(cfg)
        for tag in rep.tags:
            assert rep.mean_rmse(tag) < 1e-9

    def test_invalid_configs(self):
        with pytest.raises(ConfigurationError):
            self.config(n_sims=0)
        with pytest.raises(ConfigurationError):
            self.config(report_epochs=(5, 15))
        with pytest.raises(ConfigurationError):
            run_monte_carlo(self.config(roster=(EstimatorSpec("kf"), EstimatorSpec("kf"))))

    def test_failures_carry_context(self):
        cfg = self.config(noise=NoiseSpec(0.0, 0.0), roster=(EstimatorSpec("rt_optimal", 4),))
        with pytest.raises(ExperimentError, match="simulation 0"):
            run_monte_carlo(cfg)


@pytest.fixture(scope="module")
def reference_report():
    return run_monte_carlo(ExperimentConfig(seed=42))


class TestReferenceExperiment:
    """Checks on the 100-simulation reference setup (table rows live in test_acceptance)."""

    def test_truncated_N40_plateau_matches_analytic(self, reference_report):
        t = reference_report.times
        plateau = reference_report.rmse("rt_truncated_N40")[t > 50].mean()
        assert plateau == pytest.approx(math.sqrt(variance_truncated(40, 0, 10, REFERENCE_NOISE)), rel=0.05)

    def test_optimal_N20_merges_with_kalman(self, reference_report):
        t = reference_report.times
        gap = reference_report.rmse("rt_optimal_N20")[t >= 20] - reference_report.rmse("kf")[t >= 20]
        assert 0 < gap.mean() < 0.1

    def test_pp_optimal_N17_interior(self, reference_report):
        t = reference_report.times
        interior = reference_report.rmse("pp_optimal_N17")[(t > 20) & (t < 280)].mean()
        assert interior == pytest.approx(math.sqrt(pp_optimal_variance(17, 0, 10, REFERENCE_NOISE)), rel=0.05)
        assert interior < 0.49 + 0.1

    @pytest.mark.parametrize("tag,mean,maximum", [
        ("pp_optimal_N4", 1.07, None), ("pp_asymptotic_N36", 0.66, None), ("kf", 0.71, 3.01),
    ])
    def test_table_values(self, reference_report, tag, mean, maximum):
        assert reference_report.mean_rmse(tag) == pytest.approx(mean, abs=0.15)
        if maximum is not None:
            assert reference_report.max_rmse(tag) == pytest.approx(maximum, abs=0.3)

    def test_smoothing_beats_filtering(self, reference_report):
        assert reference_report.mean_rmse("pp_optimal_N17") < reference_report.mean_rmse("rt_optimal_N20")
        assert reference_report.mean_rmse("rt_optimal_N40") < reference_report.mean_rmse("rt_optimal_N20")

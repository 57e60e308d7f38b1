import numpy as np
import pytest
from scipy.stats import norm

from saebp.ebp import EbpDraws
from saebp.intervals import (
    calibrated_alpha_prime,
    calibrated_ci,
    calibration_coverage,
    coverage_alpha_star,
    naive_ci,
    normal_ci,
)
from saebp.model import ValidationError
from saebp.params import quantile_jw
from saebp.rng import derive


def draws_of(values, area_id=0):
    return EbpDraws(area_id=area_id, draws=np.asarray(values, dtype=float), params_used=None)


class TestNaive:
    def test_constant_draws_degenerate_interval(self):
        ci = naive_ci(draws_of([3.0] * 100), 0.10)
        assert ci.lower == ci.upper == 3.0

    def test_worked_quantiles_1_to_100(self):
        ci = naive_ci(draws_of(np.arange(1.0, 101.0)), 0.10)
        # j = floor(100*0.05 + 0.95) = 5, w = 0.95: lower = 0.05*5 + 0.95*6
        assert ci.lower == pytest.approx(5.95)
        assert ci.upper == pytest.approx(95.05)

    def test_requires_enough_draws(self):
        with pytest.raises(ValidationError):
            naive_ci(draws_of(np.arange(30.0)), 0.05)

    def test_contains_predictor_for_symmetric_draws(self):
        rng = derive(1, "sym")
        for _ in range(100):
            z = rng.standard_normal(400)
            vals = np.concatenate([z, -z]) + rng.normal()  # exactly symmetric
            ci = naive_ci(draws_of(vals), 0.5)
            assert ci.lower <= vals.mean() <= ci.upper


class TestCoverageCutoffs:
    def test_matches_bruteforce_indicator(self):
        rng = derive(2, "cut")
        s = np.sort(rng.normal(size=60))
        theta = rng.normal(size=40)
        a_star = coverage_alpha_star(s, theta)
        grid = np.linspace(1e-4, 0.9999, 601)
        for t, astar in zip(theta, a_star):
            for a in grid:
                inside = quantile_jw(s, a / 2) <= t <= quantile_jw(s, 1 - a / 2)
                assert inside == (a <= astar + 1e-12), (t, a, astar)

    def test_ties_handled_exactly(self):
        s = np.array([0.0, 0.0, 0.0, 1.0])
        a = coverage_alpha_star(s, np.array([0.0, 1.0, 0.5, -0.1, 1.1]))
        # 0.0 is the lower endpoint for all alpha; 1.0 only at alpha = 0
        assert a[0] == pytest.approx(1.0)  # covered up to the point interval at q(1/2)=0
        assert a[1] == pytest.approx(0.0)
        assert 0.0 < a[2] < 1.0
        assert a[3] == 0.0 and a[4] == 0.0

    def test_monotone_step_function_endpoints(self):
        rng = derive(3, "mono")
        draws = rng.normal(size=500)
        reps = rng.normal(size=(40, 500))
        cov_low = calibration_coverage(draws, reps, 1e-4)
        cov_high = calibration_coverage(draws, reps, 0.9999)
        assert cov_high <= 0.05
        assert cov_low >= 0.9
        last = cov_low
        for a in (0.1, 0.3, 0.5, 0.7, 0.9):
            cur = calibration_coverage(draws, reps, a)
            assert cur <= last + 1e-12
            last = cur


class TestCalibrated:
    def test_zero_parameter_uncertainty_recovers_nominal(self):
        # replicate draw sets regenerated from the same distribution: the
        # calibrated level stays close to the nominal level
        rng = derive(4, "zero")
        draws = draws_of(rng.normal(size=4000))
        reps = rng.normal(size=(60, 4000))
        alpha_prime, degenerate = calibrated_alpha_prime(draws.draws, reps, 0.10)
        assert not degenerate
        assert alpha_prime == pytest.approx(0.10, abs=0.02)
        ci = calibrated_ci(draws, reps, 0.10)
        ref = naive_ci(draws, 0.10)
        width = ref.upper - ref.lower
        assert ci.lower == pytest.approx(ref.lower, abs=0.1 * width)
        assert ci.upper == pytest.approx(ref.upper, abs=0.1 * width)

    def test_coverage_at_alpha_prime_meets_nominal(self):
        rng = derive(5, "meet")
        draws = rng.normal(size=800)
        reps = rng.normal(loc=rng.normal(0, 0.3, (50, 1)), size=(50, 800))
        for alpha in (0.10, 0.05):
            a_prime, flag = calibrated_alpha_prime(draws, reps, alpha)
            assert not flag
            assert calibration_coverage(draws, reps, a_prime) >= 1 - alpha

    def test_all_mass_outside_flags_widest(self):
        rng = derive(6, "out")
        draws = draws_of(rng.normal(size=300))
        reps = rng.normal(size=(20, 300)) + 100.0  # disjoint support
        ci = calibrated_ci(draws, reps, 0.10)
        assert ci.degenerate
        assert ci.lower == float(np.min(draws.draws))
        assert ci.upper == float(np.max(draws.draws))

    def test_endpoints_are_quantiles_of_original_draws(self):
        rng = derive(7, "endp")
        draws = draws_of(rng.normal(size=500))
        reps = rng.normal(0, 1.3, size=(40, 500))
        ci = calibrated_ci(draws, reps, 0.10)
        assert ci.lower == pytest.approx(quantile_jw(draws.draws, ci.alpha_prime / 2), abs=1e-12)
        assert ci.upper == pytest.approx(
            quantile_jw(draws.draws, 1 - ci.alpha_prime / 2), abs=1e-12
        )
        assert np.min(draws.draws) <= ci.lower <= ci.upper <= np.max(draws.draws)

    def test_alpha_prime_shrinks_with_dispersion(self):
        # wider parameter dispersion across replicates -> smaller alpha_prime
        violations = 0
        for seed in range(20):
            rng = derive(seed, "disp")
            draws = rng.normal(size=600)
            shifts1 = rng.normal(0, 0.2, (40, 1))
            reps1 = rng.normal(size=(40, 600)) + shifts1
            reps2 = rng.normal(size=(40, 600)) + 2.0 * shifts1  # covariance x4
            a1, _ = calibrated_alpha_prime(draws, reps1, 0.10)
            a2, _ = calibrated_alpha_prime(draws, reps2, 0.10)
            if a2 > a1:
                violations += 1
        assert violations == 0

    def test_naive_nested_in_calibrated_when_alpha_prime_smaller(self):
        rng = derive(9, "nest")
        draws = draws_of(rng.normal(size=500))
        reps = rng.normal(size=(30, 500)) + rng.normal(0, 0.5, (30, 1))
        ci = calibrated_ci(draws, reps, 0.10)
        ref = naive_ci(draws, 0.10)
        if ci.alpha_prime <= 0.10:
            assert ci.lower <= ref.lower + 1e-12
            assert ci.upper >= ref.upper - 1e-12

    def test_level_nesting(self):
        rng = derive(10, "lvl")
        draws = draws_of(rng.normal(size=1000))
        reps = rng.normal(size=(40, 1000)) + rng.normal(0, 0.3, (40, 1))
        c90 = calibrated_ci(draws, reps, 0.10)
        c95 = calibrated_ci(draws, reps, 0.05)
        c99 = calibrated_ci(draws, reps, 0.01)
        assert c99.lower <= c95.lower <= c90.lower
        assert c90.upper <= c95.upper <= c99.upper


class TestNormal:
    def test_zero_mse_degenerate(self):
        ci = normal_ci(1.5, 0.0, 0.05)
        assert ci.lower == ci.upper == 1.5

    def test_reference_z_value(self):
        ci = normal_ci(0.0, 1.0, 0.05)
        assert ci.upper == pytest.approx(1.959964, abs=1e-6)
        assert ci.lower == pytest.approx(-1.959964, abs=1e-6)
        assert ci.upper == pytest.approx(float(norm.ppf(0.975)), abs=1e-12)

    def test_width_scales_with_sqrt_mse(self):
        w1 = normal_ci(0.0, 0.25, 0.05).width
        w4 = normal_ci(0.0, 1.0, 0.05).width
        assert w4 == pytest.approx(2.0 * w1, rel=1e-12)

    def test_infinite_or_negative_mse_rejected(self):
        with pytest.raises(ValidationError):
            normal_ci(0.0, float("inf"), 0.05)
        with pytest.raises(ValidationError):
            normal_ci(0.0, -0.1, 0.05)

import numpy as np
import pytest

from conftest import simulate_dataset
from saebp.ebp import conditional_y_matrix, draw_conditional_population, predict_area
from saebp.intervals import naive_ci
from saebp.model import AreaData, NerParams, SampleDataset, fit_ml
from saebp.mse import m1_hat
from saebp.params import custom_param, mean_param
from saebp.rng import derive


def analytic_mean_predictor(fit, data, area_id):
    """Conditional expectation of the area mean under the fitted model."""
    a = data.area(area_id)
    ns = ~a.sampled_mask
    mu_ns = a.pop_x[ns] @ fit.params.beta + fit.u_hat[area_id]
    return (a.y.sum() + mu_ns.sum()) / a.pop_size


def analytic_mean_condvar(fit, data, area_id):
    a = data.area(area_id)
    m = int((~a.sampled_mask).sum())
    v_ns = np.ones(m)
    return ((m**2) * fit.v2_hat[area_id] + (fit.params.sigma2_e / v_ns).sum()) / a.pop_size**2


class TestDrawConditionalPopulation:
    def test_zero_variances_give_regression_surface(self, small_dataset):
        params = NerParams(beta=np.array([5.0, 0.1]), sigma2_u=0.0, sigma2_e=1e-300)
        a = small_dataset.areas[0]
        y = conditional_y_matrix(params, a, 0.0, 0.0, 3, derive(0, "t"))
        ns = ~a.sampled_mask
        expected = a.pop_x[ns] @ params.beta
        for row in y:
            assert np.allclose(row[ns], expected, atol=1e-12)
            assert np.array_equal(row[a.sampled_mask], a.y)

    def test_fully_sampled_area_reproduces_data(self):
        rng = derive(5, "full")
        x = np.column_stack([np.ones(8), rng.uniform(size=8)])
        y = x @ [5.0, 0.1] + rng.normal(0, 0.3, 8)
        areas = [
            AreaData(
                area_id=0, y=y, x=x, v=np.ones(8), unit_ids=np.arange(8),
                pop_x=x, sampled_mask=np.ones(8, dtype=bool),
            ),
            AreaData(
                area_id=1, y=y + 0.1, x=x, v=np.ones(8), unit_ids=np.arange(8),
                pop_x=x, sampled_mask=np.ones(8, dtype=bool),
            ),
        ]
        data = SampleDataset(areas)
        fit = fit_ml(data)
        pred, draws = predict_area(fit, data, 0, mean_param(), L=50, rng_seed=3)
        assert np.all(draws.draws == draws.draws[0])
        assert pred.theta_hat == pytest.approx(float(y.mean()), abs=1e-12)
        vec = draw_conditional_population(fit, data, 0, derive(3, "d"))
        assert np.array_equal(vec, y)

    def test_mean_of_draws_matches_analytic_best_predictor(self):
        data, _ = simulate_dataset(21, D=10, N=50)
        fit = fit_ml(data)
        pred, draws = predict_area(fit, data, 2, mean_param(), L=10**5, rng_seed=9)
        target = analytic_mean_predictor(fit, data, 2)
        assert abs(pred.theta_hat - target) <= 3.0 * pred.mc_se

    def test_draw_variance_converges_to_analytic_conditional_variance(self):
        data, _ = simulate_dataset(22, D=10, N=50)
        fit = fit_ml(data)
        _, draws = predict_area(fit, data, 4, mean_param(), L=10**5, rng_seed=10)
        target = analytic_mean_condvar(fit, data, 4)
        assert m1_hat(draws) == pytest.approx(target, rel=0.03)


class TestPredict:
    def test_identity_functional_fully_sampled(self):
        rng = derive(6, "ident")
        x = np.column_stack([np.ones(5), rng.uniform(size=5)])
        y = x @ [5.0, 0.1] + rng.normal(0, 0.3, 5)
        areas = [
            AreaData(area_id=i, y=y + i * 0.05, x=x, v=np.ones(5),
                     unit_ids=np.arange(5), pop_x=x, sampled_mask=np.ones(5, dtype=bool))
            for i in range(3)
        ]
        data = SampleDataset(areas)
        fit = fit_ml(data)
        h = custom_param(lambda v: float(v[2]), name="third_unit")
        pred, _ = predict_area(fit, data, 1, h, L=10, rng_seed=1)
        assert pred.theta_hat == pytest.approx(float(y[2] + 0.05), abs=1e-12)

    def test_doubling_l_stays_within_mc_error(self):
        data, _ = simulate_dataset(30, D=8, N=40)
        fit = fit_ml(data)
        p1, _ = predict_area(fit, data, 0, mean_param(), L=2000, rng_seed=5)
        p2, _ = predict_area(fit, data, 0, mean_param(), L=4000, rng_seed=6)
        assert abs(p1.theta_hat - p2.theta_hat) <= 2.0 * np.hypot(p1.mc_se, p2.mc_se)

    def test_bit_reproducible(self):
        data, _ = simulate_dataset(31, D=8, N=40)
        fit = fit_ml(data)
        _, d1 = predict_area(fit, data, 3, mean_param(), L=500, rng_seed=7)
        _, d2 = predict_area(fit, data, 3, mean_param(), L=500, rng_seed=7)
        assert np.array_equal(d1.draws, d2.draws)

    def test_draw_exchangeability(self):
        # permuting draws leaves the predictor, M1 and the naive interval unchanged
        data, _ = simulate_dataset(32, D=8, N=40)
        fit = fit_ml(data)
        _, draws = predict_area(fit, data, 1, mean_param(), L=400, rng_seed=8)
        perm = draws
        perm.draws = perm.draws[derive(8, "perm").permutation(400)]
        _, draws2 = predict_area(fit, data, 1, mean_param(), L=400, rng_seed=8)
        assert np.mean(perm.draws) == pytest.approx(np.mean(draws2.draws), abs=1e-15)
        assert m1_hat(perm) == pytest.approx(m1_hat(draws2), rel=1e-12)
        ci1 = naive_ci(perm, 0.10)
        ci2 = naive_ci(draws2, 0.10)
        assert (ci1.lower, ci1.upper) == (ci2.lower, ci2.upper)

    def test_mc_se_definition(self):
        data, _ = simulate_dataset(33, D=8, N=40)
        fit = fit_ml(data)
        pred, draws = predict_area(fit, data, 0, mean_param(), L=300, rng_seed=2)
        assert pred.mc_se == pytest.approx(draws.draws.std(ddof=1) / np.sqrt(300), rel=1e-12)

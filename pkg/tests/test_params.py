import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gini_double_sum, poverty_gap_direct, quantile_type7
from saebp.params import (
    UndefinedValueError,
    evaluate,
    evaluate_many,
    evaluate_matrix,
    exp_mean_param,
    gini_param,
    mean_param,
    parse_parameter,
    poverty_gap_param,
    quantile_param,
    quantile_jw,
)

finite_vectors = st.lists(
    st.floats(min_value=-8.0, max_value=8.0, allow_nan=False), min_size=1, max_size=40
).map(lambda v: np.array(v))

ALL_PARAMS = [
    mean_param(),
    exp_mean_param(),
    quantile_param(0.25),
    quantile_param(0.75),
    poverty_gap_param(155.0),
    gini_param(),
]


class TestQuantile:
    def test_worked_example(self):
        # j = floor(5 * 0.25 + 0.75) = 2, weight 0 -> second order statistic
        assert evaluate(quantile_param(0.25), np.array([1, 2, 3, 4, 5])) == 2.0

    def test_matches_type7_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(120):
            n = int(rng.integers(1, 60))
            vals = rng.normal(5, 2, n)
            p = float(rng.uniform(0.01, 0.99))
            assert quantile_jw(vals, p) == pytest.approx(quantile_type7(vals, p), abs=1e-10)

    @given(finite_vectors, st.floats(min_value=0.01, max_value=0.99))
    @settings(max_examples=60, deadline=None)
    def test_within_range_and_monotone(self, vals, p):
        q = quantile_jw(vals, p)
        assert vals.min() - 1e-12 <= q <= vals.max() + 1e-12
        q2 = quantile_jw(vals, min(p + 0.3, 0.999))
        assert q2 >= q - 1e-12

    def test_endpoints(self):
        vals = np.array([3.0, 1.0, 2.0])
        assert quantile_jw(vals, 1e-9) == pytest.approx(1.0)
        assert quantile_jw(vals, 1 - 1e-12) == pytest.approx(3.0)


class TestGini:
    def test_constant_vector_is_zero(self):
        assert evaluate(gini_param(), np.full(7, 1.3)) == pytest.approx(0.0, abs=1e-14)

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            vals = rng.normal(4, 1, int(rng.integers(2, 50)))
            assert evaluate(gini_param(), vals) == pytest.approx(
                gini_double_sum(vals), abs=1e-12
            )

    def test_all_zero_exp_is_undefined(self):
        with pytest.raises(UndefinedValueError):
            evaluate(gini_param(), np.full(4, -np.inf))

    @given(finite_vectors, st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_scale_invariance(self, vals, scale):
        g = evaluate(gini_param(), vals)
        n = vals.size
        assert -1e-12 <= g <= 1.0 - 1.0 / n + 1e-12
        # adding a constant on the log scale rescales exp(y): Gini unchanged
        assert evaluate(gini_param(), vals + np.log(scale)) == pytest.approx(g, abs=1e-9)


class TestPovertyGap:
    def test_no_unit_below_line(self):
        vals = np.log(np.array([200.0, 400.0]))
        assert evaluate(poverty_gap_param(155.0), vals) == 0.0

    def test_all_exp_zero_gives_one(self):
        vals = np.full(5, -1e6)  # exp(y) numerically zero
        assert evaluate(poverty_gap_param(155.0), vals) == pytest.approx(1.0)

    def test_matches_direct_indicator_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            vals = rng.normal(5, 0.6, int(rng.integers(1, 60)))
            assert evaluate(poverty_gap_param(155.0), vals) == pytest.approx(
                poverty_gap_direct(vals, 155.0), abs=1e-12
            )

    @given(finite_vectors)
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_monotonicity(self, vals):
        pg = evaluate(poverty_gap_param(155.0), vals)
        assert -1e-15 <= pg <= 1.0
        assert evaluate(poverty_gap_param(155.0), vals + 0.1) <= pg + 1e-12


class TestInvariances:
    @given(finite_vectors, st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariance(self, vals, rnd):
        order = list(range(vals.size))
        rnd.shuffle(order)
        shuffled = vals[np.array(order, dtype=int)]
        for p in ALL_PARAMS:
            assert evaluate(p, shuffled) == pytest.approx(evaluate(p, vals), abs=1e-10, rel=1e-10)

    def test_matrix_and_scalar_agree(self):
        rng = np.random.default_rng(4)
        mat = rng.normal(5, 1, (20, 30))
        for p in ALL_PARAMS:
            rows = np.array([evaluate(p, row) for row in mat])
            assert np.allclose(evaluate_matrix(p, mat), rows, atol=1e-12)

    def test_evaluate_many_matches_individual(self):
        rng = np.random.default_rng(5)
        mat = rng.normal(5, 1, (15, 25))
        combined = evaluate_many(ALL_PARAMS, mat)
        for p in ALL_PARAMS:
            assert np.allclose(combined[p.name], evaluate_matrix(p, mat), atol=1e-12)


class TestRegistry:
    def test_parse_specs(self):
        assert parse_parameter("mean").kind == "mean"
        assert parse_parameter("q25").p == 0.25
        assert parse_parameter("quantile:0.75").p == 0.75
        assert parse_parameter("pg").z == 155.0
        assert parse_parameter("poverty_gap:100").z == 100.0
        assert parse_parameter("gini").kind == "gini"
        with pytest.raises(ValueError):
            parse_parameter("mystery")

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            quantile_param(1.5)
        with pytest.raises(ValueError):
            poverty_gap_param(-1.0)

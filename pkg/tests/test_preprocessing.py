import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import yeojohnson_normmax

from wettability import preprocessing as pp
from wettability.errors import ConstantColumn, EmptyMatrix, OutOfRange, SchemaMismatch


def grid_best(y, step=0.01):
    grid = np.round(np.arange(-5, 5 + step / 2, step), 10)
    ll = [pp.log_likelihood(y, g) for g in grid]
    return grid[int(np.argmax(ll))], max(ll)


def sample_with_lambda(lmbda, n, rng):
    z = rng.normal(0.5, 1.0, n)
    return pp.yeo_johnson_inverse(z, lmbda)


class TestForward:
    def test_identity_at_one(self, rng):
        y = rng.normal(0, 5, 1000)
        np.testing.assert_array_equal(pp.yeo_johnson(y, 1.0), y)
        np.testing.assert_array_equal(pp.yeo_johnson_inverse(y, 1.0), y)

    def test_log_branch(self):
        assert pp.yeo_johnson(math.e - 1, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_negative_log_branch(self):
        assert pp.yeo_johnson(-1.0, 2.0) == pytest.approx(-math.log(2), abs=1e-15)
        assert pp.yeo_johnson(-1.0, 2.0) == pytest.approx(-0.693147, abs=1e-6)

    def test_scalar_returns_float(self):
        assert isinstance(pp.yeo_johnson(0.3, 0.5), float)

    def test_general_branches(self):
        assert pp.yeo_johnson(3.0, 0.5) == pytest.approx((4 ** 0.5 - 1) / 0.5)
        assert pp.yeo_johnson(-3.0, 0.5) == pytest.approx(-(4 ** 1.5 - 1) / 1.5)

    @pytest.mark.parametrize("lam", [-2.0, -0.5, 0.0, 0.7, 1.0, 2.0, 3.5])
    def test_strictly_increasing(self, lam):
        y = np.linspace(-10, 10, 20001)
        assert np.all(np.diff(pp.yeo_johnson(y, lam)) > 0)

    @pytest.mark.parametrize("y", [0.0, 0.2, 3.0, 7.5])
    def test_continuous_at_zero(self, y):
        eps = 1e-6
        assert abs(pp.yeo_johnson(y, eps) - pp.yeo_johnson(y, 0.0)) < 1e-5
        assert abs(pp.yeo_johnson(y, -eps) - pp.yeo_johnson(y, 0.0)) < 1e-5

    @pytest.mark.parametrize("y", [-7.5, -3.0, -0.2])
    def test_continuous_at_two(self, y):
        eps = 1e-6
        assert abs(pp.yeo_johnson(y, 2 + eps) - pp.yeo_johnson(y, 2.0)) < 1e-5
        assert abs(pp.yeo_johnson(y, 2 - eps) - pp.yeo_johnson(y, 2.0)) < 1e-5


class TestInverse:
    def test_trivial(self):
        assert pp.yeo_johnson_inverse(2.5, 1.0) == pytest.approx(2.5, abs=1e-15)
        assert pp.yeo_johnson_inverse(1.0, 0.0) == pytest.approx(math.e - 1, abs=1e-15)

    def test_round_trip(self, rng):
        y = rng.uniform(-10, 10, 10_000)
        lam = rng.uniform(-2, 4, 10_000)
        err = max(
            abs(pp.yeo_johnson_inverse(pp.yeo_johnson(yi, li), li) - yi) for yi, li in zip(y, lam)
        )
        assert err < 1e-9

    def test_out_of_range(self):
        # lambda < 0 bounds the positive branch above by -1/lambda
        with pytest.raises(OutOfRange):
            pp.yeo_johnson_inverse(1.5, -1.0)
        with pytest.raises(OutOfRange):
            pp.yeo_johnson_inverse(-1.5, 3.0)


class TestFitLambda:
    def test_normal_sample(self, rng):
        y = rng.normal(size=2000)
        lam = pp.fit_lambda(y)
        assert 0.85 <= lam <= 1.15
        g, _ = grid_best(y)
        assert abs(lam - g) <= 0.01

    def test_lognormal_sample(self, rng):
        # y = exp(x) - 1 is normalized by lambda = 0 only on its y >= 0 half;
        # the y < 0 half pulls the optimum to about -0.25
        y = np.expm1(rng.normal(size=2000))
        lam = pp.fit_lambda(y)
        g, _ = grid_best(y)
        assert abs(lam - g) <= 0.01
        assert lam == pytest.approx(yeojohnson_normmax(y), abs=1e-4)
        assert -0.4 < lam < -0.1

    @pytest.mark.parametrize("true", [0.0, 0.5, 1.0, 2.0])
    def test_recovers_planted_lambda(self, rng, true):
        y = sample_with_lambda(true, 2000, rng)
        assert abs(pp.fit_lambda(y) - true) <= 0.15

    def test_beats_grid(self, rng):
        for _ in range(5):
            y = rng.gamma(1.5, 3.0, 300) - 2.0
            _, best = grid_best(y)
            assert pp.log_likelihood(y, pp.fit_lambda(y)) >= best - 1e-6

    def test_constant(self):
        with pytest.raises(ConstantColumn):
            pp.fit_lambda([3.0, 3.0, 3.0, 3.0])
        with pytest.raises(ConstantColumn):
            pp.fit_lambda([1.0, 2.0])


class TestTransformer:
    def test_standard_normal_matrix(self, rng):
        X = rng.normal(size=(2000, 3))
        X = (X - X.mean(0)) / X.std(0)
        params = pp.fit_transformer(X)
        assert np.all(np.abs(params.lambdas - 1) < 0.15)
        assert np.all(np.abs(params.means) < 0.1)
        assert np.all(np.abs(params.stds - 1) < 0.1)

    def test_self_standardizes(self, rng):
        X = np.column_stack([rng.gamma(2, 2, 200), rng.normal(3, 2, 200), rng.uniform(-5, 1, 200)])
        params = pp.fit_transformer(X)
        Z = pp.apply_transformer(params, X)
        assert np.all(np.abs(Z.mean(0)) < 1e-9)
        assert np.all(np.abs(Z.std(0) - 1) < 1e-9)

    def test_constant_column_passes_through(self, rng):
        X = np.column_stack([rng.normal(size=50), np.full(50, 4.2)])
        params = pp.fit_transformer(X)
        assert params.lambdas[1] == 1 and params.means[1] == 4.2 and params.stds[1] == 1
        np.testing.assert_array_equal(pp.apply_transformer(params, X)[:, 1], X[:, 1])

    def test_round_trip(self, rng):
        X = np.column_stack([rng.gamma(2, 2, 100), rng.normal(size=100) * 10, rng.exponential(1, 100) - 1])
        params = pp.fit_transformer(X)
        back = pp.inverse_transformer(params, pp.apply_transformer(params, X))
        assert np.max(np.abs(back - X)) < 1e-8

    def test_zero_rows(self, rng):
        params = pp.fit_transformer(rng.normal(size=(10, 2)))
        assert pp.apply_transformer(params, np.empty((0, 2))).shape == (0, 2)

    def test_no_leakage(self, rng):
        X = rng.normal(size=(200, 2))
        params = pp.fit_transformer(X)
        shifted = rng.normal(size=(100, 2)) + 5.0
        Z = pp.apply_transformer(params, shifted)
        assert np.all(Z.mean(0) > 2.0)

    def test_errors(self, rng):
        with pytest.raises(EmptyMatrix):
            pp.fit_transformer(np.empty((0, 3)))
        with pytest.raises(EmptyMatrix):
            pp.fit_transformer(np.ones((2, 3)))
        params = pp.fit_transformer(rng.normal(size=(10, 2)), names=["a", "b"])
        with pytest.raises(SchemaMismatch):
            pp.apply_transformer(params, np.zeros((3, 3)))
        with pytest.raises(SchemaMismatch):
            pp.apply_transformer(params, np.zeros((3, 2)), names=["b", "a"])

    def test_dict_round_trip(self, rng):
        params = pp.fit_transformer(rng.gamma(2, 1, (30, 3)))
        again = pp.TransformParams.from_dict(params.to_dict())
        X = rng.gamma(2, 1, (5, 3))
        np.testing.assert_array_equal(pp.apply_transformer(params, X), pp.apply_transformer(again, X))


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(-2, 4))
def test_round_trip_property(y, lam):
    assert abs(pp.yeo_johnson_inverse(pp.yeo_johnson(y, lam), lam) - y) < 1e-9

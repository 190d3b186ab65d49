import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from rru import stats_kernel as sk
from rru.errors import UsageError


def uniform_cdf(x):
    return min(1.0, max(0.0, x))


class TestNormal:
    def test_cdf_at_zero(self):
        assert sk.normal_cdf(0.0) == 0.5

    @given(st.floats(-30, 30))
    def test_cdf_symmetry(self, x):
        assert abs(sk.normal_cdf(x) + sk.normal_cdf(-x) - 1.0) <= 1e-12

    def test_cdf_known_point(self):
        assert sk.normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)

    def test_cdf_against_scipy(self):
        xs = np.linspace(-12, 12, 4001)
        ours = np.array([sk.normal_cdf(x) for x in xs])
        assert np.max(np.abs(ours - stats.norm.cdf(xs))) <= 1e-10

    def test_quantile_median(self):
        assert sk.normal_quantile(0.5) == 0.0

    def test_quantile_round_trip(self):
        for p in np.arange(1, 100) / 100:
            assert abs(sk.normal_cdf(sk.normal_quantile(p)) - p) <= 1e-8

    def test_quantile_095(self):
        assert sk.normal_quantile(0.95) == pytest.approx(1.644854, abs=1e-5)

    def test_quantile_against_scipy(self):
        ps = np.concatenate([np.logspace(-12, -1, 50), np.linspace(0.1, 0.9, 81), 1 - np.logspace(-10, -1, 50)])
        for p in ps:
            assert sk.normal_quantile(p) == pytest.approx(stats.norm.ppf(p), abs=1e-9)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_quantile_domain(self, p):
        with pytest.raises(ValueError):
            sk.normal_quantile(p)

    def test_quantile_inverts_cdf_on_grid(self):
        for x in np.linspace(-6, 6, 241):
            assert sk.normal_quantile(sk.normal_cdf(x)) == pytest.approx(x, abs=1e-8)


class TestBeta:
    def test_uniform_case(self):
        for x in np.linspace(0, 1, 101):
            assert sk.beta_cdf(x, 1, 1) == pytest.approx(x, abs=1e-12)

    @pytest.mark.parametrize("a", [0.2, 1.0, 3.5, 50.0])
    def test_symmetric_median(self, a):
        assert sk.beta_cdf(0.5, a, a) == pytest.approx(0.5, abs=1e-10)

    def test_beta21(self):
        assert sk.beta_cdf(0.25, 2, 1) == pytest.approx(0.0625, abs=1e-12)

    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (2, 1), (2, 2), (0.3, 7.0), (15.0, 4.0), (100.0, 120.0)])
    def test_against_scipy(self, a, b):
        xs = np.linspace(0, 1, 501)
        ours = np.array([sk.beta_cdf(x, a, b) for x in xs])
        assert np.max(np.abs(ours - special.betainc(a, b, xs))) <= 1e-10

    # dyadic x keeps 1 - x exact, so the identity is not blurred by input rounding
    @given(st.integers(0, 2**20), st.floats(0.05, 50), st.floats(0.05, 50))
    def test_reflection(self, k, a, b):
        x = k / 2**20
        assert abs(sk.beta_cdf(x, a, b) + sk.beta_cdf(1 - x, b, a) - 1.0) <= 1e-9

    @pytest.mark.parametrize("x,a,b", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2)])
    def test_domain(self, x, a, b):
        with pytest.raises(ValueError):
            sk.beta_cdf(x, a, b)


class TestGamma:
    @pytest.mark.parametrize("s", [0.5, 1.0, 4.2])
    def test_zero(self, s):
        assert sk.gamma_upper_regularized(s, 0.0) == 1.0

    @pytest.mark.parametrize("x", [0.01, 0.5, 1.0, 3.0, 12.0, 40.0])
    def test_chi2_one_df_identity(self, x):
        expected = 2.0 * (1.0 - sk.normal_cdf(math.sqrt(2 * x)))
        assert sk.gamma_upper_regularized(0.5, x) == pytest.approx(expected, abs=1e-10)

    def test_exponential_tail(self):
        assert sk.gamma_upper_regularized(1.0, 1.0) == pytest.approx(math.exp(-1), abs=1e-10)

    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 7.5, 30.0])
    def test_against_scipy(self, s):
        xs = np.linspace(0, 4 * s + 20, 400)
        ours = np.array([sk.gamma_upper_regularized(s, x) for x in xs])
        assert np.max(np.abs(ours - special.gammaincc(s, xs))) <= 1e-10

    def test_chi2_sf(self):
        assert sk.chi2_sf(9.487729036781154, 4) == pytest.approx(0.05, abs=1e-10)

    @pytest.mark.parametrize("s,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
    def test_domain(self, s, x):
        with pytest.raises(ValueError):
            sk.gamma_upper_regularized(s, x)


class TestKolmogorov:
    def test_single_point(self):
        assert sk.ks_statistic([0.5], uniform_cdf) == 0.5

    def test_two_points(self):
        assert sk.ks_statistic([0.25, 0.75], uniform_cdf) == pytest.approx(0.25, abs=1e-15)

    def test_mid_rank_quantiles(self):
        n = 10_000
        xs = [sk.normal_quantile((i - 0.5) / n) for i in range(1, n + 1)]
        assert sk.ks_statistic(xs, sk.normal_cdf) <= 1 / (2 * n) + 1e-6

    def test_empty_sample(self):
        with pytest.raises(UsageError):
            sk.ks_statistic([], uniform_cdf)

    def test_matches_scipy_statistic(self):
        rng = np.random.default_rng(4)
        xs = rng.standard_normal(700)
        ours = sk.ks_statistic(xs, sk.normal_cdf)
        assert ours == pytest.approx(stats.kstest(xs, "norm").statistic, abs=1e-12)

    def test_discrete_left_limit(self):
        # bernoulli(0.5) sample with exact proportions has zero distance
        def cdf(x):
            return 0.0 if x < 0 else (0.5 if x < 1 else 1.0)

        def left(x):
            return 0.0 if x <= 0 else (0.5 if x <= 1 else 1.0)

        assert sk.ks_statistic([0.0, 1.0] * 50, cdf, left) == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(-5, 5), min_size=1, max_size=40),
        st.floats(0.1, 10),
        st.floats(-10, 10),
    )
    def test_affine_invariance(self, xs, scale, shift):
        d0 = sk.ks_statistic(xs, sk.normal_cdf)
        ys = [scale * x + shift for x in xs]
        d1 = sk.ks_statistic(ys, lambda y: sk.normal_cdf((y - shift) / scale))
        assert d1 == pytest.approx(d0, abs=1e-9)

    def test_pvalue_zero_distance(self):
        assert sk.ks_pvalue(0.0, 50) == 1.0

    def test_pvalue_monotone(self):
        assert sk.ks_pvalue(0.5, 1) > sk.ks_pvalue(1.5, 1)
        ts = np.linspace(0.05, 3, 300)
        ps = [sk.ks_pvalue(t, 1) for t in ts]
        assert all(a >= b for a, b in zip(ps, ps[1:]))

    def test_pvalue_136(self):
        assert sk.ks_pvalue(1.36, 1) == pytest.approx(0.0505, abs=2e-3)

    def test_pvalue_against_scipy_kstwobign(self):
        for t in np.linspace(0.2, 3.0, 57):
            assert sk.ks_pvalue(t, 1) == pytest.approx(stats.kstwobign.sf(t), abs=1e-10)

    def test_ks_test_bundle(self):
        res = sk.ks_test([0.1, 0.4, 0.8], uniform_cdf)
        assert 0.0 <= res.statistic <= 1.0 and 0.0 <= res.p_value <= 1.0
        assert res.sample_size == 3


class TestCorrelation:
    def test_identical(self):
        assert sk.pearson_corr([1, 2, 4, 7], [1, 2, 4, 7]) == pytest.approx(1.0)

    def test_negated(self):
        assert sk.pearson_corr([1, 2, 4, 7], [-1, -2, -4, -7]) == pytest.approx(-1.0)

    def test_hand_example(self):
        assert sk.pearson_corr([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)

    def test_zero_variance_is_undefined(self):
        assert math.isnan(sk.pearson_corr([2, 2, 2], [1, 2, 3]))

    @pytest.mark.parametrize("xs,ys", [([1], [1]), ([1, 2], [1, 2, 3])])
    def test_bad_lengths(self, xs, ys):
        with pytest.raises(UsageError):
            sk.pearson_corr(xs, ys)

    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2, max_size=50))
    def test_bounded_and_matches_numpy(self, pairs):
        xs, ys = zip(*pairs)
        r = sk.pearson_corr(xs, ys)
        if math.isnan(r):
            return
        assert -1.0 <= r <= 1.0
        if np.std(xs) > 1e-6 and np.std(ys) > 1e-6:
            assert r == pytest.approx(np.corrcoef(xs, ys)[0, 1], abs=1e-9)


def test_cdfs_monotone_and_bounded():
    grid = np.linspace(-8, 8, 10_000)
    vals = np.array([sk.normal_cdf(x) for x in grid])
    assert np.all(np.diff(vals) >= 0) and vals.min() >= 0 and vals.max() <= 1
    grid01 = np.linspace(0, 1, 10_000)
    for a, b in [(0.5, 0.5), (2, 1), (3, 7)]:
        vals = np.array([sk.beta_cdf(x, a, b) for x in grid01])
        assert np.all(np.diff(vals) >= -1e-15) and vals.min() >= 0 and vals.max() <= 1

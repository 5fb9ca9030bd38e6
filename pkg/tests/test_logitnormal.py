"""Logit-normal moment/quantile tests against Monte Carlo oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from binarygp.logitnormal import kappa, moments, quantile, sample, tau


def mc_moments(m, v, n=10**6, seed=0):
    """Monte Carlo oracle for the first two moments of logistic(Normal)."""
    rng = np.random.default_rng(seed)
    p = expit(m + np.sqrt(v) * rng.standard_normal(n))
    se_mean = p.std(ddof=1) / np.sqrt(n)
    return p.mean(), p.var(ddof=1), se_mean


class TestKappa:
    def test_degenerate_is_logistic(self):
        assert kappa(0.0, 0.0) == 0.5
        assert kappa(1.3, 0.0) == pytest.approx(expit(1.3), abs=1e-15)

    def test_symmetry_center(self):
        for v in (0.2, 1.0, 5.0, 40.0):
            assert kappa(0.0, v) == pytest.approx(0.5, abs=1e-12)

    def test_monte_carlo_oracle(self):
        mean, _, se = mc_moments(1.0, 1.0, n=10**7, seed=42)
        assert kappa(1.0, 1.0) == pytest.approx(mean, abs=3 * se)

    @given(st.floats(min_value=-4, max_value=4), st.floats(min_value=0, max_value=20))
    @settings(max_examples=40, deadline=None)
    def test_mirror_symmetry(self, m, v):
        assert kappa(-m, v) + kappa(m, v) == pytest.approx(1.0, abs=1e-12)

    def test_vectorized(self):
        m = np.array([-1.0, 0.0, 2.0])
        out = kappa(m, 0.5)
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)


class TestTau:
    def test_degenerate_zero(self):
        assert tau(0.7, 0.0) == 0.0

    def test_large_variance_limit(self):
        # mass piles at 0 and 1: Bernoulli(1/2) variance in the limit
        assert tau(0.0, 1e6) == pytest.approx(0.25, abs=1e-3)
        big = [tau(0.0, v) for v in (1e2, 1e3, 1e4, 1e5, 1e6)]
        assert all(a < b for a, b in zip(big, big[1:]))

    def test_monte_carlo_oracle(self):
        _, var, _ = mc_moments(1.0, 1.0, n=10**7, seed=7)
        assert tau(1.0, 1.0) == pytest.approx(var, abs=1e-3)

    def test_range(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            t = tau(rng.normal(scale=3), rng.random() * 20)
            assert 0.0 <= t < 0.25

    def test_internal_consistency_with_second_moment(self):
        # tau must equal kappa2 - kappa^2 from the same quadrature
        from binarygp.logitnormal import _gh_moments

        rng = np.random.default_rng(5)
        for _ in range(20):
            m, v = rng.normal(scale=2), rng.random() * 1.9 + 0.05
            k1, k2 = _gh_moments(np.atleast_1d(m), np.atleast_1d(v))
            assert tau(m, v) == pytest.approx(float(k2[0] - k1[0] * k1[0]), abs=1e-12)


class TestQuantile:
    def test_median_is_logistic(self):
        assert quantile(0.4, 2.0, 0.5) == pytest.approx(expit(0.4), abs=1e-12)

    def test_degenerate(self):
        for q in (0.1, 0.5, 0.9):
            assert quantile(0.4, 0.0, q) == pytest.approx(expit(0.4), abs=1e-15)

    def test_upper_tail_value(self):
        # logistic(0 + 1.959964 * 1) from the normal 97.5% point
        assert quantile(0.0, 1.0, 0.975) == pytest.approx(
            expit(1.959963984540054), abs=1e-9
        )

    def test_against_empirical_quantiles(self):
        rng = np.random.default_rng(19)
        p = expit(0.3 + np.sqrt(0.8) * rng.standard_normal(10**6))
        for q in (0.025, 0.25, 0.5, 0.75, 0.975):
            assert quantile(0.3, 0.8, q) == pytest.approx(
                np.quantile(p, q), abs=1e-2
            )

    def test_monotone_in_q_and_m(self):
        qs = np.linspace(0.01, 0.99, 25)
        vals = quantile(0.2, 1.5, qs)
        assert np.all(np.diff(vals) > 0)
        ms = np.linspace(-2, 2, 25)
        vals_m = np.array([quantile(m, 1.5, 0.3) for m in ms])
        assert np.all(np.diff(vals_m) > 0)

    def test_rejects_bad_level(self):
        with pytest.raises(ValueError):
            quantile(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            quantile(0.0, 1.0, 1.0)


class TestSample:
    def test_degenerate(self):
        rng = np.random.default_rng(0)
        assert sample(0.8, 0.0, rng) == pytest.approx(expit(0.8), abs=1e-15)

    def test_mean_matches_kappa(self):
        rng = np.random.default_rng(21)
        draws = sample(0.5, 2.0, rng, size=10**6)
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        assert draws.mean() == pytest.approx(kappa(0.5, 2.0), abs=3 * se)

    def test_quantiles_match_formula(self):
        rng = np.random.default_rng(22)
        draws = sample(-0.4, 1.2, rng, size=10**6)
        for q in (0.1, 0.5, 0.9):
            assert np.quantile(draws, q) == pytest.approx(
                quantile(-0.4, 1.2, q), abs=1e-2
            )

    def test_reproducible_per_seed(self):
        a = sample(0.1, 0.5, np.random.default_rng(9), size=10)
        b = sample(0.1, 0.5, np.random.default_rng(9), size=10)
        np.testing.assert_array_equal(a, b)


def test_quadrature_order_doubling_stable():
    from binarygp.logitnormal import GH_ORDER, GL_ORDER, HEAVY_V

    rng = np.random.default_rng(31)
    for _ in range(30):
        m, v = rng.normal(scale=3), rng.random() * 24 + 0.01
        k_def, t_def = moments(m, v)
        doubled = 2 * (GH_ORDER if v <= HEAVY_V else GL_ORDER)
        k_dbl, t_dbl = moments(m, v, gh_order=doubled)
        assert abs(k_def - k_dbl) < 1e-10
        assert abs(t_def - t_dbl) < 1e-10


def test_heavy_variance_branch_continuity():
    # both quadrature branches must agree where they meet
    from binarygp.logitnormal import HEAVY_V, _gh_moments, _heavy_moments

    for m in (-3.0, 0.0, 0.7, 4.0):
        a = _gh_moments(np.array([m]), np.array([HEAVY_V]))
        b = _heavy_moments(np.array([m]), np.array([HEAVY_V]))
        assert abs(a[0][0] - b[0][0]) < 1e-12
        assert abs(a[1][0] - b[1][0]) < 1e-12


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        kappa(0.0, -1e-3)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dfrelay.numerics import (
    OSC_COS,
    OSC_SIN,
    SMOOTH,
    QuadratureError,
    SkellamDist,
    integrate_semi_infinite,
    log_bessel_i,
    skellam_cdf,
    skellam_pmf,
    skellam_sf,
)

from oracles import LOG_BESSEL_REF, SKELLAM_REF, bessel_series, poisson_difference_cdf, poisson_difference_pmf


class TestLogBessel:
    def test_order_zero_at_origin(self):
        assert log_bessel_i(0, 0.0) == 0.0

    def test_higher_order_at_origin_is_minus_inf(self):
        assert log_bessel_i(3, 0.0) == -math.inf

    def test_matches_ascending_series(self):
        ref = float(mp_log(bessel_series(2, 1.5)))
        assert log_bessel_i(2, 1.5) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("key", sorted(LOG_BESSEL_REF))
    def test_frozen_values(self, key):
        m, x = key
        assert log_bessel_i(m, x) == pytest.approx(LOG_BESSEL_REF[key], rel=1e-12, abs=1e-12)

    def test_rejects_negative_argument(self):
        with pytest.raises(ValueError):
            log_bessel_i(1, -0.5)

    def test_vectorized(self):
        out = log_bessel_i(np.array([0, 1, 2]), np.array([1.0, 1.0, 1.0]))
        assert out.shape == (3,)
        assert out[0] > out[1] > out[2]

    @given(st.integers(1, 20), st.floats(0.5, 100.0))
    def test_recurrence(self, m, x):
        lo = math.exp(log_bessel_i(m - 1, x) - log_bessel_i(m, x))
        hi = math.exp(log_bessel_i(m + 1, x) - log_bessel_i(m, x))
        # I_{m-1} - I_{m+1} = (2m/x) I_m, divided through by I_m
        assert lo - hi == pytest.approx(2 * m / x, rel=1e-9)


def mp_log(v):
    import mpmath
    return mpmath.log(v)


class TestSkellam:
    def test_zero_second_mean_is_poisson(self):
        dist = SkellamDist(5.0, 0.0)
        ms = np.arange(-5, 30)
        ref = [math.exp(-5) * 5.0 ** int(m) / math.factorial(int(m)) if m >= 0 else 0.0 for m in ms]
        assert np.allclose(skellam_pmf(ms, dist), ref, rtol=1e-12, atol=0)
        assert np.all(skellam_pmf(np.arange(-10, 0), dist) == 0.0)

    def test_zero_first_mean_is_negated_poisson(self):
        dist = SkellamDist(0.0, 3.0)
        assert skellam_pmf(-2, dist) == pytest.approx(math.exp(-3) * 9 / 2, rel=1e-12)
        assert skellam_pmf(1, dist) == 0.0

    def test_both_zero_is_point_mass(self):
        dist = SkellamDist(0.0, 0.0)
        assert skellam_pmf(0, dist) == 1.0
        assert skellam_pmf(1, dist) == 0.0

    def test_equal_means_at_zero(self):
        assert skellam_pmf(0, SkellamDist(1.0, 1.0)) == pytest.approx(0.30850832255367104, abs=1e-14)
        assert skellam_pmf(0, SkellamDist(1.0, 1.0)) == pytest.approx(
            poisson_difference_pmf(0, 1.0, 1.0), abs=1e-15)

    @pytest.mark.parametrize("key", sorted(SKELLAM_REF))
    def test_frozen_values(self, key):
        m, l1, l2 = key
        assert skellam_pmf(m, SkellamDist(l1, l2)) == pytest.approx(SKELLAM_REF[key], rel=1e-10)

    def test_large_means_do_not_overflow(self):
        dist = SkellamDist(1500.0, 1400.0)
        ms = np.arange(-800, 1000)
        p = skellam_pmf(ms, dist)
        assert np.all(np.isfinite(p))
        assert p.sum() == pytest.approx(1.0, abs=1e-9)

    @given(st.integers(-40, 40), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_symmetry(self, m, l1, l2):
        assert skellam_pmf(m, SkellamDist(l1, l2)) == pytest.approx(
            skellam_pmf(-m, SkellamDist(l2, l1)), rel=1e-12, abs=1e-300)

    @given(st.integers(-60, 60), st.floats(0.0, 20.0), st.floats(0.0, 20.0))
    def test_matches_poisson_difference(self, m, l1, l2):
        assert skellam_pmf(m, SkellamDist(l1, l2)) == pytest.approx(
            poisson_difference_pmf(m, l1, l2), abs=1e-10)

    @pytest.mark.parametrize("l1", [0.1, 1.0, 10.0, 100.0])
    @pytest.mark.parametrize("l2", [0.1, 1.0, 10.0, 100.0])
    def test_twelve_sigma_window_holds_the_mass(self, l1, l2):
        mu, sigma = l1 - l2, math.sqrt(l1 + l2)
        # integer window rounded outward
        ms = np.arange(math.floor(mu - 12 * sigma), math.ceil(mu + 12 * sigma) + 1)
        total = float(np.sum(skellam_pmf(ms, SkellamDist(l1, l2))))
        assert 1 - 1e-9 <= total <= 1 + 1e-12


class TestSkellamTails:
    def test_cdf_below_nonnegative_support(self):
        assert skellam_cdf(-1, SkellamDist(5.0, 0.0)) == 0.0

    def test_cdf_far_right(self):
        assert skellam_cdf(10**6, SkellamDist(3.0, 2.0)) == pytest.approx(1.0, abs=1e-12)

    def test_cdf_matches_double_sum(self):
        assert skellam_cdf(0, SkellamDist(2.0, 2.0)) == pytest.approx(
            poisson_difference_cdf(0, 2.0, 2.0), abs=1e-10)

    def test_sf_keeps_tiny_upper_tails(self):
        dist = SkellamDist(5.0, 5.0)
        lo, hi = dist.support_window()
        m = hi - 4
        tail = sum(poisson_difference_pmf(k, 5.0, 5.0) for k in range(m + 1, hi + 60))
        assert tail < 1e-12
        assert skellam_sf(m, dist) == pytest.approx(tail, rel=1e-6)
        assert skellam_sf(hi, dist) == 0.0
        assert skellam_cdf(lo - 1, dist) == 0.0

    @given(st.floats(0.0, 200.0), st.floats(0.0, 200.0))
    def test_monotone_and_complementary(self, l1, l2):
        dist = SkellamDist(l1, l2)
        ms = np.arange(int(l1 - l2) - 80, int(l1 - l2) + 80)
        cdf = skellam_cdf(ms, dist)
        sf = skellam_sf(ms, dist)
        assert np.all(np.diff(cdf) >= -1e-15)
        assert np.allclose(cdf + sf, 1.0, atol=1e-9)

    def test_invalid_means(self):
        with pytest.raises(ValueError):
            SkellamDist(-1.0, 2.0)
        with pytest.raises(ValueError):
            SkellamDist(1.0, math.nan)


class TestSemiInfinite:
    @pytest.mark.parametrize("tol", [1e-6, 1e-9])
    def test_lorentzian(self, tol):
        assert integrate_semi_infinite(lambda z: 1 / (1 + z * z), SMOOTH, tol) == pytest.approx(
            math.pi / 2, abs=max(tol, 1e-10))

    @pytest.mark.parametrize("tol", [1e-6, 1e-9])
    def test_dirichlet(self, tol):
        assert integrate_semi_infinite(lambda z: 1.0, OSC_SIN, tol) == pytest.approx(math.pi / 2, abs=tol)

    @pytest.mark.parametrize("tol", [1e-6, 1e-9])
    def test_damped_cosine(self, tol):
        assert integrate_semi_infinite(lambda z: math.exp(-z), OSC_COS, tol) == pytest.approx(0.5, abs=tol)

    def test_inverse_sqrt_singularity(self):
        # int_0^inf cos z / sqrt(z) dz = sqrt(pi / 2)
        val = integrate_semi_infinite(lambda z: 1 / math.sqrt(z), OSC_COS, 1e-9)
        assert val == pytest.approx(math.sqrt(math.pi / 2), abs=1e-8)

    def test_panel_cap_reports_best_estimate(self):
        with pytest.raises(QuadratureError) as info:
            integrate_semi_infinite(lambda z: 1.0, OSC_SIN, 1e-12, max_panels=4)
        assert math.isfinite(info.value.estimate)
        assert info.value.error > 0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            integrate_semi_infinite(lambda z: 1.0, "trapezoid")


def test_subnormal_second_mean_is_poisson():
    dist = SkellamDist(1.0, 5e-324)
    assert skellam_pmf(1, dist) == pytest.approx(math.exp(-1), rel=1e-12)
    assert skellam_pmf(2, dist) == pytest.approx(math.exp(-1) / 2, rel=1e-12)
    assert skellam_cdf(60, dist) == pytest.approx(1.0, abs=1e-12)

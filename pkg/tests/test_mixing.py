import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad, trapezoid
from scipy.special import gammaln

from smnreg import (
    GammaMixing,
    InvalidParameterError,
    PointMass,
    QuadratureError,
    SamplingError,
    TabulatedMixing,
)


def gamma_tab(shape, rate, lo=1e-4, hi=80.0, num=4000):
    """Tabulated mirror of a Gamma(shape, rate) density on a log grid."""
    grid = np.geomspace(lo, hi, num)
    vals = stats.gamma.pdf(grid, a=shape, scale=1.0 / rate)
    return TabulatedMixing(grid, vals / trapezoid(vals, grid))


class TestMoment:
    def test_pointmass_degenerate(self):
        assert PointMass(1.0).moment(7.0).value == 1.0

    def test_gamma_closed_form(self):
        # Gamma(1.5, 1.5), k=2 -> (2.5 * 1.5) / 1.5^2 = 5/3.
        mom = GammaMixing(1.5, 1.5).moment(2.0)
        assert mom.value == pytest.approx(5.0 / 3.0, rel=1e-12)
        assert mom.method == "closed-form"

    def test_gamma_heavy_left_tail_half_moment(self):
        h = GammaMixing(0.25, 0.25)
        # Quadrature oracle for Gamma(0.75)/(Gamma(0.25) * 0.25^0.5).
        expect, _ = quad(
            lambda u: u**0.5 * stats.gamma.pdf(u, a=0.25, scale=4.0), 0, np.inf
        )
        assert h.moment(0.5).value == pytest.approx(expect, rel=1e-9)
        assert h.moment(0.5).finite

    def test_tabulated_matches_gamma(self):
        tab = gamma_tab(2.0, 2.0)
        exact = GammaMixing(2.0, 2.0)
        for k in (0.0, 1.0, 2.5):
            assert tab.moment(k).value == pytest.approx(exact.moment(k).value, rel=1e-3)
            assert tab.moment(k).method == "quadrature"

    def test_tabulated_divergent_tail(self):
        # Density ~ u^{-3.5} for u >= 1; moment of order d/2 + 2 = 3 diverges (d=2).
        grid = np.geomspace(1.0, 400.0, 3000)
        vals = 2.5 * grid**-3.5
        tab = TabulatedMixing(grid, vals / trapezoid(vals, grid))
        assert not tab.moment(3.0).finite
        assert tab.moment(1.0).finite

    def test_log_convexity_in_order(self):
        # Lyapunov: m_{(j+k)/2}^2 <= m_j m_k.
        for h in (GammaMixing(0.7, 1.3), PointMass(2.0), gamma_tab(2.0, 2.0)):
            for j, k in [(0.5, 2.5), (1.0, 3.0), (0.0, 4.0)]:
                mid = h.moment(0.5 * (j + k)).value
                assert mid**2 <= h.moment(j).value * h.moment(k).value * (1 + 1e-9)


class TestSampleConditional:
    def test_pointmass(self, rng):
        assert PointMass(1.0).sample_conditional(3.2, 4, rng) == 1.0

    def test_gamma_conjugacy_d2(self, rng):
        # Gamma(2,2), d=2, delta=0 -> Gamma(3,2), mean 1.5.
        draws = GammaMixing(2.0, 2.0).sample_conditional(0.0, 2, rng, size=100_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 1.5) < 3.0 * se

    def test_gamma_conjugacy_tilted(self, rng):
        # nu=5 (a=b=2.5), d=3, delta=4 -> Gamma(4, 4.5), mean 8/9.
        h = GammaMixing.student_t(5.0)
        draws = h.sample_conditional(4.0, 3, rng, size=100_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 8.0 / 9.0) < 3.0 * se

    def test_vector_delta(self, rng):
        h = GammaMixing(2.0, 2.0)
        deltas = np.array([0.0, 1.0, 5.0])
        draws = h.sample_conditional(deltas, 2, rng)
        assert draws.shape == deltas.shape
        assert np.all(draws > 0)

    def test_tabulated_matches_conditional_moments(self, rng):
        tab = gamma_tab(2.0, 2.0)
        exact = GammaMixing(2.0, 2.0)
        for delta, d in [(0.5, 1), (2.0, 3)]:
            draws = tab.sample_conditional(delta, d, rng, size=40_000)
            target = exact.conditional_moment(delta, d, 1.0).value
            se = draws.std(ddof=1) / math.sqrt(draws.size)
            assert abs(draws.mean() - target) < 4.0 * se + 2e-3

    def test_tabulated_nonintegrable_tilt(self, rng):
        grid = np.geomspace(1.0, 400.0, 3000)
        vals = 2.5 * grid**-3.5
        tab = TabulatedMixing(grid, vals / trapezoid(vals, grid))
        # Tilt u^{d/2} with d=6 produces a u^{-0.5} tail: not integrable.
        with pytest.raises(SamplingError):
            tab.sample_conditional(0.0, 6, rng)

    def test_negative_delta_rejected(self, rng):
        with pytest.raises(InvalidParameterError):
            GammaMixing(2.0, 2.0).sample_conditional(-1.0, 2, rng)


class TestConditionalMoment:
    def test_inverse_mean_formula(self):
        # nu=5, d=3, delta=2, r=-1 -> (nu + delta)/(nu + d - 2) = 7/6.
        h = GammaMixing.student_t(5.0)
        assert h.conditional_moment(2.0, 3, -1.0).value == pytest.approx(7.0 / 6.0, rel=1e-12)

    def test_pointmass(self):
        assert PointMass(1.0).conditional_moment(3.0, 2, -2.5).value == 1.0

    def test_gamma_second_moment(self):
        # Gamma(2,2), d=2, delta=0, r=2 -> Gamma(5)/Gamma(3)/4 = 3.
        assert GammaMixing(2.0, 2.0).conditional_moment(0.0, 2, 2.0).value == pytest.approx(3.0)

    def test_divergent_marker(self):
        # a + d/2 + r <= 0 diverges.
        val = GammaMixing(0.5, 1.0).conditional_moment(1.0, 1, -1.5)
        assert math.isinf(val.value)

    def test_covariance_inequality_on_grid(self):
        # E[u^2 | delta] <= m_{d/2+2} / m_{d/2} for every delta >= 0.
        for shape in (0.1, 0.5, 1.0, 2.5, 10.0):
            h = GammaMixing(shape, shape)
            for d in (1, 2, 3):
                bound = h.moment(0.5 * d + 2.0).value / h.moment(0.5 * d).value
                for delta in np.linspace(0.0, 25.0, 11):
                    assert h.conditional_moment(delta, d, 2.0).value <= bound * (1 + 1e-12)

    def test_tabulated_matches_gamma(self):
        tab = gamma_tab(2.0, 2.0)
        exact = GammaMixing(2.0, 2.0)
        got = tab.conditional_moment(1.5, 2, -1.0).value
        want = exact.conditional_moment(1.5, 2, -1.0).value
        assert got == pytest.approx(want, rel=1e-4)

    def test_sampler_matches_moments(self, rng):
        h = GammaMixing(1.3, 0.8)
        for delta in (0.0, 2.0):
            for d in (1, 3):
                draws = h.sample_conditional(delta, d, rng, size=50_000)
                for r in (1.0, 2.0):
                    target = h.conditional_moment(delta, d, r).value
                    vals = draws**r
                    se = vals.std(ddof=1) / math.sqrt(vals.size)
                    assert abs(vals.mean() - target) < 3.5 * se


class TestErrorLogdensity:
    def test_pointmass_standard_normal(self):
        assert PointMass(1.0).error_logdensity([0.0]) == pytest.approx(
            -0.5 * np.log(2 * np.pi), rel=1e-12
        )

    def test_student_t_normalizer(self):
        nu = 3.7
        h = GammaMixing.student_t(nu)
        expect = (
            gammaln(0.5 * (nu + 1)) - gammaln(0.5 * nu) - 0.5 * np.log(nu * np.pi)
        )
        assert h.error_logdensity([0.0]) == pytest.approx(expect, rel=1e-12)

    def test_matches_scipy_t(self):
        nu = 5.0
        h = GammaMixing.student_t(nu)
        for e in (0.0, 0.7, 2.3):
            assert h.error_logdensity([e]) == pytest.approx(
                stats.t.logpdf(e, df=nu), rel=1e-10
            )

    def test_tabulated_close_to_gamma(self):
        tab = gamma_tab(2.0, 2.0, num=6000)
        exact = GammaMixing(2.0, 2.0)
        for e in (0.0, 1.0, 3.0):
            assert tab.error_logdensity([e, 0.0]) == pytest.approx(
                exact.error_logdensity([e, 0.0]), abs=1e-4
            )

    def test_radial_symmetry(self, rng):
        h = GammaMixing(1.2, 2.2)
        v = rng.standard_normal(3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        assert h.error_logdensity(v) == pytest.approx(h.error_logdensity(q @ v), rel=1e-10)

    def test_divergent_at_zero_raises(self):
        grid = np.geomspace(1.0, 400.0, 3000)
        vals = 2.5 * grid**-3.5
        tab = TabulatedMixing(grid, vals / trapezoid(vals, grid))
        with pytest.raises(QuadratureError):
            tab.error_logdensity(np.zeros(6))


class TestTabulatedValidation:
    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidParameterError):
            TabulatedMixing([1.0, 2.0], [2.0, 2.0])

    def test_negative_values_rejected(self):
        with pytest.raises(InvalidParameterError):
            TabulatedMixing([1.0, 2.0], [2.0, -1.0])

    def test_unsorted_grid_rejected(self):
        with pytest.raises(InvalidParameterError):
            TabulatedMixing([2.0, 1.0], [1.0, 1.0])

    def test_csv_roundtrip(self, tmp_path, rng):
        tab = gamma_tab(2.0, 2.0, num=500)
        path = tmp_path / "h.csv"
        with open(path, "w") as fh:
            fh.write("u,h\n")
            for u, v in zip(tab.grid, tab.values):
                fh.write(f"{float(u)!r},{float(v)!r}\n")
        loaded = TabulatedMixing.from_csv(path)
        np.testing.assert_allclose(loaded.grid, tab.grid)
        np.testing.assert_allclose(loaded.values, tab.values)

    def test_csv_normalize(self, tmp_path):
        path = tmp_path / "h.csv"
        grid = np.linspace(1.0, 2.0, 50)
        with open(path, "w") as fh:
            for u in grid:
                fh.write(f"{float(u)!r},2.0\n")
        loaded = TabulatedMixing.from_csv(path, normalize=True)
        assert trapezoid(loaded.values, loaded.grid) == pytest.approx(1.0, abs=1e-12)


class TestMarginalSampling:
    def test_gamma_marginal(self, rng):
        h = GammaMixing(2.0, 3.0)
        draws = h.sample(rng, size=50_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 2.0 / 3.0) < 3.0 * se

    def test_pointmass_marginal(self, rng):
        assert PointMass(0.7).sample(rng) == 0.7

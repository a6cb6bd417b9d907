"""Tests for the Fourier deconvolution kernel estimator."""

import numpy as np
import pytest
from scipy.integrate import quad

from voldens.errors import DataError, ParameterError
from voldens.kerneldeconv import (KernelSpec, check_gamma_constraint, deconv_kernel,
                                  deconv_kernel_table, default_bandwidth,
                                  estimate_density, wand_charfn, wand_kernel)
from voldens.metrics import PureConvolution, mise
from voldens.grids import DensityGrid
from voldens.svsim import OuParams, ScenarioConfig, simulate_scenario


class TestWandKernel:
    def test_value_at_zero(self):
        # (1/2pi) int_{-1}^{1} (1-t^2)^3 dt = 16/(35 pi)
        assert wand_kernel(0.0) == pytest.approx(16.0 / (35.0 * np.pi), abs=1e-15)

    def test_symmetry(self):
        xs = np.array([0.1, 0.3, 0.49, 0.51, 1.7, 6.0, 25.0])
        np.testing.assert_array_equal(wand_kernel(xs), wand_kernel(-xs))

    def test_series_matches_closed_form_at_switch(self):
        # both branches are accurate near the switch point |x| = 0.5
        for x in (0.45, 0.5, 0.55, 0.6):
            closed = (48 * x * (x * x - 15) * np.cos(x)
                      - 144 * (2 * x * x - 5) * np.sin(x)) / (np.pi * x ** 7)
            assert wand_kernel(x) == pytest.approx(closed, abs=5e-12)

    def test_matches_fourier_inversion(self):
        # w is the inverse transform of its characteristic function
        for x in (0.2, 1.0, 3.3):
            val, _ = quad(lambda t: (1 - t * t) ** 3 * np.cos(t * x), 0, 1,
                          epsabs=1e-13)
            assert wand_kernel(x) == pytest.approx(val / np.pi, abs=1e-12)


class TestWandCharFn:
    def test_at_zero_and_support(self):
        assert wand_charfn(0.0) == 1.0
        assert wand_charfn(1.0) == 0.0
        assert wand_charfn(1.0001) == 0.0
        assert wand_charfn(-2.0) == 0.0

    def test_boundary_exponent(self):
        # phi_w(1-s) = 8 s^3 (1 + o(1)): exponent rho = 3, constant A = 8
        s = 1e-3
        assert wand_charfn(1 - s) / s ** 3 == pytest.approx(8.0, rel=0.01)

    def test_second_derivative_at_zero(self):
        # -phi_w''(0) = 6 = int u^2 w(u) du
        h = 1e-4
        d2 = (wand_charfn(h) - 2 * wand_charfn(0.0) + wand_charfn(-h)) / h ** 2
        assert d2 == pytest.approx(-6.0, abs=1e-5)


class TestDeconvKernel:
    def test_no_noise_hook_reduces_to_wand(self):
        hook = lambda t: np.ones_like(np.asarray(t, dtype=float)) + 0j
        xs = np.array([-2.0, -0.4, 0.0, 1.3, 5.0])
        np.testing.assert_allclose(deconv_kernel(xs, 0.5, inv_noise_cf=hook),
                                   wand_kernel(xs), atol=1e-10)

    def test_table_matches_direct_quadrature(self):
        # two independent numerical routes within 1e-6 on a 512-point grid
        h = 0.4
        table = deconv_kernel_table(h, 30.0)
        xs = np.linspace(-25, 25, 512)
        sample = xs[::16]  # quadrature oracle is slow per point
        np.testing.assert_allclose(table(sample), deconv_kernel(sample, h), atol=1e-6)

    def test_asymmetry_of_the_deconvolution_kernel(self):
        # the noise characteristic function is complex (the noise has nonzero
        # mean and skew), so v_h is real but NOT even; both evaluation routes
        # must agree on that
        h = 0.4
        v_plus = deconv_kernel(1.0, h)
        v_minus = deconv_kernel(-1.0, h)
        assert v_plus == pytest.approx(0.3346384, abs=1e-5)
        assert v_minus == pytest.approx(0.3677208, abs=1e-5)
        table = deconv_kernel_table(h, 16.0)
        assert table(1.0) == pytest.approx(v_plus, abs=1e-7)
        assert table(-1.0) == pytest.approx(v_minus, abs=1e-7)

    def test_bandwidth_validation(self):
        with pytest.raises(ParameterError):
            deconv_kernel(0.0, -0.1)
        with pytest.raises(ParameterError):
            deconv_kernel_table(1e-4, 10.0)


class TestEstimateDensity:
    def test_single_observation_is_one_kernel_term(self):
        y = np.array([1.3])
        h = 0.6
        grid = np.linspace(-2, 4, 41)
        rep = estimate_density(y, KernelSpec(bandwidth=h), grid)
        # same argument-range request as the estimator makes internally, so the
        # cached table is shared and the identity is exact
        arg_half = max(abs(grid[0] - y.max()), abs(grid[-1] - y.min())) / h + 8.0
        table = deconv_kernel_table(h, arg_half)
        np.testing.assert_array_equal(rep.density.values, table((grid - 1.3) / h) / h)

    def test_shift_equivariance(self):
        # exact as a change of variables; float addition leaves ~1e-16 residue
        rng = np.random.default_rng(5)
        y = rng.normal(size=200)
        c = 2.5
        grid = np.linspace(-3, 3, 101)
        a = estimate_density(y, KernelSpec(bandwidth=0.5), grid)
        b = estimate_density(y + c, KernelSpec(bandwidth=0.5), grid + c)
        np.testing.assert_allclose(a.density.values, b.density.values,
                                   rtol=1e-10, atol=1e-12)

    def test_linearity_over_concatenation(self):
        rng = np.random.default_rng(8)
        y1, y2 = rng.normal(size=150), rng.normal(size=50)
        grid = np.linspace(-4, 4, 64)
        spec = KernelSpec(bandwidth=0.45)
        est1 = estimate_density(y1, spec, grid).density.values
        est2 = estimate_density(y2, spec, grid).density.values
        both = estimate_density(np.concatenate([y1, y2]), spec, grid).density.values
        np.testing.assert_allclose(both, (150 * est1 + 50 * est2) / 200, rtol=1e-12)

    def test_default_grid_covers_sample_range_plus_padding(self):
        y = np.array([-3.0, 0.0, 4.0])
        rep = estimate_density(y, KernelSpec(bandwidth=0.5))
        lo, hi = rep.density.span
        assert lo == pytest.approx(-3.0 - 1.5) and hi == pytest.approx(4.0 + 1.5)
        assert rep.diagnostics["grid_span"] == (lo, hi)

    def test_empty_series_rejected(self):
        with pytest.raises(DataError):
            estimate_density(np.array([]), KernelSpec(bandwidth=0.5))

    def test_negative_values_allowed_and_clipping_optional(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=400)
        grid = np.linspace(-6, 6, 201)
        raw = estimate_density(y, KernelSpec(bandwidth=0.3), grid)
        assert raw.density.signed and np.any(raw.density.values < 0)
        clipped = estimate_density(y, KernelSpec(bandwidth=0.3, clip_negative=True),
                                   grid)
        assert np.all(clipped.density.values >= 0)
        assert clipped.density.integral() == pytest.approx(1.0, abs=1e-9)

    def test_observation_series_input_carries_zero_count(self):
        from voldens.svsim import ObservationSeries
        series = ObservationSeries(np.array([0.0, 1.0, 1.0, 1.5]), delta=1.0)
        rep = estimate_density(series, KernelSpec(bandwidth=5.0))
        assert rep.diagnostics["zero_increment_count"] == 1

    def test_expectation_matches_quadrature_oracle(self):
        # E f_nh(0) = (1/2pi) int phi_w(th) e^{-t^2/2} dt for xi ~ N(0,1):
        # the independent route that pins the estimator's exact bias
        h = 0.75
        target, _ = quad(lambda t: (1 - (t * h) ** 2) ** 3 * np.exp(-t * t / 2)
                         / (2 * np.pi), -1 / h, 1 / h, epsabs=1e-13)
        assert target == pytest.approx(0.1769383070334627, abs=1e-12)
        vals = []
        for rep in range(60):
            pc = PureConvolution(0.0, 1.0, 2000, seed=41000 + rep)
            est = estimate_density(pc.draw(), KernelSpec(bandwidth=h),
                                   np.array([-1.0, 0.0, 1.0]))
            vals.append(est.density.values[1])
        vals = np.array(vals)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - target) < 4 * se


class TestBandwidthRule:
    def test_formula(self):
        n = round(np.e ** 10)
        assert default_bandwidth(n, 5.0) == pytest.approx(5 * np.pi / 10, rel=1e-4)

    def test_monotone_decreasing(self):
        hs = [default_bandwidth(n, 1.0) for n in (10, 100, 1000, 10_000)]
        assert all(a > b for a, b in zip(hs, hs[1:]))

    def test_small_n_rejected(self):
        with pytest.raises(ParameterError):
            default_bandwidth(2, 1.0)

    def test_gamma_constraint_warning(self):
        # Delta = n^{-delta_exp}: at n = 1e4, Delta = 0.01 gives delta_exp = 0.5,
        # so gamma must exceed 8
        with pytest.warns(UserWarning):
            assert not check_gamma_constraint(10_000, 0.01, 5.0)
        assert check_gamma_constraint(10_000, 0.01, 9.0)
        with pytest.warns(UserWarning):
            assert not check_gamma_constraint(10_000, 1.5, 100.0)


class TestVarianceDecay:
    def test_pointwise_variance_shrinks_with_n(self):
        # the variance bound is exercised empirically: replicated values of
        # f_nh(0) spread less at larger n for fixed h
        h = 0.6
        spreads = {}
        for n in (500, 4000):
            vals = []
            for rep in range(40):
                pc = PureConvolution(0.0, 1.0, n, seed=52000 + rep)
                est = estimate_density(pc.draw(), KernelSpec(bandwidth=h),
                                       np.array([-1.0, 0.0, 1.0]))
                vals.append(est.density.values[1])
            spreads[n] = np.var(vals, ddof=1)
        assert spreads[4000] < spreads[500]
        # i.i.d. averaging scales variance like 1/n; allow wide MC slack
        assert spreads[4000] < 0.4 * spreads[500]


class TestConsistencyProperty:
    def test_l2_error_decreases_with_n_on_ou_scenario(self):
        grid = np.linspace(-6, 6, 512)
        truth = DensityGrid(grid, np.exp(-grid ** 2 / 2) / np.sqrt(2 * np.pi),
                            signed=False)
        wins = 0
        for rep in range(20):
            errs = {}
            for n in (1000, 10_000):
                sc = ScenarioConfig("ou-exp", OuParams(0.5, 0.0, 1.0), delta=0.05,
                                    n=n, substeps=16, vol_seed=100 + 2 * rep,
                                    price_seed=101 + 2 * rep)
                series, _ = simulate_scenario(sc)
                h = default_bandwidth(n, 1.0)
                est = estimate_density(series.log_squared, KernelSpec(bandwidth=h),
                                       grid)
                errs[n] = mise(est.density, truth)
            wins += errs[10_000] < errs[1000]
        assert wins >= 16  # >= 80% of 20 seeded replications

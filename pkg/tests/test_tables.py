"""Tests for the shared table/FFT infrastructure."""

import numpy as np
import pytest
from scipy.integrate import quad

from voldens._tables import (Table1D, _osc_moments, fourier_table, lattice_means,
                             range_bucket)
from voldens.errors import NumericsError


class TestTable1D:
    def test_interpolates_nodes_exactly(self):
        x0, dx = -2.0, 0.1
        vals = np.sin(x0 + dx * np.arange(64))
        table = Table1D(x0, dx, vals)
        np.testing.assert_allclose(table(table.grid()), vals, atol=1e-14)

    def test_cubic_accuracy_on_smooth_function(self):
        x0, dx = -4.0, 0.02
        grid = x0 + dx * np.arange(401)
        table = Table1D(x0, dx, np.exp(-grid ** 2))
        probe = np.linspace(-3.5, 3.5, 500)
        np.testing.assert_allclose(table(probe), np.exp(-probe ** 2), atol=2e-8)

    def test_outside_range_is_zero(self):
        table = Table1D(0.0, 0.5, np.ones(16))
        assert table(-1.0) == 0.0
        assert table(100.0) == 0.0

    def test_scalar_and_array_calls(self):
        table = Table1D(0.0, 0.5, np.arange(16, dtype=float))
        assert isinstance(table(1.0), float)
        assert table(np.array([1.0, 2.0])).shape == (2,)


class TestOscMoments:
    @pytest.mark.parametrize("theta", [0.01, 0.3, 0.5, 2.0, 41.7])
    def test_against_quadrature(self, theta):
        mom = _osc_moments(np.array([theta]), kmax=3)
        for k in range(4):
            re, _ = quad(lambda s: s ** k * np.cos(theta * s), -1, 1, epsabs=1e-14)
            im, _ = quad(lambda s: s ** k * np.sin(theta * s), -1, 1, epsabs=1e-14)
            assert mom[k, 0] == pytest.approx(re + 1j * im, abs=1e-12)


class TestFourierTable:
    def test_gaussian_spectrum_roundtrip(self):
        # q(s) = exp(-s^2/2) on a wide support: G is the standard normal pdf
        table = fourier_table(lambda s: np.exp(-s * s / 2) + 0j, s_max=12.0,
                              dx=0.01, x_half=8.0)
        xs = np.linspace(-5, 5, 41)
        np.testing.assert_allclose(table(xs), np.exp(-xs ** 2 / 2) / np.sqrt(2 * np.pi),
                                   atol=1e-10)

    def test_dx_exact_mode_pins_step(self):
        table = fourier_table(lambda s: np.exp(-s * s / 2) + 0j, s_max=12.0,
                              dx=0.015625, x_half=8.0, dx_exact=True)
        assert table.dx == 0.015625

    def test_edge_correction_handles_jump_spectrum(self):
        # q = 1 on [-pi, pi]: G(x) = sin(pi x)/(pi x), whose 1/x Gibbs tails a
        # bare trapezoid-FFT aliases badly
        edges = (1.0 + 0j, 0.0 + 0j, 1.0 + 0j, 0.0 + 0j)
        table = fourier_table(lambda s: np.ones_like(s) + 0j, s_max=np.pi,
                              dx=0.01, x_half=50.0, edge_derivatives=edges)
        xs = np.array([-20.3, -4.0, -0.5, 0.0, 0.5, 1.0, 7.7, 40.1])
        np.testing.assert_allclose(table(xs), np.sinc(xs), atol=1e-8)

    def test_non_hermitian_spectrum_rejected(self):
        with pytest.raises(NumericsError):
            fourier_table(lambda s: np.exp(-((s - 0.5) ** 2)) + 0j, s_max=6.0,
                          dx=0.02, x_half=8.0)


class TestLatticeMeans:
    def test_dense_and_fft_paths_agree(self):
        rng = np.random.default_rng(0)
        grid = -50.0 + 0.0125 * np.arange(8001)
        table = Table1D(-50.0, 0.0125, np.exp(-(grid / 8.0) ** 2) * np.cos(grid))
        pts = rng.normal(0.0, 5.0, 300)
        dense = lattice_means(pts, table, step=1.0, j_lo=-20, j_hi=20, stride=80,
                              dense_threshold=10 ** 9)
        fft = lattice_means(pts, table, step=1.0, j_lo=-20, j_hi=20, stride=80,
                            dense_threshold=1)
        np.testing.assert_allclose(fft, dense, rtol=1e-10, atol=1e-13)

    def test_matches_pointwise_definition(self):
        grid = -10.0 + 0.01 * np.arange(2001)
        table = Table1D(-10.0, 0.01, np.sin(grid) * np.exp(-np.abs(grid)))
        pts = np.array([0.3, -1.2, 4.4])
        out = lattice_means(pts, table, step=0.5, j_lo=-3, j_hi=3, stride=50)
        expect = [np.mean(table(pts - 0.5 * j)) for j in range(-3, 4)]
        np.testing.assert_allclose(out, expect, rtol=1e-12)

    def test_step_misaligned_with_table_rejected(self):
        table = Table1D(0.0, 0.1, np.ones(32))
        with pytest.raises(ValueError):
            lattice_means(np.array([1.0]), table, step=0.35, j_lo=0, j_hi=1,
                          stride=3)


def test_range_bucket():
    assert range_bucket(10.0) == 64.0
    assert range_bucket(513.0) == 1024.0
    assert range_bucket(512.0) == 512.0

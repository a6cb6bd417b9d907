"""Shared numerical infrastructure for the Fourier-domain estimators.

Every estimator in this package evaluates some inverse Fourier transform of a
compactly supported spectrum at a large number of points.  The hot path is
always the same: tabulate the transform once on a fine uniform grid by FFT,
then interpolate.  Interpolation is a local 4-point cubic, which is linear in
the table values; that linearity is what allows the batched coefficient
engine (`lattice_means`) to reassociate per-point interpolation into a single
convolution without changing the result beyond float rounding.

Direct adaptive quadrature implementations live next to each estimator and
serve as independent oracles for these tables in the test suite.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .errors import NumericsError

# Relative imaginary residue above which an "is real" inverse transform is
# considered broken (a bug or overflow regime, never a data property).
IMAG_RESIDUE_RTOL = 1e-8


class Table1D:
    """Uniform-grid samples with local cubic (4-point Lagrange) interpolation.

    Evaluation outside the tabulated range returns 0; callers are expected to
    size the range so that the tabulated function has decayed there.
    """

    __slots__ = ("x0", "dx", "values")

    def __init__(self, x0: float, dx: float, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 8:
            raise ValueError("table needs a 1-d array of at least 8 samples")
        # two guard zeros each side so the 4-point stencil never runs off the end
        self.values = np.concatenate([[0.0, 0.0], values, [0.0, 0.0]])
        self.x0 = float(x0) - 2.0 * dx
        self.dx = float(dx)

    @property
    def x_min(self) -> float:
        return self.x0 + 2 * self.dx

    @property
    def x_max(self) -> float:
        return self.x0 + (self.values.size - 3) * self.dx

    def grid(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.values.size - 4)

    def raw(self) -> np.ndarray:
        return self.values[2:-2]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        pos = (x - self.x0) / self.dx
        idx = np.floor(pos).astype(np.int64)
        inside = (idx >= 1) & (idx <= self.values.size - 3)
        idx_c = np.clip(idx, 1, self.values.size - 3)
        t = pos - idx
        w_m1, w_0, w_1, w_2 = _cubic_weights(t)
        v = self.values
        out = (w_m1 * v[idx_c - 1] + w_0 * v[idx_c] + w_1 * v[idx_c + 1] + w_2 * v[idx_c + 2])
        out = np.where(inside, out, 0.0)
        return float(out[0]) if scalar else out


def _cubic_weights(t):
    """Lagrange cubic weights for nodes {-1, 0, 1, 2} at offset t in [0, 1)."""
    w_m1 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w_0 = (t * t - 1.0) * (t - 2.0) / 2.0
    w_1 = -t * (t + 1.0) * (t - 2.0) / 2.0
    w_2 = t * (t * t - 1.0) / 6.0
    return w_m1, w_0, w_1, w_2


def _next_pow2(n: int) -> int:
    m = 1
    while m < n:
        m *= 2
    return m


def range_bucket(x_half: float, granularity: float = 512.0, floor: float = 64.0) -> float:
    """Round a requested table range up to a coarse bucket (improves cache reuse).

    Powers of two up to the granularity, multiples of the granularity above it:
    small tables stay small, large ones don't double wastefully.
    """
    x = max(float(x_half), floor)
    if x <= granularity:
        return float(2.0 ** np.ceil(np.log2(x)))
    return float(granularity * np.ceil(x / granularity))


def fourier_table(
    spectrum: Callable[[np.ndarray], np.ndarray],
    s_max: float,
    dx: float,
    x_half: float,
    oversample: float = 2.0,
    min_spectrum_samples: int = 4096,
    edge_derivatives: tuple[complex, complex, complex, complex] | None = None,
    dx_exact: bool = False,
    imag_rtol: float = IMAG_RESIDUE_RTOL,
) -> Table1D:
    """Tabulate G(x) = (1/2pi) * int_{-s_max}^{s_max} q(s) e^{isx} ds by FFT.

    The spectrum q must be Hermitian (q(-s) = conj(q(s))) so that G is real;
    the imaginary residue of the transform is checked against `imag_rtol` and
    a violation raises NumericsError.

    For spectra that vanish (with a couple of derivatives) at +-s_max the
    plain trapezoid-FFT is accurate: the transform decays fast enough that
    periodic images are negligible at `oversample` times the requested range.
    Spectra with nonzero boundary values produce 1/x Gibbs tails; for those,
    pass `edge_derivatives` = (q(a), q'(a), q(b), q'(b)) with a = -s_max,
    b = s_max.  A cubic Hermite bridge matching those values is removed
    before the FFT and its transform added back in closed form, which leaves
    a remainder decaying like 1/x^3.

    With `dx_exact` the output grid step is exactly the requested dx (the
    lattice coefficient engine needs table steps that divide its shifts); the
    frequency lattice then no longer hits +-s_max exactly, which is harmless
    precisely when the (bridge-corrected) spectrum vanishes with its first
    derivative at the support edge: the unsampled sliver contributes O(ds^3).
    """
    if s_max <= 0 or dx <= 0 or x_half <= 0:
        raise ValueError("s_max, dx and x_half must be positive")
    ds_alias = np.pi / (oversample * x_half)
    ds_resolve = 2.0 * s_max / min_spectrum_samples
    ds_needed = min(ds_alias, ds_resolve)
    if dx_exact:
        m = _next_pow2(int(np.ceil(2.0 * np.pi / (ds_needed * dx))))
        ds = 2.0 * np.pi / (m * dx)
        n_half = int(np.floor(s_max / ds * (1.0 + 1e-12)))
        dx_eff = dx
    else:
        n_half = int(np.ceil(s_max / ds_needed))
        ds = s_max / n_half
        m = _next_pow2(int(np.ceil(2.0 * np.pi / (ds * dx))))
        dx_eff = 2.0 * np.pi / (m * ds)
    half = m // 2
    if n_half >= half:
        raise ValueError("spectrum grid does not fit the FFT size; increase dx or reduce x_half")

    j = np.arange(m)
    s = (j - half) * ds
    q = np.zeros(m, dtype=complex)
    band = slice(half - n_half, half + n_half + 1)
    q[band] = spectrum(s[band])

    if edge_derivatives is not None:
        qa, dqa, qb, dqb = edge_derivatives
        bridge = _hermite_bridge(-s_max, s_max, qa, dqa, qb, dqb)
        q[band] -= bridge(s[band])
    # trapezoid end weights (no-op when the band edges are zero; in dx_exact
    # mode the band ends strictly inside the support and the corrected
    # spectrum already vanishes there)
    if not dx_exact:
        q[half - n_half] *= 0.5
        q[half + n_half] *= 0.5

    signs = np.where(j % 2 == 0, 1.0, -1.0)
    spec_arr = signs * q
    transform = m * np.fft.ifft(spec_arr)
    g = (ds / (2.0 * np.pi)) * signs * transform

    k_half = int(np.floor(x_half / dx_eff))
    lo, hi = half - k_half, half + k_half + 1
    x0 = (lo - half) * dx_eff
    g_slice = g[lo:hi]

    if edge_derivatives is not None:
        x_slice = x0 + dx_eff * np.arange(g_slice.size)
        g_slice = g_slice + _bridge_transform(-s_max, s_max, qa, dqa, qb, dqb, x_slice)

    scale = np.max(np.abs(g_slice.real)) + 1e-300
    resid = np.max(np.abs(g_slice.imag))
    if resid > imag_rtol * scale + 1e-12:
        raise NumericsError(
            f"inverse transform expected real; imaginary residue {resid:.3e} "
            f"against magnitude {scale:.3e}"
        )
    return Table1D(x0, dx_eff, g_slice.real)


def _hermite_bridge(a, b, qa, dqa, qb, dqb):
    """Cubic through (a, qa) and (b, qb) with slopes dqa, dqb, as a callable."""
    beta = _bridge_coeffs(a, b, qa, dqa, qb, dqb)
    half_w = 0.5 * (b - a)
    mid = 0.5 * (a + b)

    def p(s):
        sigma = (np.asarray(s) - mid) / half_w
        return ((beta[3] * sigma + beta[2]) * sigma + beta[1]) * sigma + beta[0]

    return p


def _bridge_coeffs(a, b, qa, dqa, qb, dqb):
    """Coefficients of the Hermite cubic in the scaled variable sigma in [-1, 1]."""
    half_w = 0.5 * (b - a)
    # p(sigma) = b0 + b1 s + b2 s^2 + b3 s^3 with p(+-1), p'(+-1) prescribed
    va, vb = qa, qb
    da, db = dqa * half_w, dqb * half_w
    b0 = 0.5 * (va + vb) + 0.25 * (da - db)
    b1 = 0.75 * (vb - va) - 0.25 * (da + db)
    b2 = 0.25 * (db - da)
    b3 = 0.25 * (da + db) - 0.25 * (vb - va)
    return np.array([b0, b1, b2, b3], dtype=complex)


def _osc_moments(theta: np.ndarray, kmax: int = 3) -> np.ndarray:
    """M_k(theta) = int_{-1}^{1} sigma^k e^{i theta sigma} d sigma for k <= kmax.

    Returns array of shape (kmax+1, len(theta)).  Uses the upward recurrence
    for |theta| >= 0.5 and a Taylor series below it (the recurrence loses all
    accuracy near zero).
    """
    theta = np.asarray(theta, dtype=float)
    out = np.zeros((kmax + 1, theta.size), dtype=complex)
    big = np.abs(theta) >= 0.5
    th = theta[big]
    if th.size:
        it = 1j * th
        e_plus = np.exp(it)
        e_minus = np.exp(-it)
        m_prev = (e_plus - e_minus) / it
        out[0, big] = m_prev
        for k in range(1, kmax + 1):
            bnd = (e_plus - ((-1.0) ** k) * e_minus) / it
            m_prev = bnd - (k / it) * m_prev
            out[k, big] = m_prev
    sm = ~big
    th = theta[sm]
    if th.size:
        it = 1j * th
        for k in range(kmax + 1):
            acc = np.zeros(th.size, dtype=complex)
            term = np.ones(th.size, dtype=complex)
            for mth in range(0, 40):
                if (k + mth) % 2 == 0:
                    acc = acc + term * (2.0 / (k + mth + 1))
                term = term * it / (mth + 1)
            out[k, sm] = acc
    return out


def _bridge_transform(a, b, qa, dqa, qb, dqb, x: np.ndarray) -> np.ndarray:
    """(1/2pi) * int_a^b p(s) e^{isx} ds for the Hermite bridge p, in closed form."""
    beta = _bridge_coeffs(a, b, qa, dqa, qb, dqb)
    half_w = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    theta = half_w * np.asarray(x, dtype=float)
    mom = _osc_moments(theta, kmax=3)
    quadsum = np.zeros(theta.size, dtype=complex)
    for k in range(4):
        quadsum = quadsum + beta[k] * mom[k]
    phase = np.exp(1j * mid * np.asarray(x, dtype=float)) if mid != 0.0 else 1.0
    return (half_w / (2.0 * np.pi)) * phase * quadsum


def lattice_means(
    points: np.ndarray,
    table: Table1D,
    step: float,
    j_lo: int,
    j_hi: int,
    stride: int,
    dense_threshold: int = 2_000_000,
) -> np.ndarray:
    """c_j = mean_i table(points_i - j*step) for j in [j_lo, j_hi].

    Requires step = stride * table.dx exactly (callers build their tables
    that way), so that every shift lands on the table lattice.  With that
    alignment the per-point cubic interpolation weights are independent of j
    and the whole family of means collapses to one cross-correlation, which
    is evaluated by FFT when the direct product would be large.
    """
    points = np.asarray(points, dtype=float)
    n = points.size
    if n == 0:
        raise ValueError("no data points")
    if not np.isclose(step, stride * table.dx, rtol=1e-12, atol=0.0):
        raise ValueError("lattice step must equal stride * table.dx")
    j_count = j_hi - j_lo + 1
    if j_count <= 0:
        raise ValueError("empty shift range")

    if n * j_count <= dense_threshold:
        js = np.arange(j_lo, j_hi + 1)
        out = np.empty(j_count)
        chunk = max(1, dense_threshold // max(n, 1))
        for start in range(0, j_count, chunk):
            sel = js[start:start + chunk]
            args = points[None, :] - step * sel[:, None]
            out[start:start + chunk] = table(args.ravel()).reshape(sel.size, n).mean(axis=1)
        return out

    v = table.values
    pos = (points - table.x0) / table.dx
    idx = np.floor(pos).astype(np.int64)
    t = pos - idx
    w = np.stack(_cubic_weights(t), axis=0)  # (4, n), taps at idx-1..idx+2
    weights = np.zeros(v.size)
    for tap in range(4):
        tgt = idx + (tap - 1)
        ok = (tgt >= 0) & (tgt < v.size)  # off-table taps contribute zero
        np.add.at(weights, tgt[ok], w[tap][ok])
    # correlation R[s] = sum_m weights[m] v[m - s]; c_j = R[j*stride] / n
    corr = fftconvolve(weights, v[::-1])
    center = v.size - 1
    lags = stride * np.arange(j_lo, j_hi + 1)
    wanted = center + lags
    if wanted.min() < 0 or wanted.max() >= corr.size:
        raise ValueError("table does not cover the requested shift range")
    return corr[wanted] / n

"""Deconvolution Nadaraya-Watson estimator of the log-volatility autoregression.

The discrete-time model is X_t = sigma_t Z_t with

    log sigma_{t+1}^2 = m(log sigma_t^2) + eta_t,

eta i.i.d. centered Gaussian, under the stability condition
limsup_{|x| -> oo} |m(x)/x| < 1.  With Y_t = log X_t^2 the regression
function m is estimated by mimicking Nadaraya-Watson with the deconvoluting
kernel v_h of the kernel module:

    m_nh(x) = [ (1/(n h)) sum_j v_h((x - Y_j)/h) Y_{j+1} ] / f_nh(x),

where f_nh is the same-kernel density estimate over the first coordinates.
Because the response Y_{j+1} carries the known noise mean E log Z^2, the
estimator subtracts it by default so the quotient targets m itself rather
than m + E log Z^2 (see `regression_estimate`).

Near-zero denominators are masked rather than divided through: ratios
against a vanishing density estimate are unbounded noise, and masking is
the honest report.  Exactly (numerator = m_hat * denominator) holds at
every unmasked point, and the error decomposition
m_nh(x) - m(x) = p_nh(x) / f_nh(x) with

    p_nh(x) = (1/(n h)) sum_j v_h((x - Y_j)/h) (Y_{j+1} - m(x))

is algebra on the same shared kernel evaluations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DataError, ParameterError
from .kerneldeconv import deconv_kernel_table, _kernel_sum
from .svsim import ArParams, ObservationSeries, _rng

#: |x| probes for the numerical limsup |m(x)/x| < 1 stability check
STABILITY_PROBES = (1e2, 1e3, 1e4)
DENOMINATOR_FLOOR = 1e-4
#: E log Z^2 for standard normal Z: psi(1/2) + log 2 = -(euler_gamma + log 2).
#: The response Y_{j+1} carries this known constant; the estimator removes it
#: so that the quotient targets m itself (see `regression_estimate`).
NOISE_MEAN = -(np.euler_gamma + np.log(2.0))


@dataclass(frozen=True)
class ArScenario:
    """A nonlinear-AR log-volatility scenario.

    `params` names the regression function (linear or saturating tanh) and
    the innovation scale; `noise_correlation` is corr(eta_t, Z_t) for fixed
    t (0 by default: the fully independent volatility model; nonzero values
    give the predictable-volatility model class).
    """

    params: ArParams
    n: int
    seed: int = 7
    burn_in: int = 1000
    noise_correlation: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("need at least n = 2 observations")
        if self.burn_in < 0:
            raise ParameterError("burn-in must be >= 0")
        if not (-1.0 < self.noise_correlation < 1.0):
            raise ParameterError("noise correlation must be in (-1, 1)")
        m = self.params.regression()
        worst = max(abs(float(m(s * x)) / (s * x))
                    for x in STABILITY_PROBES for s in (-1.0, 1.0))
        if worst >= 1.0:
            raise ParameterError(
                f"regression violates the stability condition: |m(x)/x| reaches "
                f"{worst:.4f} on the probe set {STABILITY_PROBES}")

    def regression(self) -> Callable[[np.ndarray], np.ndarray]:
        return self.params.regression()


def simulate_nonlinear_ar(scenario: ArScenario) -> tuple[np.ndarray, np.ndarray]:
    """Simulate (Y_1..Y_n, xi_1..xi_n) from the autoregression.

    The chain is burned in from 0 for `burn_in` steps; the observation noise
    eps_t = log Z_t^2 comes from a second stream, with Z_t optionally
    correlated with the innovation eta_t at the same index.
    """
    p = scenario.params
    m = p.regression()
    rng_eta = _rng(scenario.seed)
    rng_z = _rng(scenario.seed + 1_000_003)

    total = scenario.burn_in + scenario.n
    eta_std = rng_eta.standard_normal(total)
    z_indep = rng_z.standard_normal(total)
    rho = scenario.noise_correlation
    # Z shares rho of the innovation's driving normal
    z = rho * eta_std + math.sqrt(1.0 - rho * rho) * z_indep

    xi = np.empty(scenario.n)
    x = 0.0
    for k in range(scenario.burn_in):
        x = float(m(x)) + p.innovation_sd * eta_std[k]
    for k in range(scenario.n):
        xi[k] = x
        x = float(m(x)) + p.innovation_sd * eta_std[scenario.burn_in + k]
    zz = z[scenario.burn_in:]
    y = xi + np.log(np.maximum(zz * zz, 1e-300))
    return y, xi


def default_regression_bandwidth(n: int, gamma: float) -> float:
    """h = gamma / log n; the variance theory wants gamma > pi (warned below)."""
    if n < 3:
        raise ParameterError("bandwidth rule needs n >= 3")
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    if gamma <= np.pi:
        warnings.warn(
            f"regression bandwidth constant gamma = {gamma:g} is not above pi; "
            f"the variance of the estimator is not guaranteed to vanish",
            stacklevel=2)
    return gamma / math.log(n)


@dataclass(eq=False)
class RegressionEstimate:
    """Pointwise regression estimate with its quotient structure exposed.

    m_hat = numerator / denominator wherever `mask` is False; masked points
    (|denominator| below the floor) carry NaN.
    """

    x: np.ndarray
    m_hat: np.ndarray
    denominator: np.ndarray
    numerator: np.ndarray
    mask: np.ndarray
    bandwidth: float
    floor: float
    diagnostics: dict = field(default_factory=dict)


def _as_y(y) -> np.ndarray:
    if isinstance(y, ObservationSeries):
        return y.log_squared
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise DataError("need a 1-d series")
    return arr


def regression_estimate(y, h: float, grid: np.ndarray,
                        floor: float = DENOMINATOR_FLOOR,
                        noise_mean: float = NOISE_MEAN) -> RegressionEstimate:
    """Deconvolution Nadaraya-Watson estimate of m on the grid.

    Uses the n-1 transition pairs (Y_j, Y_{j+1}); numerator and denominator
    share one tabulated v_h, so the quotient structure is exact.

    The response in the numerator is Y_{j+1} - noise_mean: the observed
    one-step-ahead value is m(xi_j) + eta_j + eps_{j+1}, and eps has the
    known nonzero mean E log Z^2 = -(euler_gamma + log 2).  Without removing
    it the quotient converges to m + E log Z^2 rather than m.  Pass
    noise_mean=0.0 for the raw uncorrected ratio.  Raises when every grid
    point is masked.
    """
    y_arr = _as_y(y)
    if y_arr.size < 2:
        raise DataError("regression needs at least two observations")
    if h <= 0:
        raise ParameterError("bandwidth must be positive")
    grid = np.asarray(grid, dtype=float)
    y_now = y_arr[:-1]
    y_next = y_arr[1:] - noise_mean

    arg_half = (max(abs(float(grid[0] - np.max(y_now))),
                    abs(float(grid[-1] - np.min(y_now)))) / h) + 8.0
    table = deconv_kernel_table(h, arg_half)
    denominator = _kernel_sum(y_now, table, grid, h)
    numerator = _kernel_sum(y_now, table, grid, h, weights=y_next)

    mask = np.abs(denominator) < floor
    if np.all(mask):
        raise DataError("density estimate below the floor everywhere; "
                        "no grid point admits a regression value")
    m_hat = np.full(grid.size, np.nan)
    m_hat[~mask] = numerator[~mask] / denominator[~mask]
    return RegressionEstimate(
        x=grid, m_hat=m_hat, denominator=denominator, numerator=numerator,
        mask=mask, bandwidth=h, floor=floor,
        diagnostics={"n_pairs": int(y_now.size), "masked_points": int(mask.sum()),
                     "noise_mean": noise_mean},
    )


def regression_residual_field(estimate: RegressionEstimate,
                              m: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """p_nh(x) = numerator - m(x) * denominator, the error-decomposition numerator.

    Satisfies m_hat(x) - m(x) = p_nh(x) / f_nh(x) at unmasked points exactly.
    """
    return estimate.numerator - m(estimate.x) * estimate.denominator

"""voldens: nonparametric volatility density estimation by deconvolution.

Estimate the invariant density of an unobserved stochastic volatility
process from discretely sampled asset prices.  Three density estimators
(Fourier-kernel, Meyer-wavelet, penalized sinc-projection) and a regression
estimator for nonlinear AR log-volatility, validated against built-in
stochastic-volatility simulators with known ground-truth densities.
"""

from .errors import (ConfigError, DataError, NumericsError, ParameterError,
                     VoldensError)
from .grids import CharFnTable, DensityGrid
from .kerneldeconv import (EstimateReport, KernelSpec, deconv_kernel,
                           default_bandwidth, estimate_density, wand_charfn,
                           wand_kernel)
from .metrics import (ExperimentSpec, PureConvolution, mise, mode_count,
                      normal_fit, run_experiment, scenario_preset)
from .noisemodel import (complex_log_gamma, inv_noise_charfn, noise_charfn,
                         noise_density)
from .ppe import (PpeConfig, PpeEstimate, contrast, penalty, phi_k_integral,
                  ppe_coefficients, select_and_estimate, sinc_basis, u_basis)
from .svsim import (ArParams, ObservationSeries, OuParams, RegimeSwitchParams,
                    ScenarioConfig, invariant_density, log_squared_transform,
                    simulate_markov2, simulate_ou, simulate_price,
                    simulate_scenario, simulate_volatility)
from .volreg import (ArScenario, RegressionEstimate, default_regression_bandwidth,
                     regression_estimate, simulate_nonlinear_ar)
from .waveletdeconv import (MeyerSpec, WaveletEstimate, meyer_scaling_fourier,
                            meyer_wavelet_fourier, sobolev_norm, u_m_function,
                            wavelet_coefficients, wavelet_estimate)

__version__ = "0.1.0"

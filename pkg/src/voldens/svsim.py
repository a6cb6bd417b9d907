"""Stochastic-volatility simulators and ground-truth invariant densities.

The simulated market is a log price dS_t = b_t dt + sigma_t dW_t, S_0 = 0,
observed on the grid 0, Delta, 2*Delta, ..., n*Delta.  The volatility factor
xi_t = log sigma_t^2 follows one of three models:

  * ou-exp             xi is an Ornstein-Uhlenbeck process,
  * regime-switch-exp  xi switches between two independent OU processes
                       driven by a two-state Markov chain,
  * nonlinear-ar       xi is a discrete-time nonlinear autoregression
                       (piecewise constant over each Delta interval).

The OU factor is sampled with its exact Gaussian transition (no
discretization bias in the ground truth); only the price integral uses
Euler-Maruyama, on a fine grid of `substeps` intervals per Delta.  Random
numbers come from counter-based Philox streams keyed separately for the
volatility and price noise, so a ScenarioConfig reproduces its output
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.signal import lfilter

from .errors import ConfigError, DataError, ParameterError
from .grids import DensityGrid

LOG_FLOOR_DEFAULT = 1e-300


# --------------------------------------------------------------------------- parameters

@dataclass(frozen=True)
class OuParams:
    """Ornstein-Uhlenbeck factor dX = -b (X - mu) dt + a dB.

    The stationary law is N(mu, a^2 / (2b)).  `x0` fixes the initial value;
    None means a stationary draw.
    """

    mean_reversion: float
    level: float = 0.0
    diffusion: float = 1.0
    x0: float | None = None

    def __post_init__(self):
        if self.mean_reversion <= 0:
            raise ParameterError("mean reversion rate must be positive")
        if self.diffusion <= 0:
            raise ParameterError("diffusion coefficient must be positive")

    @property
    def stationary_variance(self) -> float:
        return self.diffusion ** 2 / (2.0 * self.mean_reversion)


@dataclass(frozen=True)
class RegimeSwitchParams:
    """Two OU factors selected by a two-state Markov chain.

    rate_01 is the 0 -> 1 switching intensity, rate_10 the reverse; the
    stationary probability of state 1 is rate_01 / (rate_01 + rate_10).
    """

    regime0: OuParams
    regime1: OuParams
    rate_01: float
    rate_10: float

    def __post_init__(self):
        if self.rate_01 <= 0 or self.rate_10 <= 0:
            raise ParameterError("switching rates must be positive")

    @property
    def stationary_prob_1(self) -> float:
        return self.rate_01 / (self.rate_01 + self.rate_10)


@dataclass(frozen=True)
class ArParams:
    """Nonlinear autoregression xi_{t+1} = m(xi_t) + eta_t at the Delta grid.

    `function` selects the regression shape: "linear" gives
    m(x) = slope*x + intercept, "tanh" the saturating
    m(x) = scale*tanh(x) + intercept.
    """

    function: str = "linear"
    slope: float = 0.5
    intercept: float = 0.0
    scale: float = 1.0
    innovation_sd: float = 1.0

    def __post_init__(self):
        if self.innovation_sd <= 0:
            raise ParameterError("innovation standard deviation must be positive")
        if self.function not in ("linear", "tanh"):
            raise ParameterError(f"unknown regression function {self.function!r}")

    def regression(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.function == "linear":
            a, c = self.slope, self.intercept
            return lambda x: a * x + c
        s, c = self.scale, self.intercept
        return lambda x: s * np.tanh(x) + c


MODEL_TAGS = ("ou-exp", "regime-switch-exp", "nonlinear-ar")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulated scenario.

    The two seeds key independent Philox streams for the volatility factor
    and the price Brownian motion; they must differ, which is what makes the
    sigma-independent-of-W assumption hold in the simulation as well.
    """

    model: str
    params: OuParams | RegimeSwitchParams | ArParams
    delta: float
    n: int
    substeps: int = 16
    drift: float = 0.0
    vol_seed: int = 1
    price_seed: int = 2
    zero_floor: float = LOG_FLOOR_DEFAULT

    def __post_init__(self):
        if self.model not in MODEL_TAGS:
            raise ConfigError(f"unknown model tag {self.model!r}; expected one of {MODEL_TAGS}")
        if self.delta <= 0:
            raise ParameterError("sampling gap delta must be positive")
        if self.n < 2:
            raise ParameterError("need at least n = 2 observations")
        if self.substeps < 1:
            raise ParameterError("substeps must be a positive integer")
        if self.vol_seed == self.price_seed:
            raise ConfigError("volatility and price seeds must differ")

    def with_seeds(self, vol_seed: int, price_seed: int) -> "ScenarioConfig":
        return replace(self, vol_seed=vol_seed, price_seed=price_seed)

    # -- plain-text key = value serialization ------------------------------
    def to_kv(self) -> str:
        lines = [
            f"model = {self.model}",
            f"delta = {self.delta!r}",
            f"n = {self.n}",
            f"substeps = {self.substeps}",
            f"drift = {self.drift!r}",
            f"vol_seed = {self.vol_seed}",
            f"price_seed = {self.price_seed}",
        ]
        p = self.params
        if isinstance(p, OuParams):
            lines += [f"ou.b = {p.mean_reversion!r}", f"ou.mu = {p.level!r}",
                      f"ou.a = {p.diffusion!r}"]
            if p.x0 is not None:
                lines.append(f"ou.x0 = {p.x0!r}")
        elif isinstance(p, RegimeSwitchParams):
            for tag, q in (("regime0", p.regime0), ("regime1", p.regime1)):
                lines += [f"{tag}.b = {q.mean_reversion!r}", f"{tag}.mu = {q.level!r}",
                          f"{tag}.a = {q.diffusion!r}"]
            lines += [f"rate_01 = {p.rate_01!r}", f"rate_10 = {p.rate_10!r}"]
        else:
            lines += [f"ar.function = {p.function}", f"ar.slope = {p.slope!r}",
                      f"ar.intercept = {p.intercept!r}", f"ar.scale = {p.scale!r}",
                      f"ar.innovation_sd = {p.innovation_sd!r}"]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_kv(text: str) -> "ScenarioConfig":
        kv = parse_kv(text)
        model = kv.get("model")
        if model == "ou-exp":
            params = OuParams(float(kv["ou.b"]), float(kv.get("ou.mu", 0.0)),
                              float(kv.get("ou.a", 1.0)),
                              float(kv["ou.x0"]) if "ou.x0" in kv else None)
        elif model == "regime-switch-exp":
            r0 = OuParams(float(kv["regime0.b"]), float(kv.get("regime0.mu", 0.0)),
                          float(kv.get("regime0.a", 1.0)))
            r1 = OuParams(float(kv["regime1.b"]), float(kv.get("regime1.mu", 0.0)),
                          float(kv.get("regime1.a", 1.0)))
            params = RegimeSwitchParams(r0, r1, float(kv["rate_01"]), float(kv["rate_10"]))
        elif model == "nonlinear-ar":
            params = ArParams(kv.get("ar.function", "linear"),
                              float(kv.get("ar.slope", 0.5)),
                              float(kv.get("ar.intercept", 0.0)),
                              float(kv.get("ar.scale", 1.0)),
                              float(kv.get("ar.innovation_sd", 1.0)))
        else:
            raise ConfigError(f"unknown model tag {model!r} in scenario document")
        return ScenarioConfig(
            model=model, params=params,
            delta=float(kv["delta"]), n=int(kv["n"]),
            substeps=int(kv.get("substeps", 16)),
            drift=float(kv.get("drift", 0.0)),
            vol_seed=int(kv.get("vol_seed", 1)),
            price_seed=int(kv.get("price_seed", 2)),
        )


def parse_kv(text: str) -> dict[str, str]:
    """Parse a plain-text 'key = value' document; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


# --------------------------------------------------------------------------- observation series

@dataclass(eq=False)
class ObservationSeries:
    """Log prices on a uniform grid and their derived transforms.

    increments are X_i = (S_{i Delta} - S_{(i-1) Delta}) / sqrt(Delta); the
    log-squared values Y_i = log(X_i^2 v floor) guard exact-zero increments
    with a configurable floor (probability zero in the models, but real CSV
    files can contain ties).  `xi` carries the simulation ground truth
    log sigma^2 at the left endpoint of each increment interval and is absent
    for ingested data.
    """

    log_prices: np.ndarray
    delta: float
    xi: np.ndarray | None = None
    zero_floor: float = LOG_FLOOR_DEFAULT

    def __post_init__(self):
        self.log_prices = np.asarray(self.log_prices, dtype=float)
        if self.log_prices.ndim != 1 or self.log_prices.size < 2:
            raise DataError("need at least two price observations")
        if self.delta <= 0:
            raise ParameterError("delta must be positive")
        if self.xi is not None:
            self.xi = np.asarray(self.xi, dtype=float)
            if self.xi.shape != (self.n,):
                raise DataError("ground-truth xi must have one value per increment")

    @property
    def n(self) -> int:
        return self.log_prices.size - 1

    @property
    def increments(self) -> np.ndarray:
        s = self.log_prices
        return (s[1:] - s[:-1]) / np.sqrt(self.delta)

    @property
    def zero_increment_count(self) -> int:
        return int(np.count_nonzero(self.increments == 0.0))

    @property
    def log_squared(self) -> np.ndarray:
        x = self.increments
        return np.log(np.maximum(x * x, self.zero_floor))

    def to_csv(self, path, kind: str = "prices"):
        if kind == "prices":
            t = self.delta * np.arange(self.log_prices.size)
            np.savetxt(path, np.column_stack([t, self.log_prices]),
                       delimiter=",", header="t,S", comments="")
        elif kind == "increments":
            i = np.arange(1, self.n + 1)
            np.savetxt(path, np.column_stack([i, self.increments, self.log_squared]),
                       delimiter=",", header="i,X,Y", comments="")
        else:
            raise ConfigError(f"unknown export kind {kind!r}")


def log_squared_transform(series) -> np.ndarray:
    """Y_i = log((X_i)^2 v floor) for an ObservationSeries or a raw increment array."""
    if isinstance(series, ObservationSeries):
        return series.log_squared
    x = np.asarray(series, dtype=float)
    if x.size < 1:
        raise DataError("empty increment series")
    return np.log(np.maximum(x * x, LOG_FLOOR_DEFAULT))


# --------------------------------------------------------------------------- path simulators

def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def simulate_ou(params: OuParams, steps: int, dt: float,
                seed: int | np.random.Generator) -> np.ndarray:
    """Sample an OU path at steps+1 points with the exact Gaussian transition.

    X_{t+dt} = mu + (X_t - mu) e^{-b dt} + N(0, a^2 (1 - e^{-2 b dt}) / (2b));
    the start is a stationary draw unless params.x0 is set.
    """
    if dt <= 0:
        raise ParameterError("dt must be positive")
    if steps < 1:
        raise ParameterError("need at least one step")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    b, mu, a = params.mean_reversion, params.level, params.diffusion
    decay = np.exp(-b * dt)
    trans_sd = a * np.sqrt((1.0 - decay * decay) / (2.0 * b))
    path = np.empty(steps + 1)
    if params.x0 is None:
        path[0] = mu + np.sqrt(params.stationary_variance) * rng.standard_normal()
    else:
        path[0] = params.x0
    # AR(1) recursion x_{k+1} = decay * x_k + (mu (1 - decay) + shock_k) as a linear filter
    inputs = mu * (1.0 - decay) + trans_sd * rng.standard_normal(steps)
    path[1:] = lfilter([1.0], [1.0, -decay], inputs, zi=np.array([decay * path[0]]))[0]
    return path


def simulate_markov2(rate_01: float, rate_10: float, steps: int, dt: float,
                     seed: int | np.random.Generator,
                     initial: int | None = None) -> np.ndarray:
    """Two-state chain sampled at steps+1 points.

    Per-substep flip probabilities are 1 - exp(-rate * dt), the first-order
    discretization of the continuous-time chain; the initial state is drawn
    from the stationary law (pi_0, pi_1) unless forced.
    """
    if rate_01 <= 0 or rate_10 <= 0:
        raise ParameterError("switching rates must be positive")
    if dt <= 0 or steps < 1:
        raise ParameterError("need positive dt and at least one step")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    p_flip = (1.0 - np.exp(-rate_01 * dt), 1.0 - np.exp(-rate_10 * dt))
    pi1 = rate_01 / (rate_01 + rate_10)
    state = int(rng.random() < pi1) if initial is None else int(initial)
    u = rng.random(steps)
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = state
    for k in range(steps):
        if u[k] < p_flip[state]:
            state = 1 - state
        path[k + 1] = state
    return path


def simulate_ar_logvol(m: Callable[[float], float], innovation_sd: float,
                       steps: int, seed: int | np.random.Generator,
                       burn_in: int = 1000, x_init: float = 0.0) -> np.ndarray:
    """Iterate xi_{t+1} = m(xi_t) + eta_t and return xi_0..xi_steps after burn-in."""
    if innovation_sd <= 0:
        raise ParameterError("innovation standard deviation must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    eta = innovation_sd * rng.standard_normal(burn_in + steps)
    x = float(x_init)
    for k in range(burn_in):
        x = float(m(x)) + eta[k]
    path = np.empty(steps + 1)
    path[0] = x
    for k in range(steps):
        x = float(m(x)) + eta[burn_in + k]
        path[k + 1] = x
    return path


@dataclass(eq=False)
class VolatilityPath:
    """Fine-grid squared volatility plus the exact invariant density of log sigma^2.

    `truth` is None when the model has no closed-form invariant law (the
    tanh autoregression); otherwise it is a vectorized density callable.
    """

    sigma2: np.ndarray
    log_sigma2: np.ndarray
    dt_fine: float
    truth: Callable[[np.ndarray], np.ndarray] | None

    def truth_grid(self, x: np.ndarray) -> DensityGrid:
        if self.truth is None:
            raise ConfigError("scenario has no closed-form invariant density")
        return DensityGrid(x, self.truth(np.asarray(x, dtype=float)), signed=False)


def _normal_pdf(x, mean, var):
    return np.exp(-(x - mean) ** 2 / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def normal_mixture_density(weights, means, variances) -> Callable[[np.ndarray], np.ndarray]:
    weights = np.asarray(weights, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for w, m, v in zip(weights, means, variances):
            acc = acc + w * _normal_pdf(x, m, v)
        return acc

    return f


def simulate_volatility(config: ScenarioConfig) -> VolatilityPath:
    """Simulate the volatility factor on the fine grid of the scenario.

    Returns sigma_t^2 = exp(xi_t) at n*substeps + 1 points spaced
    delta/substeps apart, together with the exact invariant density of
    log sigma^2 (normal for ou-exp, a two-component normal mixture for
    regime switching, and the linear-AR stationary normal when available).
    """
    fine_steps = config.n * config.substeps
    dt = config.delta / config.substeps
    p = config.params

    if config.model == "ou-exp":
        if not isinstance(p, OuParams):
            raise ConfigError("ou-exp scenario needs OuParams")
        xi = simulate_ou(p, fine_steps, dt, config.vol_seed)
        truth = normal_mixture_density([1.0], [p.level], [p.stationary_variance])
    elif config.model == "regime-switch-exp":
        if not isinstance(p, RegimeSwitchParams):
            raise ConfigError("regime-switch-exp scenario needs RegimeSwitchParams")
        rng = _rng(config.vol_seed)
        x0 = simulate_ou(p.regime0, fine_steps, dt, rng)
        x1 = simulate_ou(p.regime1, fine_steps, dt, rng)
        u = simulate_markov2(p.rate_01, p.rate_10, fine_steps, dt, rng)
        xi = np.where(u == 1, x1, x0)
        pi1 = p.stationary_prob_1
        truth = normal_mixture_density(
            [pi1, 1.0 - pi1],
            [p.regime1.level, p.regime0.level],
            [p.regime1.stationary_variance, p.regime0.stationary_variance],
        )
    elif config.model == "nonlinear-ar":
        if not isinstance(p, ArParams):
            raise ConfigError("nonlinear-ar scenario needs ArParams")
        m = p.regression()
        coarse = simulate_ar_logvol(m, p.innovation_sd, config.n, config.vol_seed)
        # piecewise constant over each Delta interval; the final fine point
        # replicates the last coarse value to keep the grid length uniform
        xi = np.repeat(coarse[:-1], config.substeps)
        xi = np.concatenate([xi, [coarse[-1]]])
        if p.function == "linear" and abs(p.slope) < 1.0:
            mean = p.intercept / (1.0 - p.slope)
            var = p.innovation_sd ** 2 / (1.0 - p.slope ** 2)
            truth = normal_mixture_density([1.0], [mean], [var])
        else:
            truth = None
    else:  # pragma: no cover - guarded by ScenarioConfig
        raise ConfigError(f"unknown model tag {config.model!r}")

    return VolatilityPath(sigma2=np.exp(xi), log_sigma2=xi, dt_fine=dt, truth=truth)


def simulate_price(sigma2_path: np.ndarray, config: ScenarioConfig,
                   brownian_sign: float = 1.0) -> ObservationSeries:
    """Euler-Maruyama price integral on the fine grid, sampled every Delta.

    `brownian_sign` = -1 flips the whole Brownian stream; the log-squared
    transform of the output is invariant under that flip, which the tests
    use as a symmetry check.
    """
    sigma2_path = np.asarray(sigma2_path, dtype=float)
    fine_steps = config.n * config.substeps
    if sigma2_path.shape != (fine_steps + 1,):
        raise DataError(
            f"sigma^2 path must have n*substeps + 1 = {fine_steps + 1} points, "
            f"got {sigma2_path.size}")
    dt = config.delta / config.substeps
    rng = _rng(config.price_seed)
    dw = brownian_sign * np.sqrt(dt) * rng.standard_normal(fine_steps)
    increments = config.drift * dt + np.sqrt(sigma2_path[:-1]) * dw
    s_fine = np.concatenate([[0.0], np.cumsum(increments)])
    s = s_fine[:: config.substeps]
    xi = np.log(sigma2_path[: fine_steps : config.substeps])
    return ObservationSeries(log_prices=s, delta=config.delta, xi=xi,
                             zero_floor=config.zero_floor)


def simulate_scenario(config: ScenarioConfig) -> tuple[ObservationSeries, VolatilityPath]:
    """Volatility factor plus observed prices for one scenario."""
    vol = simulate_volatility(config)
    series = simulate_price(vol.sigma2, config)
    return series, vol


# --------------------------------------------------------------------------- invariant density

def invariant_density(drift: Callable[[float], float],
                      diffusion: Callable[[float], float],
                      x0: float,
                      grid: np.ndarray,
                      quad_tol: float = 1e-12) -> DensityGrid:
    """Invariant density of dX = b(X) dt + a(X) dB on the given grid.

    Evaluates the scale/speed formula

        pi(x) ~ exp( 2 * int_{x0}^{x} b(y)/a^2(y) dy ) / a^2(x)

    by adaptive quadrature of the inner integral (accumulated over grid
    segments, so the anchor x0 only shifts a constant), then normalizes the
    trapezoid integral over the grid to 1.  The anchor must lie inside the
    grid span and a() must not vanish on it.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise DataError("grid must be a 1-d array with at least 3 points")
    if not np.all(np.diff(grid) > 0):
        raise DataError("grid must be strictly increasing")
    if not (grid[0] <= x0 <= grid[-1]):
        raise ParameterError("anchor x0 must lie inside the grid span")

    a2 = np.array([diffusion(float(x)) for x in grid], dtype=float) ** 2
    if np.any(~np.isfinite(a2)) or np.any(a2 <= 0):
        raise ParameterError("diffusion coefficient vanishes or blows up on the grid")

    def ratio(y):
        a = diffusion(y)
        return drift(y) / (a * a)

    # cumulative integral along the grid, then shift to the x0 anchor
    seg = np.empty(grid.size)
    seg[0] = 0.0
    for k in range(1, grid.size):
        val, _ = quad(ratio, grid[k - 1], grid[k], epsabs=quad_tol, epsrel=quad_tol, limit=200)
        seg[k] = seg[k - 1] + val
    anchor, _ = quad(ratio, grid[0], x0, epsabs=quad_tol, epsrel=quad_tol, limit=200)
    exponent = 2.0 * (seg - anchor)

    exponent -= exponent.max()  # multiplicative constant is fixed by normalization
    values = np.exp(exponent) / a2
    mass = trapezoid(values, grid)
    if not np.isfinite(mass) or mass <= 0:
        raise ParameterError("invariant density integrates to a non-positive mass on this grid")
    return DensityGrid(grid, values / mass, signed=False)

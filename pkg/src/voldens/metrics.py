"""Error metrics and a seeded Monte Carlo experiment harness.

The theory's MSE/MISE are population expectations; this module realizes
them as averages over seeded replications and always reports the Monte
Carlo standard error beside the mean.  Raw estimator output is never
altered: clipping at zero plus renormalization happens only inside
`normal_fit` and `mode_count`, which need a bona fide density to work on.

`run_experiment` is bit-reproducible for a fixed spec on one platform
(counter-based streams, deterministic aggregation order); across platforms
or BLAS builds the metric values can differ at the float-rounding level,
so 1e-10 is the right comparison tolerance for archived results.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .errors import ConfigError, DataError, ParameterError
from .grids import DensityGrid
from .kerneldeconv import KernelSpec, estimate_density
from .noisemodel import sample_noise
from .ppe import PpeConfig, select_and_estimate
from .svsim import (ArParams, OuParams, RegimeSwitchParams, ScenarioConfig,
                    _rng, simulate_scenario)
from .waveletdeconv import wavelet_estimate

THREADS_ENV = "VOLDENS_THREADS"


# --------------------------------------------------------------------------- metrics

def mise(estimate: DensityGrid, truth: DensityGrid) -> float:
    """Trapezoid integral of the squared difference over a common grid."""
    if not estimate.same_grid(truth):
        raise DataError("MISE needs both functions on the identical grid")
    diff = estimate.values - truth.values
    return float(trapezoid(diff * diff, estimate.x))


def _clipped_density(grid: DensityGrid) -> np.ndarray:
    clipped = np.maximum(grid.values, 0.0)
    mass = trapezoid(clipped, grid.x)
    if mass <= 0:
        raise DataError("estimate carries no positive mass")
    return clipped / mass


def mode_count(grid: DensityGrid, prominence: float = 0.05) -> int:
    """Number of strict local maxima with prominence above the floor.

    The input is clipped at zero and renormalized first, so the prominence
    floor refers to a probability density scale.
    """
    if len(grid) < 3:
        raise DataError("mode counting needs at least 3 grid points")
    vals = _clipped_density(grid)
    peaks, _ = find_peaks(vals, prominence=prominence)
    return int(peaks.size)


def normal_fit(grid: DensityGrid) -> tuple[float, float, DensityGrid]:
    """Mean/variance of the (clipped, renormalized) estimate and the matched normal."""
    vals = _clipped_density(grid)
    mean = float(trapezoid(grid.x * vals, grid.x))
    second = float(trapezoid(grid.x ** 2 * vals, grid.x))
    var = second - mean * mean
    if var <= 0:
        raise DataError("degenerate variance in normal fit")
    fitted = np.exp(-(grid.x - mean) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)
    return mean, var, DensityGrid(grid.x, fitted, signed=False)


# --------------------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class PureConvolution:
    """Y_i = xi_i + eps_i with xi i.i.d. N(mean, sd^2): the exact-convolution benchmark."""

    mean: float = 0.0
    sd: float = 1.0
    n: int = 1000
    seed: int = 1

    def __post_init__(self):
        if self.sd <= 0:
            raise ParameterError("sd must be positive")
        if self.n < 1:
            raise ParameterError("n must be >= 1")

    def draw(self) -> np.ndarray:
        rng = _rng(self.seed)
        xi = self.mean + self.sd * rng.standard_normal(self.n)
        return xi + sample_noise(self.n, rng)

    def truth(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-(x - self.mean) ** 2 / (2 * self.sd ** 2)) / (
            self.sd * np.sqrt(2 * np.pi))


def scenario_preset(name: str, n: int, delta: float = 0.05,
                    substeps: int = 16) -> ScenarioConfig | PureConvolution:
    """The three shipped scenario presets."""
    if name == "ou-exp":
        return ScenarioConfig("ou-exp", OuParams(0.5, 0.0, 1.0), delta, n, substeps)
    if name == "regime-switch":
        params = RegimeSwitchParams(
            regime0=OuParams(2.0, -2.0, 1.0),
            regime1=OuParams(2.0, 2.0, 1.0),
            rate_01=0.2, rate_10=0.2,
        )
        return ScenarioConfig("regime-switch-exp", params, delta, n, substeps)
    if name == "nonlinear-ar":
        return ScenarioConfig("nonlinear-ar", ArParams(), delta, n, substeps)
    if name == "pure-convolution":
        return PureConvolution(n=n)
    raise ConfigError(f"unknown scenario preset {name!r}")


PRESET_NAMES = ("ou-exp", "regime-switch", "nonlinear-ar", "pure-convolution")


def _replicate_scenario(scenario, seed_base: int, rep: int):
    """Scenario copy with deterministically derived, distinct seeds."""
    if isinstance(scenario, PureConvolution):
        return replace(scenario, seed=seed_base + rep)
    return scenario.with_seeds(seed_base + 2 * rep, seed_base + 2 * rep + 1)


def _draw(scenario) -> tuple[np.ndarray, object]:
    """(Y series, truth-density callable or None) for one scenario realization."""
    if isinstance(scenario, PureConvolution):
        return scenario.draw(), scenario.truth
    series, vol = simulate_scenario(scenario)
    return series.log_squared, vol.truth


def default_evaluation_grid(scenario, points: int = 512) -> np.ndarray:
    """A fixed grid wide enough for the scenario's invariant density."""
    if isinstance(scenario, PureConvolution):
        lo, hi = scenario.mean - 6 * scenario.sd, scenario.mean + 6 * scenario.sd
    else:
        p = scenario.params
        if isinstance(p, OuParams):
            sd = np.sqrt(p.stationary_variance)
            lo, hi = p.level - 6 * sd, p.level + 6 * sd
        elif isinstance(p, RegimeSwitchParams):
            sds = [np.sqrt(q.stationary_variance) for q in (p.regime0, p.regime1)]
            lo = min(p.regime0.level - 6 * sds[0], p.regime1.level - 6 * sds[1])
            hi = max(p.regime0.level + 6 * sds[0], p.regime1.level + 6 * sds[1])
        elif isinstance(p, ArParams) and p.function == "linear" and abs(p.slope) < 1:
            mean = p.intercept / (1 - p.slope)
            sd = p.innovation_sd / np.sqrt(1 - p.slope ** 2)
            lo, hi = mean - 6 * sd, mean + 6 * sd
        else:
            lo, hi = -10.0, 10.0
    return np.linspace(lo, hi, points)


# --------------------------------------------------------------------------- harness

METRIC_NAMES = ("mise", "mse_at_point", "mode_count", "normal_fit_mean", "normal_fit_var")


@dataclass(frozen=True)
class ExperimentSpec:
    """One seeded Monte Carlo experiment.

    `scenario` is a ScenarioConfig, a PureConvolution, or a preset name;
    per-replication seeds derive deterministically from `seed_base`.
    """

    scenario: object
    estimator: str = "kernel"
    estimator_config: dict = field(default_factory=dict)
    replications: int = 20
    seed_base: int = 1000
    metrics: tuple[str, ...] = ("mise",)
    grid_points: int = 512
    mse_point: float = 0.0
    mode_prominence: float = 0.05

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError("need at least one replication")
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}; expected {METRIC_NAMES}")
        if self.estimator not in ("kernel", "wavelet", "ppe"):
            raise ConfigError(f"harness supports density estimators, not {self.estimator!r}")


def _estimate(estimator: str, cfg: dict, y: np.ndarray, grid: np.ndarray) -> DensityGrid:
    if estimator == "kernel":
        spec = KernelSpec(**cfg)
        return estimate_density(y, spec, grid).density
    if estimator == "wavelet":
        return wavelet_estimate(y, grid=grid, **cfg).density
    if estimator == "ppe":
        return select_and_estimate(y, PpeConfig(**cfg), grid).density
    raise ConfigError(f"unknown estimator {estimator!r}")


@dataclass(eq=False)
class ExperimentReport:
    """Per-replication rows plus aggregates with Monte Carlo standard errors."""

    spec: ExperimentSpec
    columns: tuple[str, ...]
    rows: list[dict]
    aggregate: dict[str, tuple[float, float]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["replication", "seed", *self.columns])
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    def summary(self) -> str:
        out = io.StringIO()
        out.write(f"estimator={self.spec.estimator} replications={self.spec.replications} "
                  f"seed_base={self.spec.seed_base}\n")
        width = max(len(c) for c in self.columns)
        out.write(f"{'metric'.ljust(width)}  {'mean':>14}  {'mc_se':>14}\n")
        for name in self.columns:
            mean, se = self.aggregate[name]
            out.write(f"{name.ljust(width)}  {mean:14.6g}  {se:14.6g}\n")
        return out.getvalue()


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run the replications (optionally threaded) and aggregate deterministically.

    Thread count comes from the VOLDENS_THREADS environment variable
    (default 1); results are keyed by replication index, so the aggregation
    order never depends on scheduling.
    """
    scenario = spec.scenario
    if isinstance(scenario, str):
        raise ConfigError("resolve preset names with scenario_preset(...) first")
    grid = default_evaluation_grid(scenario, spec.grid_points)

    def one(rep: int) -> dict:
        sc = _replicate_scenario(scenario, spec.seed_base, rep)
        y, truth = _draw(sc)
        est = _estimate(spec.estimator, dict(spec.estimator_config), y, grid)
        row: dict = {"replication": rep,
                     "seed": sc.seed if isinstance(sc, PureConvolution) else sc.vol_seed}
        if truth is not None:
            truth_grid = DensityGrid(grid, truth(grid), signed=False)
        else:
            truth_grid = None
        for name in spec.metrics:
            if name == "mise":
                if truth_grid is None:
                    raise ConfigError("mise metric needs a scenario with a known truth")
                row["mise"] = mise(est, truth_grid)
            elif name == "mse_at_point":
                if truth_grid is None:
                    raise ConfigError("mse_at_point needs a scenario with a known truth")
                fhat = float(np.interp(spec.mse_point, est.x, est.values))
                f0 = float(np.interp(spec.mse_point, truth_grid.x, truth_grid.values))
                row["mse_at_point"] = (fhat - f0) ** 2
            elif name == "mode_count":
                row["mode_count"] = mode_count(est, spec.mode_prominence)
            elif name == "normal_fit_mean":
                row["normal_fit_mean"] = normal_fit(est)[0]
            elif name == "normal_fit_var":
                row["normal_fit_var"] = normal_fit(est)[1]
        return row

    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(spec.replications)))
    else:
        rows = [one(rep) for rep in range(spec.replications)]
    rows.sort(key=lambda r: r["replication"])

    columns = tuple(spec.metrics)
    aggregate = {}
    for name in columns:
        vals = np.array([row[name] for row in rows], dtype=float)
        se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        aggregate[name] = (float(vals.mean()), se)
    return ExperimentReport(spec=spec, columns=columns, rows=rows, aggregate=aggregate)

"""End-user pipeline: ingest prices or simulate a scenario, estimate, write files.

Every run writes four artifacts into the output directory (five for the
wavelet estimator, which also dumps its coefficients):

    density.csv       x, fhat        (regression.csv for --estimator regression)
    diagnostics.csv   key, value     (per-level rows for the ppe estimator)
    run_config.txt    resolved configuration, reusable via --config
    plot.gp           a gnuplot script referencing the CSVs

Outputs are plain files and the run is deterministic for a fixed
configuration, so a rerun is byte-identical.  All failures exit nonzero
with a machine-readable JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .errors import ConfigError, DataError, ParameterError, VoldensError
from .kerneldeconv import (KernelSpec, check_gamma_constraint, default_bandwidth,
                           estimate_density)
from .ppe import PpeConfig, select_and_estimate
from .svsim import ObservationSeries, ScenarioConfig, parse_kv, simulate_scenario
from .volreg import (DENOMINATOR_FLOOR, default_regression_bandwidth,
                     regression_estimate)
from .waveletdeconv import wavelet_estimate

DEFAULT_GAMMA_KERNEL = 1.0
DEFAULT_GAMMA_REGRESSION = 3.5
ESTIMATORS = ("kernel", "wavelet", "ppe", "regression")


@dataclass
class PipelineConfig:
    """Fully resolved pipeline run; exactly one of input_csv / scenario is set."""

    estimator: str
    out_dir: str
    input_csv: str | None = None
    scenario: str | None = None
    n: int = 2600
    delta: float = 1.0
    seed: int = 1
    demean: bool = False
    price_column: str | None = None
    bandwidth: float | None = None
    gamma: float | None = None
    grid_points: int = 512
    level: str = "auto"
    truncation: str = "auto"
    kappa: float = 1.0
    kn: int | None = None
    denominator_floor: float = DENOMINATOR_FLOOR
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown-estimator: {self.estimator!r} "
                              f"(expected one of {ESTIMATORS})")
        if (self.input_csv is None) == (self.scenario is None):
            raise ConfigError("exactly one input source required: --input or --scenario")
        if self.delta <= 0:
            raise ParameterError("delta must be positive")

    def to_kv(self) -> str:
        pairs = [
            ("estimator", self.estimator),
            ("out", self.out_dir),
            ("input", self.input_csv or ""),
            ("scenario", self.scenario or ""),
            ("n", self.n),
            ("delta", self.delta),
            ("seed", self.seed),
            ("demean", str(self.demean).lower()),
            ("price_column", self.price_column or ""),
            ("bandwidth", "" if self.bandwidth is None else self.bandwidth),
            ("gamma", "" if self.gamma is None else self.gamma),
            ("grid_points", self.grid_points),
            ("level", self.level),
            ("truncation", self.truncation),
            ("kappa", self.kappa),
            ("kn", "" if self.kn is None else self.kn),
            ("denominator_floor", self.denominator_floor),
        ]
        return "".join(f"{k} = {v}\n" for k, v in pairs)


def ingest_prices(path, delta: float = 1.0, demean: bool = False,
                  price_column: str | None = None) -> ObservationSeries:
    """Load a price CSV into an ObservationSeries of log prices.

    The file needs a header and strictly positive prices; the column is
    picked by name when given, otherwise the last column.  Uniform spacing
    is assumed with the gap `delta` supplied by the caller.  With `demean`,
    the sample mean of the log returns is subtracted (implemented as a
    linear detrend of the log prices, so the increment identity holds
    exactly and the demeaned returns average to zero up to rounding).
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV file") from None
        if price_column is not None:
            names = [h.strip() for h in header]
            if price_column not in names:
                raise DataError(f"price column {price_column!r} not in header {names}")
            col = names.index(price_column)
        else:
            col = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"non-numeric price cell at line {lineno}") from None
    if len(rows) < 3:
        raise DataError("need at least 3 price rows")
    prices = np.asarray(rows, dtype=float)
    if np.any(prices <= 0):
        raise DataError("prices must be strictly positive to take logarithms")
    log_prices = np.log(prices)
    if demean:
        returns = np.diff(log_prices)
        trend = returns.mean() * np.arange(log_prices.size)
        log_prices = log_prices - trend
    return ObservationSeries(log_prices=log_prices, delta=delta)


# --------------------------------------------------------------------------- pipeline

def _resolve_series(config: PipelineConfig) -> tuple[ObservationSeries, object]:
    if config.input_csv is not None:
        series = ingest_prices(config.input_csv, config.delta, config.demean,
                               config.price_column)
        return series, None
    name = config.scenario
    if name in metrics_mod.PRESET_NAMES and name != "pure-convolution":
        scenario = metrics_mod.scenario_preset(name, config.n, config.delta)
    elif Path(name).exists():
        scenario = ScenarioConfig.from_kv(Path(name).read_text())
    else:
        raise ConfigError(f"scenario {name!r} is neither a preset "
                          f"{metrics_mod.PRESET_NAMES[:-1]} nor a readable file")
    scenario = scenario.with_seeds(config.seed * 2 + 1, config.seed * 2 + 2)
    series, vol = simulate_scenario(scenario)
    return series, vol.truth


def _kernel_bandwidth(config: PipelineConfig, n: int) -> float:
    if config.bandwidth is not None:
        return config.bandwidth
    gamma = config.gamma if config.gamma is not None else DEFAULT_GAMMA_KERNEL
    check_gamma_constraint(n, config.delta, gamma)
    return default_bandwidth(n, gamma)


def run_pipeline(config: PipelineConfig) -> list[Path]:
    """Execute one run and return the list of files written."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series, truth = _resolve_series(config)
    y = series.log_squared
    n = y.size
    written: list[Path] = []
    diag_rows: list[tuple[str, object]] = [
        ("estimator", config.estimator),
        ("n", n),
        ("delta", config.delta),
        ("zero_increment_count", series.zero_increment_count),
    ]

    if config.estimator == "kernel":
        h = _kernel_bandwidth(config, n)
        report = estimate_density(y, KernelSpec(bandwidth=h,
                                                grid_points=config.grid_points))
        density = report.density
        diag_rows += [("bandwidth", h),
                      ("grid_lo", density.x[0]), ("grid_hi", density.x[-1])]
        _append_shape_diagnostics(diag_rows, density)
        written.append(_write_density(out / "density.csv", density, "fhat"))
    elif config.estimator == "wavelet":
        level = None if config.level == "auto" else int(config.level)
        trunc = None if config.truncation == "auto" else int(config.truncation)
        est = wavelet_estimate(y, level=level, truncation=trunc)
        density = est.density
        diag_rows += [("level", est.level), ("level_target", est.level_target),
                      ("truncation", est.truncation),
                      ("coefficient_norm", est.diagnostics["coefficient_norm"])]
        _append_shape_diagnostics(diag_rows, density)
        written.append(_write_density(out / "density.csv", density, "ghat"))
        coeff_path = out / "coefficients.csv"
        ls = np.arange(-est.truncation, est.truncation + 1)
        np.savetxt(coeff_path, np.column_stack([ls, est.coefficients]),
                   delimiter=",", header="l,a_hat", comments="")
        written.append(coeff_path)
    elif config.estimator == "ppe":
        est = select_and_estimate(y, PpeConfig(kappa=config.kappa, k_n=config.kn,
                                               grid_points=config.grid_points))
        density = est.density
        diag_rows += [("selected_level", est.selected_level), ("k_n", est.k_n)]
        for L in sorted(est.contrasts):
            diag_rows.append((f"contrast_L{L}", est.contrasts[L]))
            diag_rows.append((f"penalty_L{L}", est.penalties[L]))
            diag_rows.append((f"selected_L{L}", int(L == est.selected_level)))
        _append_shape_diagnostics(diag_rows, density)
        written.append(_write_density(out / "density.csv", density, "fhat"))
    else:  # regression
        if config.bandwidth is not None:
            h = config.bandwidth
        else:
            gamma = config.gamma if config.gamma is not None else DEFAULT_GAMMA_REGRESSION
            h = default_regression_bandwidth(n, gamma)
        lo, hi = np.quantile(y, 0.05), np.quantile(y, 0.95)
        grid = np.linspace(lo, hi, config.grid_points)
        est = regression_estimate(y, h, grid, floor=config.denominator_floor)
        diag_rows += [("bandwidth", h), ("denominator_floor", config.denominator_floor),
                      ("masked_points", int(est.mask.sum()))]
        path = out / "regression.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "mhat", "fhat", "masked"])
            for i in range(grid.size):
                writer.writerow([repr(float(est.x[i])),
                                 "" if est.mask[i] else repr(float(est.m_hat[i])),
                                 repr(float(est.denominator[i])), int(est.mask[i])])
        written.append(path)

    diag_path = out / "diagnostics.csv"
    with open(diag_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        for key, value in diag_rows:
            writer.writerow([key, value])
    written.append(diag_path)

    echo_path = out / "run_config.txt"
    echo_path.write_text(config.to_kv())
    written.append(echo_path)

    plot_path = out / "plot.gp"
    target = "regression.csv" if config.estimator == "regression" else "density.csv"
    plot_path.write_text(
        "set datafile separator ','\n"
        "set key off\n"
        f"plot '{target}' using 1:2 with lines\n")
    written.append(plot_path)
    return written


def _write_density(path: Path, density, value_name: str) -> Path:
    density.to_csv(path, value_name=value_name)
    return path


def _append_shape_diagnostics(rows: list, density) -> None:
    try:
        rows.append(("mode_count", metrics_mod.mode_count(density)))
        mean, var, _ = metrics_mod.normal_fit(density)
        rows.append(("normal_fit_mean", mean))
        rows.append(("normal_fit_var", var))
    except DataError:
        rows.append(("mode_count", "degenerate"))


# --------------------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="voldens",
        description="Estimate the invariant density of an unobserved volatility "
                    "process from sampled prices, by deconvolution.")
    src = p.add_argument_group("input (exactly one)")
    src.add_argument("--input", help="price CSV with a header row")
    src.add_argument("--scenario",
                     help="simulation preset (ou-exp, regime-switch, nonlinear-ar) "
                          "or a scenario key=value file")
    p.add_argument("--config", help="key=value file mirroring these flags; flags win")
    p.add_argument("--estimator", choices=ESTIMATORS, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--n", type=int, default=None, help="scenario sample count")
    p.add_argument("--delta", type=float, default=None,
                   help="sampling gap; for real data the time units are yours "
                        "(default 1.0 per observation)")
    p.add_argument("--seed", type=int, default=None, help="scenario seed")
    p.add_argument("--demean", action="store_true", default=None,
                   help="center the log returns before transforming")
    p.add_argument("--price-column", default=None)
    p.add_argument("--bandwidth", type=float, default=None,
                   help="kernel/regression bandwidth h (overrides --gamma)")
    p.add_argument("--gamma", type=float, default=None,
                   help=f"bandwidth constant: h = gamma*pi/log n for the kernel "
                        f"(default {DEFAULT_GAMMA_KERNEL}), h = gamma/log n for the "
                        f"regression (default {DEFAULT_GAMMA_REGRESSION})")
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--level", default=None, help="wavelet detail level m or 'auto'")
    p.add_argument("--truncation", default=None, help="wavelet truncation L or 'auto'")
    p.add_argument("--kappa", type=float, default=None, help="ppe penalty constant")
    p.add_argument("--kn", type=int, default=None, help="ppe coefficient truncation K_n")
    p.add_argument("--denominator-floor", type=float, default=None)
    return p


_CONFIG_KEYS = {
    "input": ("input_csv", str), "scenario": ("scenario", str),
    "estimator": ("estimator", str), "out": ("out_dir", str),
    "n": ("n", int), "delta": ("delta", float), "seed": ("seed", int),
    "demean": ("demean", lambda s: s.lower() in ("1", "true", "yes", "on")),
    "price_column": ("price_column", str),
    "bandwidth": ("bandwidth", float), "gamma": ("gamma", float),
    "grid_points": ("grid_points", int),
    "level": ("level", str), "truncation": ("truncation", str),
    "kappa": ("kappa", float), "kn": ("kn", int),
    "denominator_floor": ("denominator_floor", float),
}


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge a --config file (if any) with command-line flags; flags win."""
    values: dict = {}
    if args.config:
        kv = parse_kv(Path(args.config).read_text())
        for key, raw in kv.items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if raw == "":
                continue
            attr, conv = _CONFIG_KEYS[key]
            values[attr] = conv(raw)
    flags = {
        "input_csv": args.input, "scenario": args.scenario,
        "estimator": args.estimator, "out_dir": args.out,
        "n": args.n, "delta": args.delta, "seed": args.seed,
        "demean": args.demean, "price_column": args.price_column,
        "bandwidth": args.bandwidth, "gamma": args.gamma,
        "grid_points": args.grid_points, "level": args.level,
        "truncation": args.truncation, "kappa": args.kappa, "kn": args.kn,
        "denominator_floor": args.denominator_floor,
    }
    for attr, val in flags.items():
        if val is not None:
            values[attr] = val
    if "estimator" not in values:
        raise ConfigError("an --estimator is required")
    if "out_dir" not in values:
        raise ConfigError("an --out directory is required")
    values.setdefault("demean", False)
    return PipelineConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        run_pipeline(config)
    except VoldensError as exc:
        kind = exc.kind
        message = str(exc)
        if message.startswith("unknown-estimator"):
            kind = "unknown-estimator"
        json.dump({"error": kind, "message": message}, sys.stderr)
        sys.stderr.write("\n")
        return 2 if kind in ("config", "unknown-estimator") else 1
    except OSError as exc:
        json.dump({"error": "io", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

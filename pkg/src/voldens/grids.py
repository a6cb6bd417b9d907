"""Evaluated-function containers: density grids and characteristic-function tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import DataError


@dataclass(eq=False)
class DensityGrid:
    """A function sampled on strictly increasing abscissae.

    This is the universal output of every estimator and ground-truth oracle.
    ``signed`` declares whether negative values are legitimate (raw
    deconvolution estimates can dip below zero); when False the constructor
    enforces nonnegativity.
    """

    x: np.ndarray
    values: np.ndarray
    signed: bool = True

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.values.shape:
            raise DataError("grid abscissae and values must be 1-d arrays of equal length")
        if self.x.size < 2:
            raise DataError("grid needs at least two points")
        if not np.all(np.diff(self.x) > 0):
            raise DataError("grid abscissae must be strictly increasing")
        if not self.signed and np.any(self.values < 0):
            raise DataError("negative values in a grid declared nonnegative")

    def __len__(self):
        return self.x.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def integral(self) -> float:
        """Trapezoid integral of the values over the grid."""
        return float(trapezoid(self.values, self.x))

    def same_grid(self, other: "DensityGrid") -> bool:
        return self.x.shape == other.x.shape and bool(np.array_equal(self.x, other.x))

    def to_csv(self, path, value_name: str = "value"):
        arr = np.column_stack([self.x, self.values])
        np.savetxt(path, arr, delimiter=",", header=f"x,{value_name}", comments="")


@dataclass(eq=False)
class CharFnTable:
    """Complex characteristic-function values on a symmetric frequency grid.

    Hermitian symmetry phi(-t) = conj(phi(t)) and phi(0) = 1 are structural
    for characteristic functions and validated here with a small tolerance.
    """

    t: np.ndarray
    values: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.t.shape != self.values.shape or self.t.ndim != 1:
            raise DataError("frequency grid and values must be 1-d arrays of equal length")
        if not np.all(np.diff(self.t) > 0):
            raise DataError("frequency grid must be strictly increasing")
        if self.validate:
            at0 = np.flatnonzero(self.t == 0.0)
            if at0.size and abs(self.values[at0[0]] - 1.0) > 1e-6:
                raise DataError("characteristic function must equal 1 at t = 0")

    def to_csv(self, path):
        arr = np.column_stack([self.t, self.values.real, self.values.imag])
        np.savetxt(path, arr, delimiter=",", header="t,re,im", comments="")

"""Uniform grid on [-L, L], discrete fields, quadrature and cut-off weights.

All fields carry homogeneous Dirichlet values at the two end nodes once they
pass through the operator layer; the quadrature here does not assume it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Two fields living on different grids were combined."""


@dataclass(frozen=True)
class Grid:
    half_length: float
    points: int
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.half_length) or self.half_length <= 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        if int(self.points) != self.points or self.points < 3:
            raise ValueError(f"need at least 3 grid points, got {self.points}")
        object.__setattr__(self, "points", int(self.points))
        x = np.linspace(-self.half_length, self.half_length, self.points)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / (self.points - 1)

    h = spacing

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        vals = np.broadcast_to(np.asarray(func(self.x), dtype=float), self.x.shape)
        return Field(self, vals)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.points))


def build_grid(half_length: float, points: int) -> Grid:
    return Grid(float(half_length), points)


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.points,):
            raise ValueError(
                f"field has shape {vals.shape}, grid has {self.grid.points} points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.grid.points

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise GridMismatchError("fields live on different grids")


def inner_l2(u: Field, v: Field) -> float:
    _same_grid(u, v)
    return u.grid.integrate(u.values * v.values)


def l2_norm(u: Field) -> float:
    return float(np.sqrt(max(inner_l2(u, u), 0.0)))


def gradient_energy(grid: Grid, values: np.ndarray) -> float:
    """Trapezoidal integral of the squared central-difference gradient."""
    du = np.gradient(values, grid.spacing)
    return grid.integrate(du * du)


def h1_norm(u: Field) -> float:
    return float(np.sqrt(l2_norm(u) ** 2 + gradient_energy(u.grid, u.values)))


# array-level helpers used in the time-stepping loops
def l2_norm_values(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(max(grid.integrate(values * values), 0.0)))


def h1_norm_values(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(grid.integrate(values * values) + gradient_energy(grid, values)))


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth ramp with value 0 on [0, 1] and 1 on [2, inf)."""

    ramp: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.ramp(np.clip(t - 1.0, 0.0, 1.0))


def _quintic_smoothstep(s):
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def quintic_profile() -> CutoffProfile:
    # sup of 30 s^2 (1-s)^2 over [0, 1] is attained at s = 1/2
    return CutoffProfile(_quintic_smoothstep, 15.0 / 8.0)


def cutoff_weights(grid: Grid, n: float, profile: CutoffProfile | None = None) -> Field:
    """Samples of phi(|x|^2 / n^2)."""
    if n <= 0:
        raise ValueError(f"cut-off index must be positive, got {n}")
    profile = profile or quintic_profile()
    return Field(grid, profile(grid.x**2 / float(n) ** 2))

"""Discrete Schrödinger operator A = -Δ + V - λ and its low spectrum.

The operator acts on the interior nodes of a :class:`Grid` with homogeneous
Dirichlet values at both ends, so it is the symmetric tridiagonal matrix with
diagonal ``2/h^2 + V(x_i) - λ`` and off-diagonal ``-1/h^2``.  Eigenfields are
stored full-length (zero at the ends) and normalised in the trapezoidal L².
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .expressions import Expression, parse
from .grid import Field, Grid, h1_norm_values, l2_norm_values


class EigenSolverError(RuntimeError):
    """The eigensolver failed or returned pairs violating the residual checks."""


class SpectralWindowError(ValueError):
    """A query reaches beyond the computed or physically meaningful spectrum."""


class BottomDiscrepancyWarning(UserWarning):
    pass


def as_function(obj: Any) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a number, expression string or callable into a function of x."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        c = float(obj)
        return lambda x: np.full(np.shape(x), c)
    if isinstance(obj, str):
        obj = parse(obj)
    if isinstance(obj, Expression):
        expr = obj
        return lambda x: expr(x)
    if callable(obj):
        return obj
    raise TypeError(f"cannot interpret {obj!r} as a function of x")


def _component(item) -> tuple[Callable, float]:
    if isinstance(item, tuple) and len(item) == 2 and not callable(item[1]):
        func, p = item
    else:
        func, p = item, 2.0
    p = float(p)
    # the (KR)/(PT) exponent restriction in one space dimension
    if p < 2.0:
        raise ValueError(f"integrability exponent must be >= 2 in 1D, got {p}")
    return as_function(func), p


@dataclass(frozen=True, eq=False)
class SplitPotential:
    """A potential written as bounded part plus finitely many L^p parts.

    Used for V itself and for the auxiliary fields l, a, alpha, omega.
    """

    bounded: Any = 0.0
    decaying: Sequence = ()
    rho_declared: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "bounded", as_function(self.bounded))
        items = self.decaying
        if callable(items) or isinstance(items, (str, int, float, Expression)):
            items = [items]
        object.__setattr__(self, "decaying", tuple(_component(it) for it in items))

    def bounded_values(self, x) -> np.ndarray:
        return np.asarray(self.bounded(x), dtype=float)

    def decaying_values(self, x) -> np.ndarray:
        out = np.zeros(np.shape(x))
        for func, _ in self.decaying:
            out = out + func(x)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.bounded_values(x) + self.decaying_values(x)

    def decaying_norms(self, grid: Grid, weight: np.ndarray | None = None) -> list[float]:
        """Trapezoidal ‖weight·V0_k‖_{L^p_k} for every decaying component."""
        w = np.ones(grid.points) if weight is None else weight
        norms = []
        for func, p in self.decaying:
            vals = np.abs(w * func(grid.x))
            if not np.all(np.isfinite(vals)):
                raise ValueError("decaying component is not finite on the grid")
            norms.append(grid.integrate(vals**p) ** (1.0 / p))
        return norms

    def minus(self, other: "SplitPotential") -> "SplitPotential":
        """The split potential self - other."""
        a, b = self.bounded, other.bounded
        neg = tuple((lambda x, f=f: -f(x), p) for f, p in other.decaying)
        return SplitPotential(lambda x: a(x) - b(x), self.decaying + neg)


PotentialSpec = SplitPotential


def constant(c: float) -> SplitPotential:
    return SplitPotential(float(c))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    lam: float
    potential: SplitPotential | None
    v: np.ndarray = field(repr=False)

    @cached_property
    def diag(self) -> np.ndarray:
        h = self.grid.spacing
        return 2.0 / h**2 + self.v[1:-1] - self.lam

    @cached_property
    def off(self) -> np.ndarray:
        h = self.grid.spacing
        return np.full(self.grid.points - 3, -1.0 / h**2)

    @property
    def size(self) -> int:
        return self.grid.points - 2

    def apply(self, values: np.ndarray) -> np.ndarray:
        """A u on interior nodes; end values of u are ignored, output ends are 0."""
        u = np.asarray(values, dtype=float)
        h2 = self.grid.spacing**2
        out = np.zeros_like(u)
        ui = u[1:-1].copy()
        lap = -(np.concatenate(([0.0], ui[:-1])) - 2.0 * ui + np.concatenate((ui[1:], [0.0]))) / h2
        out[1:-1] = lap + (self.v[1:-1] - self.lam) * ui
        return out

    def quadratic_form(self, values: np.ndarray) -> float:
        """h·Σ u_i (A u)_i, the discrete ∫|∇u|² + (V-λ)u²."""
        u = np.asarray(values, dtype=float)
        return float(self.grid.spacing * np.dot(u[1:-1], self.apply(u)[1:-1]))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def with_shift(self, lam: float) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, float(lam), self.potential, self.v)

    def plus_multiplier(self, w: np.ndarray) -> "DiscreteOperator":
        """The operator A + diag(w), e.g. a linearisation A - f_u(x, u)."""
        return DiscreteOperator(self.grid, self.lam, None, self.v + np.asarray(w, dtype=float))

    @cached_property
    def lowest_eigenvalue(self) -> float:
        return float(
            eigh_tridiagonal(self.diag, self.off, eigvals_only=True, select="i", select_range=(0, 0))[0]
        )

    @cached_property
    def essential_bottom(self) -> float:
        """ϱ(V_∞) - λ; +inf when no split potential is attached."""
        if self.potential is None:
            return float("inf")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BottomDiscrepancyWarning)
            return asymptotic_bottom(self.potential, self.grid) - self.lam


def assemble(grid: Grid, potential, lam: float = 0.0) -> DiscreteOperator:
    if not isinstance(potential, SplitPotential):
        potential = SplitPotential(potential)
    v = np.asarray(potential(grid.x), dtype=float) * np.ones(grid.points)
    if not np.all(np.isfinite(v)):
        raise ValueError("potential has non-finite samples on the grid")
    v.setflags(write=False)
    return DiscreteOperator(grid, float(lam), potential, v)


def asymptotic_bottom(potential, grid: Grid) -> float:
    """sup over R in (0, L) of min{V_∞(x_i) : |x_i| > R}."""
    if isinstance(potential, SplitPotential):
        vals = potential.bounded_values(grid.x) * np.ones(grid.points)
        declared = potential.rho_declared
    else:
        vals = as_function(potential)(grid.x) * np.ones(grid.points)
        declared = None
    if not np.all(np.isfinite(vals)):
        raise ValueError("bounded part of the potential is not finite on the grid")
    r = np.abs(grid.x)
    radii = np.unique(np.concatenate(([0.0], r[r < grid.half_length])))
    best = -np.inf
    for R in radii:
        best = max(best, float(vals[r > R].min()))
    if declared is not None and abs(best - declared) > 1e-6 * (1.0 + abs(declared)):
        warnings.warn(
            f"grid estimate of the asymptotic bottom {best:.10g} differs from the declared {declared:.10g}",
            BottomDiscrepancyWarning,
            stacklevel=2,
        )
    return best


def _normalise(grid: Grid, vecs: np.ndarray) -> np.ndarray:
    """Interior eigenvectors (n, k) -> full-length fields (k, M), unit trapezoidal L²."""
    k = vecs.shape[1]
    fields = np.zeros((k, grid.points))
    fields[:, 1:-1] = vecs.T / np.sqrt(grid.spacing)
    for j in range(k):
        i = int(np.argmax(np.abs(fields[j])))
        if fields[j, i] < 0:
            fields[j] = -fields[j]
    return fields


@dataclass(frozen=True, eq=False)
class SpectralData:
    grid: Grid
    lam: float
    eigenvalues: np.ndarray
    fields: np.ndarray = field(repr=False)
    essential_bottom: float
    tau_ker: float
    complete_below: float
    smoothing_constant: float | None = None

    @property
    def below_bottom(self) -> np.ndarray:
        return self.eigenvalues < self.essential_bottom

    @property
    def continuum_artifacts(self) -> np.ndarray:
        """Indices of eigenvalues at or above the essential bottom."""
        return np.flatnonzero(~self.below_bottom)

    @property
    def negative(self) -> np.ndarray:
        return np.flatnonzero((self.eigenvalues < -self.tau_ker) & self.below_bottom)

    @property
    def kernel(self) -> np.ndarray:
        return np.flatnonzero((np.abs(self.eigenvalues) <= self.tau_ker) & self.below_bottom)

    @property
    def positive(self) -> np.ndarray:
        return np.flatnonzero((self.eigenvalues > self.tau_ker) & self.below_bottom)

    @property
    def rho_minus(self) -> float | None:
        neg = self.negative
        return float(-self.eigenvalues[neg].max()) if neg.size else None

    @property
    def rho_plus(self) -> float:
        pos = self.positive
        return float(self.eigenvalues[pos].min()) if pos.size else float(self.essential_bottom)

    def field(self, j: int) -> Field:
        return Field(self.grid, self.fields[j])


def _tridiagonal_pairs(op: DiscreteOperator, k: int):
    try:
        w, v = eigh_tridiagonal(op.diag, op.off, select="i", select_range=(0, k - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenSolverError(str(exc)) from exc
    return w, v


def eigen_lowest(op: DiscreteOperator, k: int, tau_ker: float | None = None) -> SpectralData:
    """The k lowest eigenpairs of the discrete operator, residual-checked."""
    if not 1 <= k <= op.size:
        raise ValueError(f"k must lie in [1, {op.size}], got {k}")
    w, v = _tridiagonal_pairs(op, k)
    fields = _normalise(op.grid, v)
    grid = op.grid
    for j in range(k):
        res = op.apply(fields[j]) - w[j] * fields[j]
        r = l2_norm_values(grid, res)
        if not r <= 1e-8 * max(1.0, abs(w[j])):
            raise EigenSolverError(f"eigenpair {j} has residual {r:.3e}")
    gram = (fields * grid.weights) @ fields.T
    if np.max(np.abs(gram - np.eye(k))) > 1e-10:
        raise EigenSolverError("computed eigenfields are not orthonormal to 1e-10")
    if tau_ker is None:
        width = float(w[-1] - w[0]) if k > 1 else 0.0
        tau_ker = 1e-6 * max(width, 1.0)
    return SpectralData(
        grid=grid,
        lam=op.lam,
        eigenvalues=w,
        fields=fields,
        essential_bottom=op.essential_bottom,
        tau_ker=float(tau_ker),
        complete_below=float(w[-1]),
    )


def count_below(op: DiscreteOperator, level: float) -> int:
    w = eigh_tridiagonal(
        op.diag, op.off, eigvals_only=True, select="v", select_range=(-np.inf, level)
    )
    return int(w.size)


def eigen_below(op: DiscreteOperator, ceiling: float | None = None, tau_ker: float | None = None) -> SpectralData:
    """All eigenpairs below ``ceiling`` (default: the essential bottom) plus one more."""
    ceiling = op.essential_bottom if ceiling is None else ceiling
    if not np.isfinite(ceiling):
        raise SpectralWindowError("need a finite ceiling for the spectral window")
    n = count_below(op, ceiling)
    return eigen_lowest(op, min(n + 1, op.size), tau_ker)


class MorseCount(NamedTuple):
    count: int
    on_boundary: bool


def morse_count(spec: SpectralData, level: float) -> MorseCount:
    """Number of eigenvalues strictly below ``level`` (in units of the operator A)."""
    if level >= spec.essential_bottom:
        raise SpectralWindowError(
            f"level {level} is not below the essential bottom {spec.essential_bottom}"
        )
    if level + spec.tau_ker >= spec.complete_below:
        raise SpectralWindowError("level lies beyond the computed spectral window")
    mu = spec.eigenvalues
    count = int(np.sum(mu < level - spec.tau_ker))
    boundary = bool(np.any(np.abs(mu - level) <= spec.tau_ker))
    return MorseCount(count, boundary)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


@dataclass(frozen=True, eq=False)
class ProjectionSplit:
    """Orthogonal projections onto the kernel X0 and the negative space X-."""

    grid: Grid
    kernel_fields: np.ndarray = field(repr=False)
    negative_fields: np.ndarray = field(repr=False)
    tau_ker: float
    kernel_eigenvalues: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    negative_eigenvalues: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def dim_kernel(self) -> int:
        return self.kernel_fields.shape[0]

    @property
    def dim_negative(self) -> int:
        return self.negative_fields.shape[0]

    def _project(self, basis: np.ndarray, u) -> np.ndarray:
        vals = _values(u)
        if basis.shape[0] == 0:
            return np.zeros_like(vals)
        coeffs = basis @ (self.grid.weights * vals)
        return coeffs @ basis

    def kernel_coefficients(self, u) -> np.ndarray:
        return self.kernel_fields @ (self.grid.weights * _values(u))

    def P(self, u) -> np.ndarray:
        return self._project(self.kernel_fields, u)

    def Q_minus(self, u) -> np.ndarray:
        return self._project(self.negative_fields, u)

    def Q_plus(self, u) -> np.ndarray:
        vals = _values(u)
        return vals - self.P(vals) - self.Q_minus(vals)

    def Q(self, u) -> np.ndarray:
        vals = _values(u)
        return vals - self.P(vals)


def projections(spec: SpectralData, tau_ker: float | None = None) -> ProjectionSplit:
    tau = spec.tau_ker if tau_ker is None else float(tau_ker)
    mu = spec.eigenvalues
    if mu[-1] <= tau:
        raise SpectralWindowError(
            "largest computed eigenvalue is not above the kernel band; a kernel "
            "eigenvalue may lie beyond the computed window"
        )
    below = mu < spec.essential_bottom
    ker = np.flatnonzero((np.abs(mu) <= tau) & below)
    neg = np.flatnonzero((mu < -tau) & below)
    return ProjectionSplit(
        grid=spec.grid,
        kernel_fields=spec.fields[ker],
        negative_fields=spec.fields[neg],
        tau_ker=tau,
        kernel_eigenvalues=mu[ker],
        negative_eigenvalues=mu[neg],
    )


class DecayFit(NamedTuple):
    rate: float
    amplitude: float
    residual: float
    verified: bool


def decay_rate(e: Field, window: tuple[float, float], expect_decay: bool = True) -> DecayFit:
    """Least-squares fit log|u| ≈ log C - δ|x| over nodes with |x| in the window."""
    grid = e.grid
    lo, hi = map(float, window)
    if not 0 <= lo < hi:
        raise ValueError(f"bad fit window {window}")
    if hi > 0.9 * grid.half_length:
        raise ValueError("fit window must stay 10% of L away from the Dirichlet boundary")
    r = np.abs(grid.x)
    mask = (r >= lo) & (r <= hi)
    vals = np.abs(e.values[mask])
    if mask.sum() < 2 or np.any(vals <= np.finfo(float).tiny):
        raise ValueError("field vanishes on the fit window")
    y = np.log(vals)
    design = np.column_stack([np.ones(mask.sum()), r[mask]])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    delta = float(-coef[1])
    verified = delta > 0 if expect_decay else True
    if expect_decay and not verified:
        warnings.warn(f"fitted decay rate {delta:.4g} is not positive", RuntimeWarning, stacklevel=2)
    return DecayFit(delta, float(np.exp(coef[0])), rms, verified)


def full_eigensystem(op: DiscreteOperator) -> tuple[np.ndarray, np.ndarray]:
    """Every eigenpair of the discrete operator, fields normalised as in eigen_lowest."""
    w, v = eigh_tridiagonal(op.diag, op.off)
    return w, _normalise(op.grid, v)


def semigroup(eigs: tuple[np.ndarray, np.ndarray], grid: Grid, u, t: float) -> np.ndarray:
    """exp(-tA) u evaluated through a full eigensystem (t may be negative on X-)."""
    w, fields = eigs
    coeffs = fields @ (grid.weights * _values(u))
    return (np.exp(-w * t) * coeffs) @ fields


def smoothing_constant(
    op: DiscreteOperator,
    split: ProjectionSplit,
    rho_plus: float,
    probes: Sequence,
    t_grid: Sequence[float],
    eigs=None,
) -> float:
    """max over probes in X+ and t of sqrt(t) e^{ρ+ t} ‖S(t)u‖_{H¹} / ‖u‖_{L²}."""
    eigs = full_eigensystem(op) if eigs is None else eigs
    grid = op.grid
    w, fields = eigs
    # drop round-off components along X0 and X-, which e^{ρ+ t} would amplify
    keep = w > split.tau_ker
    best = 0.0
    for probe in probes:
        u = split.Q_plus(probe)
        norm = l2_norm_values(grid, u)
        if norm == 0:
            continue
        coeffs = np.where(keep, fields @ (grid.weights * u), 0.0)
        for t in t_grid:
            st = (np.exp(-w * t) * coeffs) @ fields
            ratio = np.sqrt(t) * np.exp(rho_plus * t) * h1_norm_values(grid, st) / norm
            best = max(best, float(ratio))
    return best

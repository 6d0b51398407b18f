"""Parabolic flows u_t = -Au + G(u, s), their diagnostics and tail certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .grid import CutoffProfile, Field, Grid, cutoff_weights, h1_norm_values, l2_norm_values, quintic_profile
from .nonlinear import NonlinearitySpec, lipschitz_growth_bounds
from .spectral import DiscreteOperator, ProjectionSplit, SplitPotential, asymptotic_bottom, as_function

FAMILIES = ("plain", "homotopy_zero", "homotopy_infinity", "resonant")


class BlowUpError(ArithmeticError):
    def __init__(self, t: float, norm: float, ceiling: float):
        super().__init__(f"H1 norm {norm:.3e} exceeded ceiling {ceiling:.3e} at t = {t:.6g}")
        self.t, self.norm, self.ceiling = t, norm, ceiling


class CertificateInapplicable(ValueError):
    """The trajectory leaves the H¹ ball the tail certificate was built for."""


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


@dataclass(frozen=True, eq=False)
class FlowSpec:
    operator: DiscreteOperator
    nonlinearity: NonlinearitySpec | None = None
    family: str = "plain"
    s: float = 0.0
    split: ProjectionSplit | None = None
    _factors: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown flow family {self.family!r}")
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"homotopy parameter must lie in [0, 1], got {self.s}")
        if self.family == "resonant" and (self.split is None or self.split.dim_kernel < 1):
            raise ValueError("resonant family needs a projection split with a nontrivial kernel")
        if self.family == "homotopy_zero" and (self.nonlinearity is None or self.nonlinearity.alpha is None):
            raise ValueError("homotopy_zero needs a declared alpha")
        if self.family == "homotopy_infinity" and (self.nonlinearity is None or self.nonlinearity.omega is None):
            raise ValueError("homotopy_infinity needs a declared omega")

    @property
    def grid(self) -> Grid:
        return self.operator.grid

    def with_s(self, s: float) -> "FlowSpec":
        return FlowSpec(self.operator, self.nonlinearity, self.family, float(s), self.split)

    def _F(self, u: np.ndarray) -> np.ndarray:
        if self.nonlinearity is None:
            return np.zeros_like(u)
        return self.nonlinearity(self.grid.x, u)

    def _limit(self) -> np.ndarray:
        pot = self.nonlinearity.alpha if self.family == "homotopy_zero" else self.nonlinearity.omega
        return pot(self.grid.x) * np.ones(self.grid.points)

    def rhs_values(self, u) -> np.ndarray:
        u = _values(u)
        s = self.s
        if self.family == "plain":
            out = self._F(u)
        elif self.family in ("homotopy_zero", "homotopy_infinity"):
            out = (1.0 - s) * self._F(u) + s * self._limit() * u
        else:
            sp = self.split
            pu = sp.P(u)
            fv = self._F(pu + s * (u - pu))
            pf = sp.P(fv)
            out = pf + s * (fv - pf)
        if not np.all(np.isfinite(out)):
            raise ArithmeticError("right-hand side is not finite")
        return out

    def velocity(self, u) -> np.ndarray:
        """-Au + G(u, s) with Dirichlet ends."""
        u = _values(u)
        out = -self.operator.apply(u) + self.rhs_values(u)
        out[0] = out[-1] = 0.0
        return out

    def lipschitz(self) -> float:
        """Pointwise Lipschitz bound of G in u (used for the step-size guard)."""
        if self.nonlinearity is None:
            return 0.0
        f = self.nonlinearity
        lf = 0.0
        if f.lipschitz is not None:
            b = lipschitz_growth_bounds(f, self.grid)
            lf = max(b.lipschitz, b.sup_l)
        if self.family in ("homotopy_zero", "homotopy_infinity"):
            lf = max(lf, float(np.max(np.abs(self._limit()))))
        return lf

    def dt_max(self) -> float:
        bounds = [np.inf]
        lf = self.lipschitz()
        if lf > 0:
            bounds.append(0.5 / lf)
        mu = self.operator.lowest_eigenvalue
        if mu < 0:
            bounds.append(1.0 / abs(mu))
        return float(min(bounds))

    def _factor(self, dt: float):
        fac = self._factors.get(dt)
        if fac is None:
            op = self.operator
            ab = np.zeros((2, op.size))
            ab[0, 1:] = dt * op.off
            ab[1] = 1.0 + dt * op.diag
            fac = cholesky_banded(ab)
            self._factors[dt] = fac
        return fac

    def step_values(self, u: np.ndarray, dt: float, linear: bool = False) -> np.ndarray:
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        mu = self.operator.lowest_eigenvalue
        if mu < 0 and dt >= 1.0 / abs(mu):
            raise ValueError(f"dt = {dt} makes I + dt·A singular or indefinite (lowest eigenvalue {mu:.6g})")
        if not linear and dt > self.dt_max() * (1 + 1e-12):
            raise ValueError(f"dt = {dt} exceeds the stability bound {self.dt_max():.6g}")
        u = np.asarray(u, dtype=float)
        rhs = u[1:-1] if linear else u[1:-1] + dt * self.rhs_values(u)[1:-1]
        out = np.zeros_like(u)
        out[1:-1] = cho_solve_banded((self._factor(dt), False), rhs)
        return out

    def energy_values(self, u) -> float:
        u = _values(u)
        quad = 0.5 * self.operator.quadratic_form(u)
        f = self.nonlinearity
        if f is None:
            return quad
        x, w = self.grid.x, self.grid.weights
        s = self.s
        if self.family == "plain":
            pot = f.primitive_values(x, u)
        elif self.family in ("homotopy_zero", "homotopy_infinity"):
            pot = (1.0 - s) * f.primitive_values(x, u) + 0.5 * s * self._limit() * u * u
        else:
            pu = self.split.P(u)
            pot = f.primitive_values(x, pu + s * (u - pu))
        return float(quad - np.dot(w, pot))


def duhamel_linear(eigs: tuple[np.ndarray, np.ndarray], grid: Grid, u0, g, t: float) -> np.ndarray:
    """S(t)u0 + ∫_0^t S(t-τ) g dτ for a time-independent forcing g, mode by mode."""
    w, fields = eigs
    a = fields @ (grid.weights * _values(u0))
    b = fields @ (grid.weights * _values(g))
    # (1 - e^{-μt})/μ, with the μ -> 0 limit t
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(np.abs(w) * t > 1e-12, -np.expm1(-w * t) / w, t)
    return (np.exp(-w * t) * a + kernel * b) @ fields


def rhs(flow: FlowSpec, u: Field) -> Field:
    return Field(flow.grid, flow.rhs_values(u))


def step(flow: FlowSpec, u: Field, dt: float) -> Field:
    """One IMEX step (I + dt·A)u⁺ = u + dt·G(u, s)."""
    return Field(flow.grid, flow.step_values(u.values, dt))


def energy(flow: FlowSpec, u: Field) -> float:
    """½⟨Au, u⟩ - ∫𝓕 for the flow's family (the gradient structure of G)."""
    return flow.energy_values(u)


@dataclass(frozen=True)
class EvolvePolicy:
    dt: float = 0.01
    stride: int = 10
    h1_ceiling: float = 1e8
    tail_ns: tuple = ()
    stop_velocity: float | None = None
    profile: CutoffProfile | None = None


@dataclass
class Trajectory:
    grid: Grid
    dt: float
    stride: int
    times: np.ndarray
    fields: np.ndarray = field(repr=False)
    h1: np.ndarray = field(repr=False)
    l2: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    dissipation: np.ndarray = field(repr=False)
    tails: dict = field(default_factory=dict, repr=False)
    p_norm: np.ndarray | None = field(default=None, repr=False)
    q_norm: np.ndarray | None = field(default=None, repr=False)
    stopped_early: bool = False

    @property
    def final(self) -> Field:
        return Field(self.grid, self.fields[-1])

    def __len__(self):
        return len(self.times)


def evolve(flow: FlowSpec, u0, T: float, policy: EvolvePolicy | None = None, t0: float = 0.0) -> Trajectory:
    policy = policy or EvolvePolicy()
    if not T > 0:
        raise ValueError(f"final time must be positive, got {T}")
    dt = min(policy.dt, flow.dt_max())
    nsteps = int(np.ceil(T / dt - 1e-9))
    dt = T / nsteps
    grid = flow.grid
    profile = policy.profile or quintic_profile()
    cut = {n: cutoff_weights(grid, n, profile).values * grid.weights for n in policy.tail_ns}
    u = _values(u0).astype(float).copy()
    u[0] = u[-1] = 0.0
    w = grid.weights

    rec = {k: [] for k in ("t", "u", "h1", "l2", "E", "D", "P", "Q")}
    tails = {n: [] for n in policy.tail_ns}

    def record(t, u):
        vel = flow.velocity(u)
        h1 = h1_norm_values(grid, u)
        if not np.isfinite(h1) or h1 > policy.h1_ceiling:
            raise BlowUpError(t, h1, policy.h1_ceiling)
        rec["t"].append(t)
        rec["u"].append(u.copy())
        rec["h1"].append(h1)
        rec["l2"].append(l2_norm_values(grid, u))
        rec["E"].append(flow.energy_values(u))
        rec["D"].append(float(np.dot(w, vel * vel)))
        if flow.split is not None:
            pu = flow.split.P(u)
            rec["P"].append(l2_norm_values(grid, pu))
            rec["Q"].append(h1_norm_values(grid, u - pu))
        for n, cw in cut.items():
            tails[n].append(float(np.dot(cw, u * u)))
        return float(np.sqrt(rec["D"][-1]))

    speed = record(t0, u)
    stopped = False
    for k in range(1, nsteps + 1):
        u = flow.step_values(u, dt)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(t0 + k * dt, float("inf"), policy.h1_ceiling)
        if k % policy.stride == 0 or k == nsteps:
            speed = record(t0 + k * dt, u)
            if policy.stop_velocity is not None and speed < policy.stop_velocity:
                stopped = True
                break

    as_arr = lambda key: np.array(rec[key])
    return Trajectory(
        grid=grid,
        dt=dt,
        stride=policy.stride,
        times=as_arr("t"),
        fields=np.array(rec["u"]),
        h1=as_arr("h1"),
        l2=as_arr("l2"),
        energies=as_arr("E"),
        dissipation=as_arr("D"),
        tails={n: np.array(v) for n, v in tails.items()},
        p_norm=as_arr("P") if flow.split is not None else None,
        q_norm=as_arr("Q") if flow.split is not None else None,
        stopped_early=stopped,
    )


@dataclass
class DissipationReport:
    residuals: np.ndarray
    max_residual: float
    envelope: float
    max_increase: float


def dissipation_residual(traj: Trajectory) -> DissipationReport:
    """|ΔE/Δt + ‖Δu/Δt‖²| between consecutive recorded samples."""
    dt = np.diff(traj.times)
    if dt.size == 0:
        return DissipationReport(np.zeros(0), 0.0, 0.0, 0.0)
    du = np.diff(traj.fields, axis=0) / dt[:, None]
    speed2 = du**2 @ traj.grid.weights
    dE = np.diff(traj.energies) / dt
    res = np.abs(dE + speed2)
    # first-order scheme: the residual should scale like dt times the local speed²
    envelope = float(np.max(speed2) * traj.dt) if speed2.size else 0.0
    return DissipationReport(res, float(res.max()), envelope, float(np.max(np.diff(traj.energies))))


@dataclass
class TailBoundCertificate:
    R: float
    eps: float
    gap: float
    n0: int
    ns: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    eps_respects_gap: bool = True

    def gamma_at(self, n: int) -> float:
        idx = np.flatnonzero(self.ns == n)
        if idx.size == 0:
            raise KeyError(f"no certificate entry for n = {n}")
        return float(self.gamma[idx[0]])


def _split(obj) -> SplitPotential:
    if obj is None:
        return SplitPotential(0.0)
    return obj if isinstance(obj, SplitPotential) else SplitPotential(obj)


def tail_constants(
    V,
    a,
    b,
    R: float,
    lam: float,
    grid: Grid,
    profile: CutoffProfile | None = None,
    ns: Sequence[int] | None = None,
    eps: float | None = None,
) -> TailBoundCertificate:
    """ε, n₀, β_n and γ_n of the tail estimate, with grid-quadrature norms."""
    profile = profile or quintic_profile()
    V, a = _split(V), _split(a)
    bvals = np.zeros(grid.points) if b is None else as_function(b)(grid.x) * np.ones(grid.points)
    diff = SplitPotential(lambda x: V.bounded(x) - a.bounded(x))
    gap = asymptotic_bottom(diff, grid) - lam
    if not gap > 0:
        raise ValueError(f"tail estimate needs a positive gap, got rho(V_inf - a_inf) - lambda = {gap:.6g}")
    eps_default = 0.5 * gap
    eps_used = eps_default if eps is None else float(eps)
    if not eps_used > 0:
        raise ValueError("eps must be positive")
    lhs = diff.bounded_values(grid.x) * np.ones(grid.points) - lam

    def holds(n, e):
        phi = cutoff_weights(grid, n, profile).values
        # a cut-off that vanishes on the whole grid proves nothing
        return bool(np.any(phi > 0) and np.all(phi * lhs >= e * phi - 1e-14))

    candidates = range(1, int(np.ceil(grid.half_length)) + 1)
    respects = any(holds(n, eps_used) for n in candidates)
    e_for_n0 = eps_used if respects else eps_default
    n0 = next((n for n in candidates if holds(n, e_for_n0)), None)
    if n0 is None:
        raise ValueError("no threshold index n0 on this grid")
    ns = np.arange(n0, n0 + 6) if ns is None else np.asarray(ns, dtype=int)
    beta, gamma = [], []
    for n in ns:
        phi = cutoff_weights(grid, n, profile).values
        bn = 4.0 * np.sqrt(2.0) * profile.lipschitz / n + 2.0 * sum(V.decaying_norms(grid, phi))
        an = sum(a.decaying_norms(grid, phi))
        bnorm = float(np.sqrt(grid.integrate((phi * bvals) ** 2)))
        beta.append(bn)
        gamma.append(R * R / eps_used * (bn + an) + R * bnorm)
    return TailBoundCertificate(
        R=float(R),
        eps=eps_used,
        gap=float(gap),
        n0=int(n0),
        ns=ns,
        beta=np.array(beta),
        gamma=np.array(gamma),
        eps_respects_gap=respects,
    )


@dataclass
class TailVerdict:
    ok: bool
    table: list
    first_violation: tuple | None


def tail_verify(traj: Trajectory, cert: TailBoundCertificate, profile: CutoffProfile | None = None) -> TailVerdict:
    """Check ∫φ_n|u(t)|² ≤ e^{-2ε(t-t₀)}‖u(t₀)‖² + γ_n at every recorded (t, n)."""
    if np.max(traj.h1) > cert.R * (1 + 1e-12):
        raise CertificateInapplicable(f"trajectory reaches H1 norm {np.max(traj.h1):.6g} > R = {cert.R:.6g}")
    profile = profile or quintic_profile()
    grid = traj.grid
    t0 = traj.times[0]
    mass0 = traj.l2[0] ** 2
    table, violation = [], None
    for n, gamma in zip(cert.ns, cert.gamma):
        cw = cutoff_weights(grid, int(n), profile).values * grid.weights
        lhs = (traj.fields**2) @ cw
        rhs = np.exp(-2.0 * cert.eps * (traj.times - t0)) * mass0 + gamma
        for t, l, r in zip(traj.times, lhs, rhs):
            row = (float(t), int(n), float(l), float(r), float(r - l))
            table.append(row)
            if l > r and violation is None:
                violation = row
    return TailVerdict(violation is None, table, violation)

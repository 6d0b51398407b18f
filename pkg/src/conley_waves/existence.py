"""Hypothesis checks, index exponents, equilibria and connecting orbits."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .grid import Field, Grid, h1_norm_values, l2_norm_values
from .nonlinear import (
    NonlinearitySpec,
    ResonanceReport,
    certify_structure,
    limit_potential_check,
    resonance_conditions,
)
from .semiflow import EvolvePolicy, FlowSpec, Trajectory, evolve
from .spectral import (
    ProjectionSplit,
    SpectralData,
    SplitPotential,
    assemble,
    asymptotic_bottom,
    eigen_below,
    morse_count,
    projections,
)


class PreconditionError(ValueError):
    """Inputs fall outside the setting a theorem is stated for."""


class ResonantBoundaryError(PreconditionError):
    """λ sits inside the kernel band of a linearisation; use the resonant scenario."""


class NoConvergence(ArithmeticError):
    def __init__(self, message: str, endpoint: np.ndarray, residual: float):
        super().__init__(message)
        self.endpoint = endpoint
        self.residual = residual


class NoUnstableDirection(ValueError):
    pass


@dataclass
class HypothesisItem:
    name: str
    passed: bool | None
    margin: float | None = None
    detail: str = ""


@dataclass
class Equilibrium:
    values: np.ndarray = field(repr=False)
    residual: float
    energy: float
    h1: float
    morse_index: int | None = None
    lowest_linearized: float | None = None
    degenerate: bool = False
    newton_iterations: int = 0

    def field(self, grid: Grid) -> Field:
        return Field(grid, self.values)


@dataclass
class ExistenceVerdict:
    scenario: str
    lam: float
    checklist: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)
    positive: bool = False
    conclusion: str = ""
    conditions: dict = field(default_factory=dict)
    corollary: dict = field(default_factory=dict)
    equilibria: list = field(default_factory=list)
    orbits: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def add(self, name, passed, margin=None, detail=""):
        self.checklist.append(HypothesisItem(name, passed, None if margin is None else float(margin), detail))

    @property
    def hypotheses_met(self) -> bool:
        return all(item.passed is True for item in self.checklist)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "lambda": self.lam,
            "hypotheses": [asdict(i) for i in self.checklist],
            "hypotheses_met": self.hypotheses_met,
            "exponents": self.exponents,
            "positive": self.positive,
            "conclusion": self.conclusion,
            "conditions": self.conditions,
            "corollary": self.corollary,
            "equilibria": [
                {k: v for k, v in asdict(e).items() if k != "values"} if isinstance(e, Equilibrium) else e
                for e in self.equilibria
            ],
            "orbits": self.orbits,
            "extras": self.extras,
        }


def _as_split(obj) -> SplitPotential:
    if obj is None:
        return SplitPotential(0.0)
    return obj if isinstance(obj, SplitPotential) else SplitPotential(obj)


def _bottom_of(V: SplitPotential, other: SplitPotential | None, grid: Grid) -> float:
    if other is None:
        return asymptotic_bottom(SplitPotential(V.bounded), grid)
    return asymptotic_bottom(SplitPotential(lambda x: V.bounded(x) - other.bounded(x)), grid)


def shifted_count(V: SplitPotential, shift: SplitPotential | None, lam: float, grid: Grid, tau_ker=None):
    """(d⁻(V - shift, λ), boundary flag, spectral data)."""
    pot = V if shift is None else V.minus(shift)
    op = assemble(grid, pot, lam)
    if not op.essential_bottom > 0:
        raise PreconditionError("lambda is not below the asymptotic bottom of the shifted potential")
    spec = eigen_below(op, tau_ker=tau_ker)
    mc = morse_count(spec, 0.0)
    return mc.count, mc.on_boundary, spec


def check_nonresonant(V, f: NonlinearitySpec, lam: float, grid: Grid, tau_ker: float | None = None,
                      probes: int = 20000) -> ExistenceVerdict:
    V = _as_split(V)
    if f.alpha is None or f.omega is None or f.sign_bound is None:
        raise PreconditionError("the non-resonant scenario needs declared alpha, omega and a")
    verdict = ExistenceVerdict("nonresonant", float(lam))
    bottoms = {
        "rho(V_inf - a_inf)": _bottom_of(V, f.sign_bound, grid),
        "rho(V_inf - alpha_inf)": _bottom_of(V, f.alpha, grid),
        "rho(V_inf - omega_inf)": _bottom_of(V, f.omega, grid),
    }
    gap = min(bottoms.values()) - lam
    if not gap > 0:
        raise PreconditionError(f"lambda = {lam} is not below {min(bottoms, key=bottoms.get)} = {min(bottoms.values())}")
    verdict.add("lambda below asymptotic bottoms", True, gap)

    structure = certify_structure(f, grid, probes=probes)
    verdict.add("(f1) c in L2", bool(np.isfinite(structure.forcing_l2)), structure.forcing_l2)
    verdict.add("(f2) Lipschitz bound", structure.lipschitz_ok, -structure.lipschitz_worst)
    verdict.add("(f3) sign bound", structure.sign_ok, -structure.sign_worst)
    for which in ("zero", "infinity"):
        rep = limit_potential_check(f, which, grid)
        verdict.add(f"limit potential at {which}", rep.converged, float(rep.discrepancies[-1]))

    d_alpha, b_alpha, _ = shifted_count(V, f.alpha, lam, grid, tau_ker)
    d_omega, b_omega, _ = shifted_count(V, f.omega, lam, grid, tau_ker)
    if b_alpha or b_omega:
        raise ResonantBoundaryError("lambda lies in the kernel band of -Δ+V-alpha or -Δ+V-omega; use the resonant scenario")
    verdict.add("lambda not in spectra of the linearisations", True)
    verdict.exponents = {"d_minus_V_alpha": d_alpha, "d_minus_V_omega": d_omega}
    differ = d_alpha != d_omega
    verdict.add("Morse counts differ", differ, float(abs(d_alpha - d_omega)))
    verdict.positive = verdict.hypotheses_met
    verdict.conclusion = (
        "nonzero equilibrium and connecting orbit to 0 predicted" if verdict.positive else "no prediction"
    )
    return verdict


def k_infinity(d_minus: int, dim_kernel: int, conditions: dict) -> int | None:
    plus = conditions.get("LL+") is True or conditions.get("SR+") is True
    minus = conditions.get("LL-") is True or conditions.get("SR-") is True
    if plus and not minus:
        return d_minus + dim_kernel
    if minus and not plus:
        return d_minus
    return None


def _constant_value(pot: SplitPotential | None, grid: Grid) -> float | None:
    if pot is None:
        return None
    vals = pot(grid.x) * np.ones(grid.points)
    if np.ptp(vals) <= 1e-14 * (1 + np.max(np.abs(vals))):
        return float(vals[0])
    return None


def corollary_clauses(d_minus: int, dim_kernel: int, k_inf: int, abar: float, spec: SpectralData,
                      d_shifted: int, d_at_shift: int, plus: bool, minus: bool) -> dict:
    """Evaluate clauses (i)-(iv) for a constant limit potential ᾱ.

    ``spec`` is the spectrum of -Δ+V-λ, ``d_shifted`` = d⁻(V-ᾱ, λ) computed on
    its own operator and ``d_at_shift`` = d⁻(V, ᾱ+λ) read from ``spec``.
    """
    mu = spec.eigenvalues[spec.below_bottom]
    tau = spec.tau_ker
    between_up = bool(np.any((mu > tau) & (mu < abar - tau)))
    between_down = bool(np.any((mu > abar + tau) & (mu < -tau)))
    out = {}
    out["i"] = {
        "applies": plus and abar < 0,
        "chain": "d-(V-a,l) = d-(V,a+l) <= d-(V,l) < k_inf",
        "holds": d_shifted == d_at_shift and d_at_shift <= d_minus < k_inf,
    }
    out["ii"] = {
        "applies": minus and abar > 0,
        "chain": "d-(V-a,l) = d-(V,a+l) > d-(V,l) = k_inf",
        "holds": d_shifted == d_at_shift and d_at_shift > d_minus == k_inf,
    }
    out["iii"] = {
        "applies": plus and abar > 0 and between_up,
        "chain": "k_inf = d-(V,l) + dim X0 < d-(V,a+l) = d-(V-a,l)",
        "holds": k_inf == d_minus + dim_kernel and k_inf < d_at_shift == d_shifted,
    }
    out["iv"] = {
        "applies": minus and abar < 0 and between_down,
        "chain": "k_inf = d-(V,l) > d-(V,a+l) = d-(V-a,l)",
        "holds": k_inf == d_minus and k_inf > d_at_shift == d_shifted,
    }
    return out


def check_resonant(V, f: NonlinearitySpec, lam: float, grid: Grid, scenario: str = "resonant_plain",
                   tau_ker: float | None = None, s_max: float = 1e3, stability_factor: float = 10.0,
                   probes: int = 20000) -> tuple[ExistenceVerdict, SpectralData, ResonanceReport]:
    if scenario not in ("resonant_plain", "resonant_trivial_solution"):
        raise ValueError(f"unknown resonant scenario {scenario!r}")
    V = _as_split(V)
    verdict = ExistenceVerdict(scenario, float(lam))
    rho = _bottom_of(V, None, grid)
    if not rho > lam:
        raise PreconditionError(f"lambda = {lam} is not below rho(V_inf) = {rho}")
    op = assemble(grid, V, lam)
    spec = eigen_below(op, tau_ker=tau_ker)
    split = projections(spec)
    if split.dim_kernel == 0:
        raise PreconditionError("lambda is not within tau_ker of an eigenvalue of -Δ+V")
    d_minus = split.dim_negative
    verdict.add("lambda below rho(V_inf)", True, rho - lam)
    verdict.add("lambda is an eigenvalue (kernel band)", True, float(np.max(np.abs(split.kernel_eigenvalues))))

    structure = certify_structure(f, grid, probes=probes)
    verdict.add("(f1) c in L2", bool(np.isfinite(structure.forcing_l2)), structure.forcing_l2)
    verdict.add("(f1)' uniform bound m", structure.bound_ok, -structure.bound_worst)
    verdict.add("(f2) Lipschitz bound", structure.lipschitz_ok, -structure.lipschitz_worst)

    report = resonance_conditions(f, grid, s_max=s_max, stability_factor=stability_factor)
    verdict.conditions = {k: v for k, v in report.conditions.items()}
    verdict.extras["degenerate_sign"] = report.degenerate
    certified = report.certified()
    verdict.add("resonance condition certified", bool(certified), None, ",".join(certified))
    k_inf = k_infinity(d_minus, split.dim_kernel, report.conditions)
    verdict.exponents = {"d_minus": d_minus, "dim_kernel": split.dim_kernel, "k_inf": k_inf}
    plus = report.conditions.get("LL+") is True or report.conditions.get("SR+") is True
    minus = report.conditions.get("LL-") is True or report.conditions.get("SR-") is True

    if scenario == "resonant_trivial_solution":
        c = f.c(grid.x)
        verdict.add("f(x,0) = 0", bool(np.all(c == 0.0)), float(np.max(np.abs(c))))
        verdict.add("(f3) sign bound", structure.sign_ok, -structure.sign_worst)
        if f.alpha is None or f.sign_bound is None:
            raise PreconditionError("the trivial-solution scenario needs declared alpha and a")
        lim = limit_potential_check(f, "zero", grid)
        verdict.add("limit potential at zero", lim.converged, float(lim.discrepancies[-1]))
        low = min(rho, _bottom_of(V, f.alpha, grid), _bottom_of(V, f.sign_bound, grid))
        verdict.add("lambda below asymptotic bottoms", low > lam, low - lam)
        d_alpha, b_alpha, _ = shifted_count(V, f.alpha, lam, grid, tau_ker)
        verdict.exponents["d_minus_V_alpha"] = d_alpha
        verdict.exponents["alpha_boundary"] = b_alpha
        clause_i = plus and d_minus + split.dim_kernel != d_alpha
        clause_ii = minus and d_minus != d_alpha
        verdict.add("index inequality (i) or (ii)", clause_i or clause_ii, None,
                    "i" if clause_i else ("ii" if clause_ii else ""))
        abar = _constant_value(f.alpha, grid)
        if abar is not None:
            d_at_shift = int(np.sum(spec.eigenvalues[spec.below_bottom] < abar - spec.tau_ker))
            verdict.corollary = corollary_clauses(d_minus, split.dim_kernel, k_inf if k_inf is not None else -1,
                                                  abar, spec, d_alpha, d_at_shift, plus, minus)
            verdict.corollary["alpha_bar"] = abar
        verdict.positive = verdict.hypotheses_met
        verdict.conclusion = "nonzero solution predicted" if verdict.positive else "hypotheses not met"
    else:
        verdict.positive = verdict.hypotheses_met
        verdict.conclusion = "a solution exists and the solution set is bounded" if verdict.positive else "hypotheses not met"
    return verdict, spec, report


def q_bound(m_norm: float, K: float, rho_plus: float, rho_minus: float | None = None) -> float:
    """R_∞ = 1.1·(2K‖m‖√(π/ρ₊) + 2‖m‖/ρ₋); the X₋ term is dropped when ρ₋ is None."""
    if m_norm < 0 or K < 0:
        raise ValueError("norms and constants must be non-negative")
    if not rho_plus > 0 or (rho_minus is not None and not rho_minus > 0):
        raise ValueError("decay rates must be positive")
    plus = 2.0 * K * m_norm * np.sqrt(np.pi / rho_plus)
    minus = 0.0 if rho_minus is None else 2.0 * m_norm / rho_minus
    return 1.1 * (plus + minus)


def sphere_samples(split: ProjectionSplit, R0: float, seed: int = 0) -> np.ndarray:
    d = split.dim_kernel
    if d == 0:
        raise ValueError("empty kernel: no sphere to sample")
    if d == 1:
        coeffs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        axes = np.vstack([np.eye(d), -np.eye(d)])
        rand = rng.normal(size=(100 * d, d))
        rand /= np.linalg.norm(rand, axis=1, keepdims=True)
        coeffs = np.vstack([axes, rand])
    return R0 * coeffs @ split.kernel_fields


@dataclass
class GeometricMargin:
    alpha_geo: float
    R0: float
    sign: int
    violation: tuple | None
    samples: int
    doublings: int = 0


def geometric_margin(f: NonlinearitySpec, split: ProjectionSplit, Q_samples: Sequence, R0: float, sign: int = 1,
                     s_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0), seed: int = 0) -> GeometricMargin:
    """min of ±⟨v, F(v + s w)⟩ over the sampled sphere ‖v‖ = R₀ in X₀, w and s."""
    grid = split.grid
    vs = sphere_samples(split, R0, seed)
    ws = [np.zeros(grid.points)] if len(Q_samples) == 0 else [np.asarray(getattr(w, "values", w)) for w in Q_samples]
    wq = grid.weights
    best, where = np.inf, None
    for i, v in enumerate(vs):
        for j, w in enumerate(ws):
            for s in s_grid:
                val = sign * float(np.dot(wq, v * f(grid.x, v + s * w)))
                if val < best:
                    best, where = val, (i, j, float(s))
    return GeometricMargin(best, float(R0), int(sign), None if best > 0 else where, len(vs) * len(ws) * len(s_grid))


def search_R0(f, split, Q_samples, sign=1, R_init=1.0, max_doublings=20, **kw) -> GeometricMargin:
    R0 = float(R_init)
    for k in range(max_doublings + 1):
        gm = geometric_margin(f, split, Q_samples, R0, sign, **kw)
        if gm.alpha_geo > 0:
            gm.doublings = k
            return gm
        R0 *= 2.0
    gm.doublings = max_doublings
    return gm


@dataclass
class IsolatingNeighborhood:
    R_inf: float
    alpha_geo: float
    R0: float
    split: ProjectionSplit = field(repr=False)

    def contains(self, u) -> bool:
        u = getattr(u, "values", u)
        pu = self.split.P(u)
        grid = self.split.grid
        return l2_norm_values(grid, pu) <= self.R0 and h1_norm_values(grid, u - pu) <= self.R_inf

    def boundary_exits(self, flow: FlowSpec, traj: Trajectory, sign: int = 1) -> list[dict]:
        """Signed derivative of ‖Pu‖² at the first sample past each outward crossing of ‖Pu‖ = R₀."""
        split, grid = self.split, self.split.grid
        pn = np.array([l2_norm_values(grid, split.P(u)) for u in traj.fields])
        out = []
        for j in range(1, len(pn)):
            if pn[j - 1] < self.R0 <= pn[j]:
                u = traj.fields[j]
                pu = split.P(u)
                deriv = 2.0 * float(np.dot(grid.weights, pu * flow.nonlinearity(grid.x, pu + flow.s * (u - pu))))
                out.append({
                    "t": float(traj.times[j]),
                    "p_norm": float(pn[j]),
                    "signed_derivative": sign * deriv,
                    "threshold": 2.0 * self.alpha_geo,
                    "ok": sign * deriv > 2.0 * self.alpha_geo,
                })
        return out


def isolating_neighborhood(R_inf: float, alpha_geo: float, R0: float, split: ProjectionSplit) -> IsolatingNeighborhood:
    if not (R_inf > 0 and alpha_geo > 0 and R0 > 0):
        raise ValueError("R_inf, alpha_geo and R0 must all be positive")
    return IsolatingNeighborhood(float(R_inf), float(alpha_geo), float(R0), split)


@dataclass(frozen=True)
class EquilibriumPolicy:
    dt: float = 0.02
    T_max: float = 50.0
    switch_tol: float = 1e-3
    newton_tol: float = 1e-10
    max_newton: int = 60
    tau_ker: float = 1e-6


def residual_values(flow: FlowSpec, u: np.ndarray) -> np.ndarray:
    return flow.velocity(u)


def linearization_spectrum(flow: FlowSpec, u: np.ndarray, k: int = 4) -> np.ndarray:
    """Lowest eigenvalues of A - diag(f_u(x, u)) (negative ones are unstable directions)."""
    op = flow.operator
    fu = flow.nonlinearity.f_u(flow.grid.x, u) if flow.nonlinearity is not None else np.zeros_like(u)
    d = op.diag - fu[1:-1]
    k = min(k, op.size)
    return eigh_tridiagonal(d, op.off, eigvals_only=True, select="i", select_range=(0, k - 1))


def linearization_modes(flow: FlowSpec, u: np.ndarray, k: int = 4):
    op = flow.operator
    fu = flow.nonlinearity.f_u(flow.grid.x, u) if flow.nonlinearity is not None else np.zeros_like(u)
    w, v = eigh_tridiagonal(op.diag - fu[1:-1], op.off, select="i", select_range=(0, min(k, op.size) - 1))
    fields = np.zeros((v.shape[1], flow.grid.points))
    fields[:, 1:-1] = v.T / np.sqrt(flow.grid.spacing)
    return w, fields


def newton(flow: FlowSpec, u0: np.ndarray, tol: float = 1e-10, max_iter: int = 60) -> tuple[np.ndarray, float, int]:
    """Damped Newton on R(u) = -Au + F(u) with a tridiagonal Jacobian."""
    if flow.family != "plain":
        raise ValueError("Newton runs on the plain flow")
    grid, op = flow.grid, flow.operator
    u = np.asarray(u0, dtype=float).copy()
    u[0] = u[-1] = 0.0
    r = residual_values(flow, u)
    res = l2_norm_values(grid, r)
    it = 0
    while res > tol and it < max_iter:
        it += 1
        fu = flow.nonlinearity.f_u(grid.x, u)[1:-1] if flow.nonlinearity is not None else 0.0
        ab = np.zeros((3, op.size))
        ab[0, 1:] = -op.off
        ab[1] = -op.diag + fu
        ab[2, :-1] = -op.off
        try:
            delta = solve_banded((1, 1), ab, -r[1:-1])
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step > 1e-8:
            trial = u.copy()
            trial[1:-1] += step * delta
            rt = residual_values(flow, trial)
            rest = l2_norm_values(grid, rt)
            if np.isfinite(rest) and rest < (1 - 1e-4 * step) * res:
                break
            step *= 0.5
        else:
            break
        u, r, res = trial, rt, rest
    return u, res, it


def _equilibrium(flow: FlowSpec, u: np.ndarray, res: float, it: int, tau: float) -> Equilibrium:
    lin = linearization_spectrum(flow, u, k=6)
    return Equilibrium(
        values=u,
        residual=float(res),
        energy=flow.energy_values(u),
        h1=h1_norm_values(flow.grid, u),
        morse_index=int(np.sum(lin < -tau)),
        lowest_linearized=float(lin[np.argmin(np.abs(lin))]),
        degenerate=bool(np.min(np.abs(lin)) <= tau),
        newton_iterations=it,
    )


def find_equilibrium(flow: FlowSpec, seed, policy: EquilibriumPolicy | None = None, flow_phase: bool = True) -> Equilibrium:
    """Phase 1: evolve until ‖u̇‖ < switch_tol; phase 2: damped Newton."""
    policy = policy or EquilibriumPolicy()
    u = np.asarray(getattr(seed, "values", seed), dtype=float).copy()
    if flow_phase:
        traj = evolve(flow, u, policy.T_max, EvolvePolicy(dt=policy.dt, stride=10, stop_velocity=policy.switch_tol))
        u = traj.fields[-1].copy()
    endpoint = u.copy()
    u, res, it = newton(flow, u, policy.newton_tol, policy.max_newton)
    if not res <= policy.newton_tol:
        raise NoConvergence(f"Newton stalled at residual {res:.3e}", endpoint, res)
    return _equilibrium(flow, u, res, it, policy.tau_ker)


def distinct(equilibria: Sequence[Equilibrium], grid: Grid, tol: float = 1e-6) -> list[Equilibrium]:
    out: list[Equilibrium] = []
    for e in equilibria:
        if all(h1_norm_values(grid, e.values - o.values) > tol for o in out):
            out.append(e)
    return out


@dataclass(frozen=True)
class OrbitPolicy:
    delta: float = 1e-4
    dt: float = 0.02
    T_max: float = 200.0
    orbit_tol: float = 1e-3
    stride: int = 10


def detect_connecting_orbit(flow: FlowSpec, start: Equilibrium, targets: Sequence[Equilibrium],
                            policy: OrbitPolicy | None = None) -> list[dict]:
    """Shoot along the unstable eigenfield of the linearisation at ``start`` (both signs)."""
    policy = policy or OrbitPolicy()
    grid = flow.grid
    w, modes = linearization_modes(flow, start.values, k=2)
    if not w[0] < 0:
        raise NoUnstableDirection(f"linearisation at the start point has lowest eigenvalue {w[0]:.6g} >= 0")
    e = modes[0]
    reports = []
    for sgn in (1.0, -1.0):
        u0 = start.values + sgn * policy.delta * e
        if policy.delta == 0:
            reports.append({"sign": sgn, "status": "stationary", "delta": 0.0})
            continue
        traj = evolve(flow, u0, policy.T_max, EvolvePolicy(dt=policy.dt, stride=policy.stride))
        end = traj.fields[-1]
        dists = [float(h1_norm_values(grid, end - t.values)) for t in targets]
        k = int(np.argmin(dists))
        start_dist = float(h1_norm_values(grid, u0 - start.values))
        monotone = bool(np.all(np.diff(traj.energies) <= 1e-12 * (1 + np.abs(traj.energies[:-1]))))
        connected = dists[k] < policy.orbit_tol and start_dist < policy.orbit_tol and k >= 0
        reports.append({
            "sign": sgn,
            "delta": policy.delta,
            "status": "connected" if connected else "inconclusive",
            "target_index": k,
            "start_distance": start_dist,
            "end_distances": dists,
            "energy_start": float(start.energy),
            "energy_end": float(targets[k].energy),
            "energy_trajectory_start": float(traj.energies[0]),
            "energy_trajectory_end": float(traj.energies[-1]),
            "energy_drop": float(start.energy - targets[k].energy),
            "energy_monotone": monotone,
            "T": float(traj.times[-1]),
            "trajectory": traj,
        })
    return reports


def zero_equilibrium(flow: FlowSpec, tau: float = 1e-6) -> Equilibrium | None:
    """The trivial equilibrium, when F(0) vanishes identically."""
    u = np.zeros(flow.grid.points)
    r = residual_values(flow, u)
    res = l2_norm_values(flow.grid, r)
    if res != 0.0:
        return None
    return _equilibrium(flow, u, 0.0, 0, tau)


def semigroup_probes(grid: Grid, count: int = 8, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    L = grid.half_length
    out = []
    for _ in range(count):
        centre = rng.uniform(-0.3 * L, 0.3 * L)
        width = rng.uniform(0.3, 3.0)
        u = rng.normal() * np.exp(-((grid.x - centre) ** 2) / width**2) * np.cos(rng.uniform(0, 4) * grid.x)
        u[0] = u[-1] = 0.0
        out.append(u)
    return out

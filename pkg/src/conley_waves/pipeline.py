"""Command implementations: compile a RunConfig, run the numerics, write files."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, InitialData, PotentialBlock, RunConfig, config_to_data, parse_config, serialize_config
from .existence import (
    Equilibrium,
    EquilibriumPolicy,
    ExistenceVerdict,
    NoConvergence,
    NoUnstableDirection,
    OrbitPolicy,
    PreconditionError,
    ResonantBoundaryError,
    check_nonresonant,
    check_resonant,
    detect_connecting_orbit,
    distinct,
    find_equilibrium,
    geometric_margin,
    isolating_neighborhood,
    linearization_modes,
    q_bound,
    search_R0,
    semigroup_probes,
)
from .grid import Field, Grid, build_grid, h1_norm_values, l2_norm_values
from .nonlinear import NonlinearitySpec
from .semiflow import BlowUpError, EvolvePolicy, FlowSpec, Trajectory, dissipation_residual, evolve, tail_constants, tail_verify
from .spectral import (
    BottomDiscrepancyWarning,
    SpectralWindowError,
    SplitPotential,
    assemble,
    asymptotic_bottom,
    decay_rate,
    eigen_below,
    eigen_lowest,
    morse_count,
    projections,
    smoothing_constant,
)

NONZERO_TOL = 1e-8


@dataclass
class Problem:
    cfg: RunConfig
    grid: Grid
    V: SplitPotential
    lam: float
    f: NonlinearitySpec | None


@dataclass
class Outcome:
    """What a command produced; ``exit_code`` 4 marks unmet hypotheses."""

    exit_code: int = 0
    summary: dict = field(default_factory=dict)


def split_potential(block: PotentialBlock | None) -> SplitPotential | None:
    if block is None:
        return None
    return SplitPotential(block.bounded, tuple(block.decaying), rho_declared=block.rho)


def compile_problem(cfg: RunConfig) -> Problem:
    grid = build_grid(cfg.grid.L, cfg.grid.M)
    V = split_potential(cfg.potential)
    if cfg.lambda_eigen_index is not None:
        j = cfg.lambda_eigen_index
        op0 = assemble(grid, V, 0.0)
        if j >= op0.size:
            raise ConfigError(f"lambda_eigen_index {j} exceeds the number of grid modes", path="lambda_eigen_index")
        lam = float(eigen_lowest(op0, j + 1).eigenvalues[j])
    else:
        lam = 0.0 if cfg.lam is None else float(cfg.lam)
    f = None
    if cfg.nonlinearity is not None:
        nb = cfg.nonlinearity
        f = NonlinearitySpec(
            nb.f,
            lipschitz=split_potential(nb.l),
            bound_m=nb.m,
            sign_bound=split_potential(nb.a),
            alpha=split_potential(nb.alpha),
            omega=split_potential(nb.omega),
            primitive=nb.primitive,
            seed=cfg.seed,
        )
    return Problem(cfg, grid, V, lam, f)


def _require_nonlinearity(p: Problem, what: str) -> NonlinearitySpec:
    if p.f is None:
        raise ConfigError(f"{what} needs a 'nonlinearity' block", path="nonlinearity")
    return p.f


def _quiet_bottom(V, grid) -> tuple[float, list[str]]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BottomDiscrepancyWarning)
        rho = asymptotic_bottom(V, grid)
    return rho, [str(w.message) for w in caught]


def initial_values(p: Problem, spec: InitialData, op=None) -> np.ndarray:
    if spec.eigenfield is not None:
        op = op or assemble(p.grid, p.V, p.lam)
        data = eigen_lowest(op, spec.eigenfield + 1)
        vals = data.fields[spec.eigenfield]
    else:
        from .spectral import as_function

        vals = as_function(spec.expr)(p.grid.x) * np.ones(p.grid.points)
    u = spec.scale * np.asarray(vals, dtype=float)
    u[0] = u[-1] = 0.0
    return u


# ------------------------------------------------------------------ spectrum


def cmd_spectrum(cfg: RunConfig, out: Path) -> Outcome:
    p = compile_problem(cfg)
    grid = p.grid
    op = assemble(grid, p.V, p.lam)
    rho, notes = _quiet_bottom(p.V, grid)
    k = min(cfg.spectrum.k, op.size)
    spec = eigen_lowest(op, k, cfg.spectrum.tau_ker)

    rows = []
    for j, mu in enumerate(spec.eigenvalues):
        res = l2_norm_values(grid, op.apply(spec.fields[j]) - mu * spec.fields[j])
        rows.append((mu, j, bool(mu < spec.essential_bottom), res))
    io.write_csv(out / "eigenvalues.csv", ("eigenvalue", "index", "below_essential_bottom", "residual"), rows)
    for j in range(k):
        io.write_cwf(out / "eigenfields" / f"eigenfield_{j:03d}.cwf", spec.field(j))

    levels = list(cfg.spectrum.lambda_grid)
    morse_rows = []
    if levels:
        op0 = assemble(grid, p.V, 0.0)
        finite = [lv for lv in levels if lv < rho]
        spec0 = (eigen_below(op0, ceiling=min(max(finite) + 1.0, rho), tau_ker=cfg.spectrum.tau_ker)
                 if finite else None)
        for lv in levels:
            if spec0 is None or lv >= rho:
                morse_rows.append((lv, None, None, "above_essential_bottom"))
                continue
            mc = morse_count(spec0, lv)
            morse_rows.append((lv, mc.count, mc.on_boundary, "boundary" if mc.on_boundary else "ok"))
    io.write_csv(out / "morse_table.csv", ("level", "d_minus", "on_boundary", "status"), morse_rows)

    window = cfg.spectrum.decay_window or (0.1 * grid.half_length, 0.5 * grid.half_length)
    decay_rows = []
    for j in np.flatnonzero(spec.below_bottom):
        fit = decay_rate(spec.field(int(j)), window)
        decay_rows.append((int(j), spec.eigenvalues[j], fit.rate, fit.amplitude, fit.residual, fit.verified))
    io.write_csv(out / "decay.csv", ("index", "eigenvalue", "rate", "amplitude", "log_residual", "verified"),
                 decay_rows)

    summary = {
        "lambda": p.lam,
        "rho_estimate": rho,
        "rho_declared": cfg.potential.rho,
        "rho_notes": notes,
        "essential_bottom": spec.essential_bottom,
        "tau_ker": spec.tau_ker,
        "eigenvalues": spec.eigenvalues,
        "continuum_artifacts": spec.continuum_artifacts,
        "negative_count": int(spec.negative.size),
        "kernel_count": int(spec.kernel.size),
        "decay_window": list(window),
    }
    io.write_json(out / "spectrum.json", summary)
    return Outcome(0, summary)


# ------------------------------------------------------------------ evolve


def build_flow(p: Problem, family: str, s: float = 0.0, op=None) -> FlowSpec:
    op = op or assemble(p.grid, p.V, p.lam)
    split = None
    if family == "resonant":
        split = projections(eigen_below(op, tau_ker=p.cfg.spectrum.tau_ker))
        if split.dim_kernel == 0:
            raise PreconditionError("the resonant flow needs lambda at an eigenvalue of -Δ+V")
    try:
        return FlowSpec(op, p.f, family, float(s), split)
    except ValueError as exc:
        raise ConfigError(str(exc), path="evolve.flow") from None


def trajectory_rows(traj: Trajectory):
    ns = sorted(traj.tails)
    header = ["t", "H1", "L2", "E", "dissipation"] + [f"tail_{n}" for n in ns] + ["P_norm", "Q_norm"]
    rows = []
    for j, t in enumerate(traj.times):
        row = [t, traj.h1[j], traj.l2[j], traj.energies[j], traj.dissipation[j]]
        row += [traj.tails[n][j] for n in ns]
        row += [None, None] if traj.p_norm is None else [traj.p_norm[j], traj.q_norm[j]]
        rows.append(row)
    return header, rows


def write_trajectory(path: Path, traj: Trajectory) -> Path:
    header, rows = trajectory_rows(traj)
    return io.write_csv(path, header, rows)


def cmd_evolve(cfg: RunConfig, out: Path) -> Outcome:
    p = compile_problem(cfg)
    ev = cfg.evolve
    op = assemble(p.grid, p.V, p.lam)
    flow = build_flow(p, ev.flow, ev.s, op)
    u0 = initial_values(p, ev.u0, op)
    policy = EvolvePolicy(dt=ev.dt, stride=ev.stride, h1_ceiling=ev.h1_ceiling, tail_ns=tuple(ev.tail_ns))
    traj = evolve(flow, u0, ev.T, policy)
    write_trajectory(out / "trajectory.csv", traj)
    io.write_cwf(out / "snapshots" / "initial.cwf", Field(p.grid, traj.fields[0]))
    io.write_cwf(out / "snapshots" / "final.cwf", traj.final)
    diss = dissipation_residual(traj)
    summary = {
        "flow": ev.flow,
        "s": ev.s,
        "lambda": p.lam,
        "dt": traj.dt,
        "dt_max": flow.dt_max(),
        "samples": len(traj),
        "T": float(traj.times[-1]),
        "energy_start": traj.energies[0],
        "energy_end": traj.energies[-1],
        "dissipation_max_residual": diss.max_residual,
        "energy_max_increase": diss.max_increase,
        "h1_max": float(np.max(traj.h1)),
        "snapshots": {"initial": "snapshots/initial.cwf", "final": "snapshots/final.cwf"},
    }
    if ev.tail_ns:
        if ev.flow != "plain" or p.f is None or p.f.sign_bound is None:
            raise ConfigError("tail certificates need the plain flow and a declared sign bound 'a'", path="evolve.tail_ns")
        cert = tail_constants(p.V, p.f.sign_bound, None, float(np.max(traj.h1)), p.lam, p.grid,
                              ns=list(ev.tail_ns), eps=ev.tail_eps)
        verdict = tail_verify(traj, cert)
        io.write_csv(out / "tail_check.csv", ("t", "n", "tail_mass", "bound", "slack"), verdict.table)
        summary["tail_certificate"] = {
            "R": cert.R, "eps": cert.eps, "gap": cert.gap, "n0": cert.n0, "eps_respects_gap": cert.eps_respects_gap,
            "ns": cert.ns, "beta": cert.beta, "gamma": cert.gamma,
            "holds": verdict.ok, "first_violation": verdict.first_violation,
        }
    io.write_json(out / "evolve.json", summary)
    return Outcome(0, summary)


# ------------------------------------------------------------------ equilibria and orbits


def _equilibrium_policy(cfg: RunConfig) -> EquilibriumPolicy:
    sv = cfg.solver
    return EquilibriumPolicy(dt=sv.dt, T_max=sv.T_max, switch_tol=sv.switch_tol, newton_tol=sv.newton_tol,
                             max_newton=sv.max_newton, tau_ker=cfg.spectrum.tau_ker or 1e-6)


def seed_fields(p: Problem, flow: FlowSpec) -> list[tuple[str, np.ndarray]]:
    """Zero, multiples of the lowest linearised mode at zero, then configured seeds."""
    grid = p.grid
    seeds = [("zero", np.zeros(grid.points))]
    if p.cfg.solver.seed_scales:
        _, modes = linearization_modes(flow, np.zeros(grid.points), k=1)
        for c in p.cfg.solver.seed_scales:
            seeds.append((f"{c:g}*mode0", c * modes[0]))
    for i, s in enumerate(p.cfg.solver.seeds):
        seeds.append((f"seed[{i}]", initial_values(p, s, flow.operator)))
    return seeds


def realize_equilibria(p: Problem, flow: FlowSpec) -> tuple[list[Equilibrium], list[str], list[dict]]:
    """Newton from each seed, falling back to flow-then-Newton; distinct survivors."""
    policy = _equilibrium_policy(p.cfg)
    # a positive A makes the flow dissipative, so let it pick the basin first;
    # otherwise X- directions grow and plain Newton is the safer opener
    phases = (True, False) if flow.operator.lowest_eigenvalue > 0 else (False, True)
    found, labels, failures = [], [], []
    for label, seed in seed_fields(p, flow):
        eq, residual = None, float("inf")
        for flow_phase in phases:
            try:
                eq = find_equilibrium(flow, seed, policy, flow_phase=flow_phase)
                break
            except NoConvergence as exc:
                residual = min(residual, exc.residual)
            except BlowUpError:
                pass
        if eq is None:
            failures.append({"seed": label, "residual": residual})
            continue
        found.append(eq)
        labels.append(label)
    keep = distinct(found, p.grid)
    keep_labels = [labels[next(i for i, e in enumerate(found) if e is k)] for k in keep]
    if not keep:
        worst = min(f["residual"] for f in failures)
        raise NoConvergence("no seed converged to an equilibrium", np.zeros(p.grid.points), worst)
    order = sorted(range(len(keep)), key=lambda i: (keep[i].h1 > NONZERO_TOL, keep[i].energy, keep_labels[i]))
    return [keep[i] for i in order], [keep_labels[i] for i in order], failures


def equilibrium_record(eq: Equilibrium, label: str, snapshot: str | None) -> dict:
    rec = {k: v for k, v in asdict(eq).items() if k != "values"}
    rec["seed"] = label
    rec["nonzero"] = bool(eq.h1 > NONZERO_TOL)
    if snapshot is not None:
        rec["snapshot"] = snapshot
    return rec


def write_equilibria(out: Path, grid: Grid, eqs, labels) -> list[dict]:
    records = []
    for j, (eq, label) in enumerate(zip(eqs, labels)):
        rel = f"equilibria/equilibrium_{j:03d}.cwf"
        io.write_cwf(out / rel, eq.field(grid))
        records.append(equilibrium_record(eq, label, rel))
    return records


def shoot_orbits(p: Problem, flow: FlowSpec, eqs, out: Path | None) -> list[dict]:
    sv = p.cfg.solver
    policy = OrbitPolicy(delta=sv.orbit_delta, dt=sv.orbit_dt, T_max=sv.orbit_T, orbit_tol=sv.orbit_tol)
    records = []
    for i, start in enumerate(eqs):
        if start.degenerate or not start.morse_index:
            continue
        try:
            reports = detect_connecting_orbit(flow, start, eqs, policy)
        except NoUnstableDirection:
            continue
        except BlowUpError as exc:
            records.append({"start_index": i, "status": "blow_up", "t": exc.t, "norm": exc.norm,
                            "strict_energy_drop": False})
            continue
        for rep in reports:
            traj = rep.pop("trajectory")
            tag = "plus" if rep["sign"] > 0 else "minus"
            rep["start_index"] = i
            rep["strict_energy_drop"] = bool(rep["energy_drop"] > 0 and rep["target_index"] != i)
            if out is not None:
                rel = f"orbits/orbit_{i:03d}_{tag}.csv"
                write_trajectory(out / rel, traj)
                rep["trajectory_file"] = rel
            records.append(rep)
    return records


def cmd_find_wave(cfg: RunConfig, out: Path) -> Outcome:
    p = compile_problem(cfg)
    _require_nonlinearity(p, "find-wave")
    flow = build_flow(p, "plain")
    eqs, labels, failures = realize_equilibria(p, flow)
    records = write_equilibria(out, p.grid, eqs, labels)
    io.write_json(out / "equilibria.json", {"lambda": p.lam, "equilibria": records, "failed_seeds": failures})
    orbits = shoot_orbits(p, flow, eqs, out) if cfg.solver.orbits else []
    io.write_json(out / "orbits.json", {"orbits": orbits})
    return Outcome(0, {"equilibria": records, "orbits": orbits})


# ------------------------------------------------------------------ check


def _resonant_extras(p: Problem, verdict: ExistenceVerdict, spec, eqs) -> dict:
    """Isolating-neighbourhood constants, geometric margins and boundary-exit runs."""
    cfg, grid, f = p.cfg, p.grid, p.f
    op = assemble(grid, p.V, p.lam)
    split = projections(spec)
    probes = semigroup_probes(grid, seed=cfg.seed)
    K = smoothing_constant(op, split, spec.rho_plus, probes, np.geomspace(1e-3, 10.0, 40))
    extras: dict = {"smoothing_constant": K, "rho_plus": spec.rho_plus, "rho_minus": spec.rho_minus}
    if f.bound_m is not None:
        m = f.bound_m(grid.x) * np.ones(grid.points)
        extras["R_inf"] = q_bound(float(np.sqrt(grid.integrate(m * m))), K, spec.rho_plus, spec.rho_minus)
    conds = verdict.conditions
    sign = 1 if (conds.get("LL+") is True or conds.get("SR+") is True) else -1
    q_samples = [split.Q(e.values) for e in eqs]
    gm = search_R0(f, split, q_samples, sign, R_init=cfg.resonance.R0, seed=cfg.seed)
    crossings = []
    # under the minus conditions the ‖Pu‖ = R0 face is entered, not exited
    if cfg.resonance.exit_runs and gm.alpha_geo > 0 and sign > 0:
        rng = np.random.default_rng(cfg.seed)
        runs = []
        for s in (0.0, 0.5, 1.0):
            flow = FlowSpec(op, f, "resonant", s, split)
            for sg in (1.0, -1.0):
                bump = 0.3 * rng.normal() * np.exp(-((grid.x - rng.uniform(-2.0, 2.0)) ** 2))
                u0 = sg * 0.9 * gm.R0 * split.kernel_fields[0] + split.Q_plus(bump)
                traj = evolve(flow, u0, cfg.resonance.exit_T, EvolvePolicy(dt=cfg.resonance.exit_dt, stride=1))
                runs.append((flow, traj))
                hit = np.flatnonzero(traj.p_norm >= gm.R0)
                if hit.size:
                    q_samples.append(split.Q(traj.fields[hit[0]]))
        gm = geometric_margin(f, split, q_samples, gm.R0, sign, seed=cfg.seed)
        if gm.alpha_geo > 0:
            nbhd = isolating_neighborhood(extras.get("R_inf", np.inf), gm.alpha_geo, gm.R0, split)
            for flow, traj in runs:
                for c in nbhd.boundary_exits(flow, traj, sign):
                    c["s"] = flow.s
                    crossings.append(c)
    flipped = geometric_margin(f, split, q_samples, gm.R0, -sign, seed=cfg.seed)
    extras.update({
        "sign": sign,
        "R0": gm.R0,
        "R0_doublings": gm.doublings,
        "alpha_geo": gm.alpha_geo,
        "alpha_geo_flipped_sign": flipped.alpha_geo,
        "boundary_exits": crossings,
        "boundary_exits_ok": all(c["ok"] for c in crossings),
    })
    return extras


def cmd_check(cfg: RunConfig, out: Path) -> Outcome:
    if cfg.scenario is None:
        raise ConfigError("check needs a 'scenario' tag", path="scenario")
    p = compile_problem(cfg)
    f = _require_nonlinearity(p, "check")
    tau = cfg.spectrum.tau_ker
    probes = cfg.solver.probes
    if cfg.scenario == "nonresonant":
        verdict = check_nonresonant(p.V, f, p.lam, p.grid, tau, probes)
        spec = None
    else:
        verdict, spec, _ = check_resonant(p.V, f, p.lam, p.grid, cfg.scenario, tau, cfg.resonance.s_max,
                                          cfg.resonance.stability_factor, probes)
    if not verdict.hypotheses_met:
        io.write_json(out / "verdict.json", verdict.to_dict())
        return Outcome(4, verdict.to_dict())

    flow = build_flow(p, "plain")
    eqs, labels, _ = realize_equilibria(p, flow)
    verdict.equilibria = write_equilibria(out, p.grid, eqs, labels)
    if cfg.solver.orbits:
        verdict.orbits = shoot_orbits(p, flow, eqs, out)
    verdict.extras["nonzero_equilibria"] = sum(e.h1 > NONZERO_TOL for e in eqs)
    if spec is not None:
        verdict.extras.update(_resonant_extras(p, verdict, spec, eqs))
    data = verdict.to_dict()
    io.write_json(out / "verdict.json", data)
    return Outcome(0, data)


# ------------------------------------------------------------------ sweep


SWEEP_HEADER = ("lambda", "d_minus_V", "on_boundary", "status", "positive", "d_minus_V_alpha", "d_minus_V_omega",
                "k_inf", "equilibria", "nonzero_equilibria")


def sweep_row(config_text: str, lam: float) -> tuple:
    """One sweep entry; runs in a worker process, so it takes plain text."""
    cfg = parse_config(config_text).with_lambda(lam)
    p = compile_problem(cfg)
    rho, _ = _quiet_bottom(p.V, p.grid)
    if not lam < rho:
        return (lam, None, None, "above_essential_bottom", None, None, None, None, None, None)
    spec = eigen_below(assemble(p.grid, p.V, 0.0), ceiling=min(lam + 1.0, rho), tau_ker=cfg.spectrum.tau_ker)
    mc = morse_count(spec, lam)
    row = {"status": "ok", "positive": None, "d_alpha": None, "d_omega": None, "k_inf": None,
           "equilibria": None, "nonzero": None}
    if cfg.scenario is not None and p.f is not None:
        try:
            if cfg.scenario == "nonresonant":
                verdict = check_nonresonant(p.V, p.f, lam, p.grid, cfg.spectrum.tau_ker, cfg.solver.probes)
                row["d_alpha"] = verdict.exponents["d_minus_V_alpha"]
                row["d_omega"] = verdict.exponents["d_minus_V_omega"]
            else:
                verdict, _, _ = check_resonant(p.V, p.f, lam, p.grid, cfg.scenario, cfg.spectrum.tau_ker,
                                               cfg.resonance.s_max, cfg.resonance.stability_factor, cfg.solver.probes)
                row["k_inf"] = verdict.exponents.get("k_inf")
            row["positive"] = verdict.positive
        except ResonantBoundaryError:
            row["status"] = "resonant_boundary"
        except PreconditionError:
            row["status"] = "precondition_failed"
    if cfg.sweep.find_equilibria and p.f is not None:
        try:
            eqs, _, _ = realize_equilibria(p, build_flow(p, "plain"))
            row["equilibria"] = len(eqs)
            row["nonzero"] = sum(e.h1 > NONZERO_TOL for e in eqs)
        except (NoConvergence, ArithmeticError):
            row["equilibria"], row["nonzero"] = 0, 0
            if row["status"] == "ok":
                row["status"] = "no_equilibrium"
    return (lam, mc.count, mc.on_boundary, row["status"], row["positive"], row["d_alpha"], row["d_omega"],
            row["k_inf"], row["equilibria"], row["nonzero"])


def cmd_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> Outcome:
    lambdas = list(cfg.sweep.lambdas) or list(cfg.spectrum.lambda_grid)
    compile_problem(cfg)  # fail fast on configuration errors
    text = serialize_config(cfg)
    if workers > 1 and len(lambdas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(sweep_row, [text] * len(lambdas), lambdas))
    else:
        rows = [sweep_row(text, lam) for lam in lambdas]
    io.write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return Outcome(0, {"rows": len(rows)})


COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "find-wave": cmd_find_wave,
    "check": cmd_check,
    "sweep": cmd_sweep,
}

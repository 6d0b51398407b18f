import numpy as np
import pytest

from conley_waves.existence import (
    EquilibriumPolicy,
    PreconditionError,
    check_nonresonant,
    check_resonant,
    corollary_clauses,
    detect_connecting_orbit,
    find_equilibrium,
    geometric_margin,
    k_infinity,
    q_bound,
    shifted_count,
    zero_equilibrium,
)
from conley_waves.grid import build_grid
from conley_waves.nonlinear import NonlinearitySpec
from conley_waves.semiflow import FlowSpec
from conley_waves.spectral import SplitPotential, assemble, eigen_below, eigen_lowest, projections

PT = SplitPotential(0.0, ["-6*sech(x)^2"], rho_declared=0.0)
GRID = build_grid(20.0, 401)
W = SplitPotential(0.0, ["6*sech(x)^2"])
F = NonlinearitySpec("6*sech(x)^2*tanh(u)", lipschitz=W, sign_bound=W, alpha=W, omega=0.0)


@pytest.mark.parametrize(
    "d, k0, cond, expected",
    [
        (1, 1, {"LL+": True}, 2),
        (1, 1, {"SR-": True}, 1),
        (1, 2, {"LL+": True, "SR+": True}, 3),
        (1, 1, {"LL+": True, "LL-": True}, None),
        (1, 1, {"LL+": None, "SR+": False}, None),
    ],
)
def test_k_infinity(d, k0, cond, expected):
    assert k_infinity(d, k0, cond) == expected


def test_q_bound_formula():
    assert q_bound(2.0, 1.5, 4.0) == pytest.approx(1.1 * 2 * 1.5 * 2 * np.sqrt(np.pi / 4))
    assert q_bound(2.0, 1.5, 4.0, 0.5) == pytest.approx(q_bound(2.0, 1.5, 4.0) + 1.1 * 8.0)
    with pytest.raises(ValueError):
        q_bound(1.0, 1.0, 0.0)


def test_shifted_count_requires_level_below_bottom():
    with pytest.raises(PreconditionError):
        shifted_count(PT, None, 0.5, GRID)


def test_nonresonant_verdict_is_positive():
    v = check_nonresonant(PT, F, -5.0, GRID, probes=2000)
    assert v.positive
    assert v.exponents == {"d_minus_V_alpha": 1, "d_minus_V_omega": 0}


def test_equal_limits_give_negative_verdict():
    f = NonlinearitySpec("6*sech(x)^2*tanh(u)", lipschitz=W, sign_bound=W, alpha=W, omega=W)
    v = check_nonresonant(PT, f, -5.0, GRID, probes=2000)
    assert not v.positive
    assert not v.hypotheses_met


def test_nonzero_equilibrium_has_small_residual():
    flow = FlowSpec(assemble(GRID, PT, -5.0), F)
    seed = 0.5 * eigen_lowest(flow.operator, 1).fields[0]
    eq = find_equilibrium(flow, seed, EquilibriumPolicy(dt=0.05))
    assert eq.residual <= 1e-10 and eq.h1 > 1.0
    assert eq.morse_index == 0


def test_orbit_from_zero_reaches_equilibrium():
    flow = FlowSpec(assemble(GRID, PT, -5.0), F)
    zero = zero_equilibrium(flow)
    assert zero is not None and zero.morse_index == 1
    seed = 0.5 * eigen_lowest(flow.operator, 1).fields[0]
    eqs = [zero, find_equilibrium(flow, seed), find_equilibrium(flow, -seed)]
    reports = detect_connecting_orbit(flow, zero, eqs)
    assert sorted(r["target_index"] for r in reports) == [1, 2]
    assert all(r["status"] == "connected" and r["energy_drop"] > 0 for r in reports)


@pytest.fixture(scope="module")
def resonant_setup():
    grid = build_grid(20.0, 801)
    mu1 = eigen_lowest(assemble(grid, PT), 2).eigenvalues[1]
    return grid, mu1


def test_resonant_verdict_for_arctan(resonant_setup):
    grid, mu1 = resonant_setup
    f = NonlinearitySpec("exp(-x^2)*arctan(u)", lipschitz=SplitPotential(0.0, ["exp(-x^2)"]),
                         bound_m="exp(-x^2)*pi/2")
    v, spec, _ = check_resonant(PT, f, mu1, grid, probes=2000)
    assert v.positive
    assert v.exponents["k_inf"] == 2


def test_resonant_requires_kernel():
    f = NonlinearitySpec("exp(-x^2)*arctan(u)")
    with pytest.raises(PreconditionError):
        check_resonant(PT, f, -2.0, GRID, probes=100)


def test_geometric_margin_sign(resonant_setup):
    grid, mu1 = resonant_setup
    split = projections(eigen_below(assemble(grid, PT, mu1)))
    f = NonlinearitySpec("exp(-x^2)*arctan(u)")
    plus = geometric_margin(f, split, [], 5.0, 1)
    minus = geometric_margin(f, split, [], 5.0, -1)
    assert plus.alpha_geo > 0 and minus.alpha_geo < 0
    assert plus.violation is None and minus.violation is not None


SPEC = eigen_below(assemble(GRID, PT, -2.0))  # eigenvalues -2 and 1 in this frame


@pytest.mark.parametrize(
    "clause, args",
    [
        ("i", dict(d_minus=1, dim_kernel=0, k_inf=2, abar=-0.5, d_shifted=1, d_at_shift=1, plus=True, minus=False)),
        ("ii", dict(d_minus=1, dim_kernel=0, k_inf=1, abar=4.0, d_shifted=2, d_at_shift=2, plus=False, minus=True)),
        ("iii", dict(d_minus=1, dim_kernel=1, k_inf=2, abar=4.0, d_shifted=3, d_at_shift=3, plus=True, minus=False)),
        ("iv", dict(d_minus=2, dim_kernel=0, k_inf=2, abar=-3.0, d_shifted=1, d_at_shift=1, plus=False, minus=True)),
    ],
)
def test_each_clause_applies_and_holds(clause, args):
    abar = args.pop("abar")
    spec = SPEC
    if clause == "iv":
        spec = eigen_below(assemble(GRID, PT, 1.0))  # eigenvalues -5 and -2, one inside (abar, 0)
    out = corollary_clauses(args["d_minus"], args["dim_kernel"], args["k_inf"], abar, spec,
                            args["d_shifted"], args["d_at_shift"], args["plus"], args["minus"])
    assert out[clause]["applies"] and out[clause]["holds"], out


def test_clause_fails_when_chain_breaks():
    out = corollary_clauses(1, 0, 1, 4.0, SPEC, 1, 2, plus=False, minus=True)
    assert out["ii"]["applies"] and not out["ii"]["holds"]

import numpy as np
import pytest

from conley_waves.grid import build_grid
from conley_waves.nonlinear import (
    NonlinearitySpec,
    certify_structure,
    limit_potential_check,
    lipschitz_growth_bounds,
    nemytskii,
    quadrature_primitive,
    resonance_conditions,
)
from conley_waves.spectral import SplitPotential

GRID = build_grid(20.0, 401)
TANH = NonlinearitySpec(
    "6*sech(x)^2*tanh(u)",
    lipschitz=SplitPotential(0.0, ["6*sech(x)^2"]),
    sign_bound=SplitPotential(0.0, ["6*sech(x)^2"]),
    alpha=SplitPotential(0.0, ["6*sech(x)^2"]),
    omega=0.0,
    bound_m="6*sech(x)^2",
)


def test_structure_certified_for_declared_fields():
    report = certify_structure(TANH, GRID, probes=5000, seed=3)
    assert report.ok
    assert report.lipschitz_ok and report.bound_ok and report.sign_ok
    assert report.forcing_l2 == 0.0


def test_wrong_lipschitz_field_is_caught():
    f = NonlinearitySpec("6*sech(x)^2*tanh(u)", lipschitz=SplitPotential(0.0, ["sech(x)^2"]))
    report = certify_structure(f, GRID, probes=5000, seed=3)
    assert report.lipschitz_ok is False and not report.ok


def test_growth_bounds():
    b = lipschitz_growth_bounds(TANH, GRID)
    # ‖6 sech²‖_{L²}² = 36·4/3 = 48
    assert b.lipschitz == pytest.approx(np.sqrt(48), rel=1e-6)
    assert b.sup_l == pytest.approx(6.0)


def test_limit_potentials():
    zero = limit_potential_check(TANH, "zero", GRID)
    inf = limit_potential_check(TANH, "infinity", GRID)
    assert zero.converged and zero.monotone
    assert inf.converged and inf.discrepancies[-1] < 1e-5


def test_closed_form_and_quadrature_primitives_agree():
    x = np.linspace(-3, 3, 7)
    u = np.linspace(-5, 5, 7)
    assert np.allclose(TANH.primitive_values(x, u), quadrature_primitive(TANH, x, u), atol=1e-9)


def test_nemytskii_rejects_non_finite():
    f = NonlinearitySpec("1/u")
    with pytest.raises(ArithmeticError):
        nemytskii(f, GRID.zeros())


@pytest.mark.parametrize(
    "rule, expected",
    [
        ("exp(-x^2)*arctan(u)", {"LL+": True, "LL-": False, "SR+": True, "SR-": False}),
        ("-exp(-x^2)*arctan(u)", {"LL+": False, "LL-": True, "SR+": False, "SR-": True}),
        ("exp(-x^2)*u/(1+u^2)", {"LL+": False, "LL-": False, "SR+": True, "SR-": False}),
        ("0", {"LL+": False, "LL-": False, "SR+": False, "SR-": False}),
    ],
)
def test_resonance_conditions(rule, expected):
    assert resonance_conditions(NonlinearitySpec(rule), GRID).conditions == expected


def test_odd_zero_forcing_detected():
    assert TANH.is_odd_zero_forcing
    assert not NonlinearitySpec("tanh(u) + exp(-x^2)").is_odd_zero_forcing

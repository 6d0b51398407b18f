import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conley_waves.expressions import ExpressionError, parse


def test_caret_is_power():
    assert parse("2^3")(0.0) == 8.0
    assert parse("x^2")(np.array([3.0]))[0] == 9.0


def test_functions_and_constants():
    e = parse("sech(x)^2 + arctan(u) + exp(0) - pi + e")
    assert e(0.0, 1.0) == pytest.approx(1 + np.pi / 4 + 1 - np.pi + np.e)


def test_broadcasts_constant_expressions():
    out = parse("3")(np.zeros(5))
    assert out.shape == (5,) and np.all(out == 3)


@pytest.mark.parametrize(
    "source, column",
    [("x +", None), ("foo(x)", 1), ("x + y", 5), ("'a'", 1), ("", 1)],
)
def test_errors_carry_columns(source, column):
    with pytest.raises(ExpressionError) as info:
        parse(source)
    if column is not None:
        assert info.value.column + 1 == column


def test_u_required_when_used():
    with pytest.raises(ValueError):
        parse("tanh(u)")(np.zeros(3))


@pytest.mark.parametrize("source", ["tanh(u)", "arctan(u)*exp(-x^2)", "u/(1+u^2)", "sech(x)^2*tanh(u)"])
def test_primitive_differentiates_back(source):
    f = parse(source)
    F = f.primitive
    assert F is not None
    x = np.linspace(-2, 2, 5)[:, None]
    u = np.linspace(-4, 4, 9)[None, :]
    h = 1e-6
    assert np.allclose((F(x, u + h) - F(x, u - h)) / (2 * h), f(x, u), atol=1e-6)
    assert np.allclose(F(x, 0.0), 0.0)


def test_primitive_is_stable_for_large_negative_u():
    F = parse("tanh(u)").primitive
    # log cosh u grows like |u|; no catastrophic cancellation or inf
    assert F(0.0, -200.0) == pytest.approx(200 - np.log(2), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_parse_agrees_with_numpy(a, b):
    e = parse(f"({a!r})*x + ({b!r})*tanh(u)")
    assert e(1.5, 0.3) == pytest.approx(a * 1.5 + b * np.tanh(0.3), rel=1e-12, abs=1e-12)

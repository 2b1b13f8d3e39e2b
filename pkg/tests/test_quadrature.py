import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fockbench.errors import ConfigError
from fockbench.expression import Expression
from fockbench.quadrature import (
    DEFAULT_PLAN,
    CallableFunction,
    composite_rule,
    disk_integrals,
    gauss_legendre,
    radial_integral,
    radial_integral_to_infinity,
    square_integrals,
)


def test_gauss_legendre_integrates_polynomials_exactly():
    x, w = gauss_legendre(8)
    for k in range(16):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(w * x ** k) == pytest.approx(exact, abs=1e-14)


def test_composite_rule_respects_breakpoints():
    x, w = composite_rule(0.0, 2.0, 0.5, 4, breakpoints=(0.7,))
    f = np.where(x < 0.7, 1.0, 3.0)
    assert np.sum(w * f) == pytest.approx(0.7 + 3 * 1.3, rel=1e-14)


def test_radial_integral_of_gaussian():
    val = radial_integral(lambda s: np.exp(-s * s), 12.0)
    assert val == pytest.approx(math.pi, rel=1e-12)


def test_radial_integral_to_infinity_algebraic_tail():
    total, tail = radial_integral_to_infinity(lambda s: (1 + s) ** -4.0)
    assert total == pytest.approx(math.pi / 3, rel=1e-9)
    assert tail < 1e-9


def test_disk_integral_off_centre_matches_dblquad():
    f = CallableFunction(lambda z: np.exp(-np.abs(z) ** 2) * (1 + np.real(z) ** 2))
    c, r = 1.2 - 0.4j, 0.8
    oracle = integrate.dblquad(
        lambda t, s: s * np.exp(-abs(c + s * np.exp(1j * t)) ** 2) * (1 + (c + s * np.exp(1j * t)).real ** 2),
        0, r, 0, 2 * np.pi, epsabs=0, epsrel=1e-12)[0]
    assert disk_integrals(f, [c], r)[0] == pytest.approx(oracle, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-9, 9), y=st.floats(-9, 9))
def test_square_integral_of_fast_decay_has_no_cancellation(x, y):
    f = CallableFunction(lambda s: np.exp(-s * s), radial=True)
    c = complex(x, y)
    oracle = integrate.dblquad(lambda v, u: np.exp(-(u * u + v * v)),
                               x - 0.5, x + 0.5, y - 0.5, y + 0.5, epsabs=0, epsrel=1e-12)[0]
    got = square_integrals(f, [c], 1.0)[0]
    assert got == pytest.approx(oracle, rel=1e-8, abs=1e-300)


def test_refined_plan_halves_steps():
    fine = DEFAULT_PLAN.refined()
    assert fine.panel_width == DEFAULT_PLAN.panel_width / 2
    assert fine.angular_nodes == 2 * DEFAULT_PLAN.angular_nodes


def test_expression_grammar():
    e = Expression("1 + x^2 / (1 + r^2)")
    z = np.array([0.0, 1 + 1j])
    assert np.allclose(e.evaluate(z), [1.0, 1 + 1 / 3])
    assert not e.radial
    assert Expression("exp(-r^2)").radial


@pytest.mark.parametrize("text", ["__import__('os')", "r.real", "z + 1", "lambda: 1", "w"])
def test_expression_rejects_unknown_syntax(text):
    with pytest.raises(ConfigError):
        Expression(text)

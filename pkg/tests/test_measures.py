import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fockbench import MeasureSpec, Psi, Weight, average_function, berezin_transform, build_model
from fockbench.errors import DegenerateMapError, MeasureError, WeightError
from fockbench.fock_model import local_lower_bound_scan
from fockbench.measures import (
    average_functions,
    berezin_transforms,
    measure_disk_mass,
    measure_disk_masses,
    pullback_density,
    volterra_density,
)
from fockbench.weights import DiskSpec

UNIT = Weight.constant(1 / math.pi)
GAUSS = "exp(-r^2)/pi"


@pytest.fixture(scope="module")
def unit80():
    return build_model(UNIT, 1.0, 80)


def disk_oracle(f, c, R):
    """``int_{D(c,R)} f dA`` with scipy's adaptive 2-d quadrature."""
    val, _ = integrate.dblquad(lambda s, t: f(c + s * np.exp(1j * t)) * s, 0, 2 * np.pi, 0, R,
                               epsabs=1e-13, epsrel=1e-11)
    return val


# construction


def test_rejects_bad_specs():
    with pytest.raises(MeasureError):
        MeasureSpec.atomic([])
    with pytest.raises(MeasureError):
        MeasureSpec.atomic([(0, -1.0)])
    with pytest.raises(MeasureError):
        MeasureSpec(kind="spectral")
    with pytest.raises(DegenerateMapError):
        MeasureSpec.from_pullback(0.0)
    with pytest.raises(MeasureError):
        Psi.from_config({"sin": 1})


def test_beyond_hypothesis_flag():
    assert not MeasureSpec.from_volterra([0, 1]).beyond_hypothesis
    assert MeasureSpec.from_volterra([0, 0, 1]).beyond_hypothesis
    assert not MeasureSpec.from_volterra([0, 1, 0]).beyond_hypothesis


def test_density_cache_reused():
    mu = MeasureSpec.from_volterra([0, 1])
    assert mu.density_for(UNIT) is mu.density_for(UNIT)


def test_to_dict_round_trip_fields():
    mu = MeasureSpec.from_pullback(0.5 + 1j, 0.25, Psi(poly=(1.0, 2.0)), label="p")
    d = mu.to_dict()
    assert d["pullback"] == {"a": [0.5, 1.0], "b": 0.25, "psi": {"poly": [1.0, 2.0]}}
    assert MeasureSpec.atomic([(1j, 2.0)]).to_dict()["atoms"] == [[0.0, 1.0, 2.0]]


# measure_disk_mass


def test_disk_mass_atom_at_centre():
    assert measure_disk_mass(MeasureSpec.atomic([(0, 1.0)]), DiskSpec(0, 1)) == 1.0


def test_disk_mass_atom_membership_is_strict():
    mu = MeasureSpec.atomic([(1, 1.0), (0.5j, 2.0)])
    assert measure_disk_masses(mu, [0, 2], 1.0).tolist() == [2.0, 0.0]


def test_disk_mass_lebesgue_over_pi():
    assert measure_disk_mass(MeasureSpec.from_density("1/pi"), DiskSpec(0, 1)) == pytest.approx(1, rel=1e-13)


def test_disk_mass_gaussian_density():
    val = measure_disk_mass(MeasureSpec.from_density(GAUSS), DiskSpec(0, 0.5))
    assert val == pytest.approx(1 - math.exp(-0.25), rel=1e-12)


def test_disk_mass_off_centre_against_dblquad():
    mu = MeasureSpec.from_density("exp(-(x-1)^2 - 2*y^2)")
    got = measure_disk_mass(mu, DiskSpec(0.3 + 0.4j, 0.8))
    ref = disk_oracle(lambda z: np.exp(-(z.real - 1) ** 2 - 2 * z.imag ** 2), 0.3 + 0.4j, 0.8)
    assert got == pytest.approx(ref, rel=1e-9)


def test_weight_dependent_density_needs_weight():
    with pytest.raises(MeasureError):
        measure_disk_masses(MeasureSpec.weight_measure(), [0], 1.0)


# average_function


@pytest.mark.parametrize("w", [UNIT, Weight.power(2.0), Weight.power(-1.0)])
def test_average_of_weight_measure_is_one(w):
    vals = average_functions(MeasureSpec.weight_measure(), w, 0.7, [0, 1 + 2j, -4j])
    assert np.allclose(vals, 1.0, rtol=1e-10)


def test_average_atom_constant_weight():
    assert average_function(MeasureSpec.atomic([(0, 1.0)]), UNIT, 1.0, 0) == pytest.approx(1.0, rel=1e-13)


def test_average_volterra_linear_symbol():
    val = average_function(MeasureSpec.from_volterra([0, 1]), UNIT, 0.5, 0)
    assert val == pytest.approx(2 * math.pi * (math.log(1.5) - 1 / 3) / 0.25, rel=1e-10)


def test_average_zero_weight_mass_rejected():
    w = Weight.radial_table([(0, 0), (4, 0), (5, 1)])
    with pytest.raises((MeasureError, WeightError)):
        average_function(MeasureSpec.atomic([(0, 1.0)]), w, 0.5, 0)


@given(st.floats(0.1, 50), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_average_linear_in_measure(c, x, y):
    mu = MeasureSpec.from_density(GAUSS)
    z = complex(x, y)
    a = average_function(mu, UNIT, 0.5, z)
    b = average_function(mu.scaled(c), UNIT, 0.5, z)
    assert b == pytest.approx(c * a, rel=1e-12)


def test_average_pullback_expanding_symbol_diverges():
    mu = MeasureSpec.from_pullback(2.0)
    vals = average_functions(mu, UNIT, 0.5, np.array([0, 2, 4, 6, 8], dtype=complex))
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] / vals[0] > 1e10


# berezin_transform


@pytest.mark.parametrize("fixture", ["model80", "model_g2"])
def test_berezin_of_weight_measure_is_one(fixture, request):
    m = request.getfixturevalue(fixture)
    vals = berezin_transforms(m, MeasureSpec.weight_measure(), [0, 1.5, 2 - 2j])
    assert np.allclose(vals, 1.0, rtol=1e-10)


def test_berezin_atom_constant_weight(unit80):
    mu = MeasureSpec.atomic([(0, 1.0)])
    assert berezin_transform(unit80, mu, 1) == pytest.approx(math.exp(-1), rel=1e-12)
    vals = berezin_transforms(unit80, mu, [0.5j, 2 + 1j])
    assert np.allclose(vals, np.exp(-np.abs([0.5j, 2 + 1j]) ** 2), rtol=1e-12)


def test_berezin_gaussian_density_constant_weight(unit80):
    z = np.array([0, 1, 1 + 1j, -2j])
    vals = berezin_transforms(unit80, MeasureSpec.from_density(GAUSS), z)
    assert vals[0] == pytest.approx(0.5, rel=1e-12)
    assert np.allclose(vals, 0.5 * np.exp(-np.abs(z) ** 2 / 2), rtol=1e-11)


def test_berezin_non_radial_density_against_dblquad(unit80):
    f = "exp(-(x-1)^2 - y^2)"
    z = 0.5 - 0.5j
    got = berezin_transform(unit80, MeasureSpec.from_density(f), z)

    def integrand(s, t):
        xi = s * np.exp(1j * t)
        kz = np.exp(2 * np.real(xi * np.conj(z)) - abs(z) ** 2 - s * s)
        return kz * math.exp(-(xi.real - 1) ** 2 - xi.imag ** 2) * s

    ref, _ = integrate.dblquad(integrand, 0, 2 * np.pi, 0, 9, epsabs=1e-13, epsrel=1e-11)
    assert got == pytest.approx(ref, rel=1e-8)


def test_berezin_nonnegative_over_corpus(model_g2):
    from conftest import corpus

    z = np.array([0, 1 + 1j, 3, -2.5j])
    for mu in corpus(include_two=False):
        vals = berezin_transforms(model_g2, mu, z)
        assert np.all(vals >= 0), mu.label


def test_berezin_linear_in_measure(model_g2):
    mu = MeasureSpec.from_volterra([0, 1])
    a = berezin_transform(model_g2, mu, 1 + 1j)
    b = berezin_transform(model_g2, mu.scaled(3.5), 1 + 1j)
    assert b == pytest.approx(3.5 * a, rel=1e-13)


def test_domination_of_average_by_berezin(model_g2):
    scan = local_lower_bound_scan(model_g2, 0.3, [0.9, 0.6, 0.3])
    r = 0.5 * scan.delta_est
    z = np.array([t * np.exp(0.7j * t) for t in np.linspace(0, 4, 9)])
    ratios = []
    for mu in [MeasureSpec.from_density(GAUSS), MeasureSpec.from_volterra([0, 1]),
               MeasureSpec.from_pullback(0.5)]:
        hat = average_functions(mu, model_g2.weight, r, z)
        til = berezin_transforms(model_g2, mu, z)
        ratios.append(hat / til)
    C = np.max(ratios)
    assert np.isfinite(C) and C > 0


# induced densities


def test_identity_pullback_is_weight():
    w = Weight.power(2.0)
    dens = pullback_density(1, 0, Psi(), w, 1.0)
    u = np.array([0.1, 1 + 1j, -3j])
    assert np.allclose(dens(u), w(u), rtol=1e-14)


def test_half_pullback_closed_form():
    dens = pullback_density(0.5, 0, Psi(), UNIT, 1.0)
    u = np.array([0, 0.5, 1 + 1j])
    assert np.allclose(dens(u), 4 / math.pi * np.exp(-3 * np.abs(u) ** 2), rtol=1e-13)


def test_double_pullback_closed_form():
    dens = pullback_density(2, 0, Psi(), UNIT, 1.0)
    u = np.array([0, 1, 2j])
    assert np.allclose(dens(u), np.exp(0.75 * np.abs(u) ** 2) / (4 * math.pi), rtol=1e-13)


def test_pullback_zero_symbol_rejected():
    with pytest.raises(DegenerateMapError):
        pullback_density(0, 1, Psi(), UNIT, 1.0)


@pytest.mark.parametrize("a,b,psi", [
    (0.5, 0.0, Psi()),
    (0.5 + 0.5j, 0.3, Psi(poly=(1.0, 1j))),
    (1.5, -0.2j, Psi(poly=(), exp=0.5)),
])
@pytest.mark.parametrize("c,R", [(0, 1.0), (1, 0.5)])
def test_pullback_change_of_variables(a, b, psi, c, R):
    w = Weight.power(2.0)
    alpha = 1.0
    mu = MeasureSpec.from_pullback(a, b, psi)
    lhs = measure_disk_mass(mu, DiskSpec(c, R), w, alpha)

    # preimage of D(c, R) under z -> a z + b is D((c - b)/a, R/|a|)
    def integrand(z):
        phi = a * z + b
        return np.exp(psi.log_abs2(z) - alpha * (abs(z) ** 2 - abs(phi) ** 2)) * w(z)

    rhs = disk_oracle(integrand, (c - b) / a, R / abs(a))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_volterra_constant_symbol_is_zero(model80):
    mu = MeasureSpec.from_volterra([3.0])
    assert measure_disk_masses(mu, [0, 1], 1.0, UNIT).tolist() == [0.0, 0.0]
    assert berezin_transform(model80, mu, 1.0) == 0.0


def test_volterra_linear_symbol_density():
    dens = volterra_density([1.0, 2 - 1j], UNIT)
    z = np.array([0, 1, 2 + 2j])
    assert np.allclose(dens(z), 5 / (1 + np.abs(z)) ** 2, rtol=1e-11)


def test_volterra_quadratic_symbol_density():
    dens = volterra_density([0, 0, 1], UNIT)
    z = np.array([0.5, 1j, 3 - 1j])
    s = np.abs(z)
    assert np.allclose(dens(z), 4 * s ** 2 / (1 + s) ** 2, rtol=1e-11)

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockbench import (
    MeasureSpec,
    SchattenGauge,
    Weight,
    assemble,
    berezin_transform,
    build_model,
    operator_norm,
    schatten_norm,
    spectrum,
)
from fockbench.errors import GaugeError, SpectrumError
from fockbench.measures import berezin_transforms
from fockbench.toeplitz_spectra import (
    DecayProfile,
    OutsideHypothesisWarning,
    Spectrum,
    berezin_from_matrix,
    decay_fit,
    diverges,
    essential_norm_proxy,
    rayleigh_check,
    schatten_h_sum,
    tends_to_zero,
)

UNIT = Weight.constant(1 / math.pi)
GAUSS = "exp(-r^2)/pi"


@pytest.fixture(scope="module")
def unit80():
    return build_model(UNIT, 1.0, 80)


@pytest.fixture(scope="module")
def geometric(unit80):
    return spectrum(assemble(unit80, MeasureSpec.from_density(GAUSS)))


def diag_spectrum(values):
    return spectrum(np.diag(values))


# assemble


@pytest.mark.parametrize("fixture", ["model80", "model_g2"])
def test_weight_measure_gives_identity(fixture, request):
    m = request.getfixturevalue(fixture)
    T = assemble(m, MeasureSpec.weight_measure())
    assert np.max(np.abs(T.entries - np.eye(m.degree + 1))) < 1e-8


def test_atom_at_origin_single_entry(unit80):
    T = assemble(unit80, MeasureSpec.atomic([(0, 1.0)]))
    expect = np.zeros((81, 81))
    expect[0, 0] = 1.0
    assert np.max(np.abs(T.entries - expect)) < 1e-14


def test_gaussian_density_diagonal(unit80):
    T = assemble(unit80, MeasureSpec.from_density(GAUSS))
    d = np.real(np.diag(T.entries))
    assert d[:3] == pytest.approx([0.5, 0.25, 0.125], rel=1e-12)
    assert np.allclose(d, 0.5 ** (np.arange(81) + 1), rtol=1e-10, atol=1e-300)
    assert np.max(np.abs(T.entries - np.diag(np.diag(T.entries)))) == 0


def test_assembly_is_hermitian_and_psd(model_g2):
    from conftest import corpus

    for mu in corpus(include_two=False):
        T = assemble(model_g2, mu)
        M = T.entries
        assert np.array_equal(M, np.conj(M).T), mu.label
        ev = np.linalg.eigvalsh(M)
        assert ev[0] >= -1e-10 * max(abs(ev[-1]), 1e-300), mu.label


def test_non_radial_assembly_against_direct_quadrature(unit80):
    mu = MeasureSpec.from_density("exp(-(x-1)^2 - y^2)")
    T = assemble(unit80, mu)
    x, wx = np.polynomial.legendre.leggauss(200)
    s = 5 * (x + 1)
    ws = 5 * wx * s
    t = 2 * np.pi * np.arange(256) / 256
    z = s[:, None] * np.exp(1j * t)[None, :]
    dens = np.exp(-(z.real - 1) ** 2 - z.imag ** 2 - np.abs(z) ** 2)
    for j, k in [(0, 0), (1, 0), (3, 2), (4, 4)]:
        ek = z ** k / math.sqrt(math.factorial(k))
        ej = z ** j / math.sqrt(math.factorial(j))
        ref = np.sum(ek * np.conj(ej) * dens * ws[:, None]) * 2 * np.pi / 256
        assert abs(T.entries[j, k] - ref) < 1e-10


def test_precheck_flags_expanding_pullback(unit80):
    assert assemble(unit80, MeasureSpec.from_pullback(2.0)).criterion_unbounded
    assert not assemble(unit80, MeasureSpec.from_pullback(0.5)).criterion_unbounded


def test_matrix_dump_round_trip(unit80):
    T = assemble(unit80, MeasureSpec.atomic([(1 + 1j, 2.0)]))
    d = json.loads(T.dumps())
    M = np.array(d["entries"])
    assert np.array_equal(M[..., 0] + 1j * M[..., 1], T.entries)


# spectrum and norms


def test_identity_spectrum():
    S = spectrum(np.eye(10))
    assert S.values.tolist() == [1.0] * 10
    assert operator_norm(S) == 1.0


def test_geometric_spectrum(geometric):
    assert geometric.values[:4] == pytest.approx([0.5, 0.25, 0.125, 0.0625], rel=1e-12)
    assert operator_norm(geometric) == pytest.approx(0.5, rel=1e-12)


def test_rank_one_spectrum():
    M = np.zeros((5, 5))
    M[0, 0] = 3.0
    S = spectrum(M)
    assert S.values.tolist() == [3.0, 0, 0, 0, 0]


def test_atom_mass_three_operator_norm(unit80):
    T = assemble(unit80, MeasureSpec.atomic([(0, 3.0)]))
    assert operator_norm(spectrum(T)) == pytest.approx(3.0, rel=1e-14)


def test_spectrum_rejects_indefinite():
    with pytest.raises(SpectrumError):
        spectrum(np.diag([1.0, -1e-3]))


def test_spectrum_clips_round_off():
    S = spectrum(np.diag([1.0, -1e-13]))
    assert S.values.tolist() == [1.0, 0.0]
    assert S.min_raw == -1e-13


def test_spectrum_is_deterministic(model_g2):
    T = assemble(model_g2, MeasureSpec.from_volterra([0, 1]))
    assert np.array_equal(spectrum(T).values, spectrum(T).values)


def test_schatten_geometric(geometric):
    assert schatten_norm(geometric, 1) == pytest.approx(1 - 2.0 ** -81, rel=1e-12)
    assert schatten_norm(geometric, 2) == pytest.approx(1 / math.sqrt(3), rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3.5])
def test_schatten_identity_grows(p):
    for n in (10, 40):
        assert schatten_norm(spectrum(np.eye(n)), p) == pytest.approx(n ** (1 / p), rel=1e-13)


def test_schatten_small_p_flagged(geometric):
    with pytest.warns(OutsideHypothesisWarning):
        schatten_norm(geometric, 0.5)


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=30), st.floats(1, 8))
@settings(max_examples=50, deadline=None)
def test_schatten_matches_direct_sum(values, p):
    S = diag_spectrum(values)
    direct = sum(v ** p for v in values) ** (1 / p)
    assert schatten_norm(S, p) == pytest.approx(direct, rel=1e-10, abs=1e-300)


def test_trace_identity(model_g2):
    T = assemble(model_g2, MeasureSpec.from_pullback(0.5))
    S = spectrum(T)
    trace = float(np.real(np.trace(T.entries)))
    assert abs(S.values.sum() - trace) <= 1e-8 * trace


def test_nested_interlacing(model_g2):
    T = assemble(model_g2, MeasureSpec.atomic([(2 + 1j, 1.0), (-1, 0.5)]))
    big = spectrum(T).values
    for n in (20, 50):
        small = spectrum(T.leading(n)).values
        assert np.all(small <= big[:n] + 1e-8)


def test_operator_norm_monotone_in_degree():
    w = Weight.power(2.0)
    mu = MeasureSpec.from_volterra([0, 1])
    norms = [operator_norm(spectrum(assemble(build_model(w, 1.0, N), mu, precheck=False)))
             for N in (20, 40, 80)]
    assert norms[0] <= norms[1] + 1e-8 <= norms[2] + 2e-8


def test_rayleigh_consistency(model_g2):
    T = assemble(model_g2, MeasureSpec.from_volterra([0, 1]))
    top = operator_norm(spectrum(T))
    sampled, attained = rayleigh_check(T, 100)
    assert sampled <= top + 1e-8
    assert abs(attained - top) <= 1e-6


@pytest.mark.parametrize("label", ["gauss", "volterra", "pb_half", "atom2i", "wdA"])
def test_berezin_quadratic_form_matches_direct(model_g2, label):
    from conftest import corpus

    mu = {m.label: m for m in corpus()}[label]
    T = assemble(model_g2, mu)
    z = np.array([0, 1 + 1j, -2.5, 3j])
    direct = berezin_transforms(model_g2, mu, z)
    via_matrix = berezin_from_matrix(T, z)
    assert np.allclose(via_matrix, direct, rtol=1e-6, atol=1e-12)
    assert np.all(via_matrix <= operator_norm(spectrum(T)) + 1e-8)


def test_berezin_domination_constant_weight(unit80):
    mu = MeasureSpec.from_density(GAUSS)
    top = operator_norm(spectrum(assemble(unit80, mu)))
    for z in (0, 1, 2j):
        assert berezin_transform(unit80, mu, z) <= top + 1e-8


# gauges


def test_gauge_power_sums(geometric):
    assert schatten_h_sum(geometric, SchattenGauge.power(1)) == pytest.approx(1, rel=1e-12)
    assert schatten_h_sum(geometric, SchattenGauge.power(2)) == pytest.approx(1 / 3, rel=1e-12)


def test_gauge_scale(geometric):
    g = SchattenGauge.power(2, scale=2.0)
    assert schatten_h_sum(geometric, g) == pytest.approx(4 / 3, rel=1e-12)


def test_log_decay_gauge_identity():
    g = SchattenGauge.log_decay(1.0)
    eta = DecayProfile(1.0)
    assert abs(float(g(eta(math.e))) - 1 / math.e) < 1e-12
    for gamma in (0.5, 1.0, 2.0):
        g = SchattenGauge.log_decay(gamma)
        eta = DecayProfile(gamma)
        t = np.array([1.0, 2.0, 10.0, 1e3])
        assert np.allclose(g(eta(t)), 1 / t, rtol=1e-12)


def test_log_decay_gauge_continuous_at_knee():
    g = SchattenGauge.log_decay(1.5)
    knee = 2.5 ** -1.5
    lo, hi = g(knee * (1 - 1e-12)), g(knee * (1 + 1e-12))
    assert abs(hi - lo) < 1e-9


def test_piecewise_gauge():
    g = SchattenGauge.piecewise([(0, 0), (1, 1), (2, 3)])
    assert g(np.array([0.5, 1.5, 4.0])).tolist() == [0.5, 2.0, 7.0]


@pytest.mark.parametrize("knots", [
    [(0, 0), (1, 2), (2, 3)],
    [(0, 0), (1, 1), (2, 0.5)],
    [(0, 1), (1, 2)],
])
def test_gauge_rejects_non_convex(knots):
    with pytest.raises(GaugeError):
        SchattenGauge.piecewise(knots)


def test_gauge_rejects_bad_parameters():
    with pytest.raises(GaugeError):
        SchattenGauge.log_decay(0.0)
    with pytest.raises(GaugeError):
        SchattenGauge.power(1, scale=-1)
    with pytest.raises(GaugeError):
        SchattenGauge(kind="cubic")


def test_gauge_non_convex_reports_point():
    with pytest.raises(GaugeError) as exc:
        SchattenGauge.piecewise([(0, 0), (1, 2), (2, 3)])
    assert exc.value.point == pytest.approx(1.0, abs=0.01)


# decay fits


def test_decay_fit_geometric_holds(geometric, unit80):
    bigger = spectrum(assemble(build_model(UNIT, 1.0, 100), MeasureSpec.from_density(GAUSS)))
    fit = decay_fit(geometric, DecayProfile(1.0), 2, bigger)
    assert fit.holds
    assert fit.K == pytest.approx(0.25 * (2 + math.log(2)), rel=1e-12)


def test_decay_fit_identity_fails():
    fit = decay_fit(spectrum(np.eye(81)), DecayProfile(1.0), 2, spectrum(np.eye(101)))
    assert not fit.holds
    assert fit.at_edge
    assert fit.K_next > fit.K


def test_decay_fit_zero_holds():
    fit = decay_fit(spectrum(np.zeros((5, 5))), DecayProfile(1.0), 2, spectrum(np.zeros((7, 7))))
    assert fit.holds and fit.K == 0


def test_decay_fit_rejects_n_min():
    with pytest.raises(ValueError):
        decay_fit(spectrum(np.eye(3)), DecayProfile(1.0), 1)


# essential norm proxy


def test_ring_proxy_weight_measure():
    prox = essential_norm_proxy(MeasureSpec.weight_measure(), Weight.power(2.0), 0.3, [0, 2, 4, 6, 8])
    assert np.allclose(prox.sups, 1.0, rtol=1e-10)
    assert prox.limsup == pytest.approx(1.0, rel=1e-10)
    assert not prox.decreasing


def test_ring_proxy_atom_at_origin():
    r = 0.3
    prox = essential_norm_proxy(MeasureSpec.atomic([(0, 1.0)]), UNIT, r, [0, 1.5, 3, 4.5, 6])
    assert prox.sups[0] > 0
    assert all(v == 0 for v in prox.sups[1:])
    assert prox.decreasing


def test_ring_proxy_gaussian_decays():
    r = 0.5
    rings = [0, 1, 2, 3, 4, 5]
    prox = essential_norm_proxy(MeasureSpec.from_density(GAUSS), UNIT, r, rings)
    assert prox.decreasing
    assert np.all(np.diff(prox.sups) < 0)
    for lo, sup in zip(rings[1:-1], prox.sups[1:]):
        # the disk around |z| = lo sees the density at |xi| >= lo - r at most
        assert sup <= math.exp(-(lo - r) ** 2) * (1 + 1e-9)


def test_ring_proxy_rejects_rings():
    with pytest.raises(ValueError):
        essential_norm_proxy(MeasureSpec.weight_measure(), UNIT, 0.3, [0, 1])


# decision helpers


def test_diverges_rule():
    assert diverges([1, 2, 4, 8])
    assert not diverges([1, 2, 4, 5])
    assert diverges([1, 1, 2, 4, 8])
    assert diverges([1, 2])
    assert not diverges([1])
    assert diverges([1, np.inf])


def test_tends_to_zero_rule():
    assert tends_to_zero([1, 0.6, 0.4])
    assert not tends_to_zero([1, 0.9, 0.8])
    assert tends_to_zero([0, 0, 0])
    assert not tends_to_zero([1])


def test_spectrum_rows():
    S = Spectrum(np.array([0.5, 0.25]))
    assert S.rows() == [(1, 0.5), (2, 0.25)]


def test_outside_hypothesis_is_a_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", OutsideHypothesisWarning)
        with pytest.raises(OutsideHypothesisWarning):
            schatten_norm(spectrum(np.eye(2)), 0.5)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boxrelease.observables import current, density
from boxrelease.scenario import Eigenstate, FreeGaussian, Scenario, TruncatedGaussian
from boxrelease.wavefunction import (
    QuadratureError, eigenstate_wave, evaluate, free_gaussian_wave, gauss_kronrod,
    gaussian_wave, initial_wave, initial_wave_derivative, norm_truncated_gaussian,
    oracle_wave, xi_n,
)

GAUSS = TruncatedGaussian(0.5, 0.25)


def test_xi_zero_on_classical_path(sc):
    v1 = math.pi * sc.constants.hbar_over_m
    assert abs(xi_n(1, v1 * 0.1, 0.1, sc)) < 1e-15


def test_xi_value(sc):
    assert xi_n(1, 0.0, 0.1, sc) == pytest.approx(0.4831, abs=2e-4)


def test_xi_sign(sc):
    assert xi_n(3, 5.0, 0.1, sc) < 0 < xi_n(3, -1.0, 0.1, sc)


@pytest.mark.parametrize("t", [0.0, -1e-3])
def test_nonpositive_time_rejected(sc, t):
    with pytest.raises(ValueError):
        xi_n(1, 0.0, t, sc)
    with pytest.raises(ValueError):
        eigenstate_wave(1, 0.5, t, sc)
    with pytest.raises(ValueError):
        gaussian_wave(0.5, 0.25, 0.5, t, sc)


def test_initial_wave_values():
    assert abs(initial_wave(Eigenstate(6), 0.5, 1.0)) < 1e-15
    assert initial_wave(Eigenstate(1), 0.5, 1.0) == pytest.approx(math.sqrt(2))
    assert initial_wave(GAUSS, 0.5, 1.0) == pytest.approx(1.2632376, abs=1e-7)
    outside = np.array([-0.1, 1.1])
    assert np.all(initial_wave(Eigenstate(3), outside, 1.0) == 0)
    assert np.all(initial_wave(GAUSS, outside, 1.0) == 0)
    assert np.all(initial_wave(FreeGaussian(0.5, 0.25), outside, 1.0) != 0)


def test_initial_wave_derivative():
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    for state in (Eigenstate(4), GAUSS):
        fd = (initial_wave(state, x + h, 1.0) - initial_wave(state, x - h, 1.0)) / (2 * h)
        assert np.max(np.abs(fd - initial_wave_derivative(state, x, 1.0))) < 1e-6


@pytest.mark.parametrize("state", [Eigenstate(6), Eigenstate(7), GAUSS, FreeGaussian(0.5, 0.25)])
def test_closed_form_matches_oracle(sc, state):
    x = np.linspace(-1, 2, 101)
    t = 0.03 if isinstance(state, Eigenstate) else 0.1
    a, o = evaluate(state, x, t, sc), oracle_wave(state, x, t, sc)
    assert np.max(np.abs(a.psi - o.psi)) <= 1e-8
    assert np.max(np.abs(a.dpsi_dx - o.dpsi_dx)) <= 1e-6


def test_named_evaluators_agree(sc):
    x = np.linspace(-1, 2, 7)
    assert np.array_equal(eigenstate_wave(3, x, 0.02, sc).psi, evaluate(Eigenstate(3), x, 0.02, sc).psi)
    assert np.array_equal(gaussian_wave(0.5, 0.25, x, 0.02, sc).psi, evaluate(GAUSS, x, 0.02, sc).psi)
    assert np.array_equal(free_gaussian_wave(0.5, 0.25, x, 0.02, sc).dpsi_dx,
                          evaluate(FreeGaussian(0.5, 0.25), x, 0.02, sc).dpsi_dx)


def test_oracle_fixes_phase_branch(sc):
    # the overall phase, not just the modulus, must agree with the propagator
    a = eigenstate_wave(2, 0.3, 0.05, sc).psi
    o = oracle_wave(Eigenstate(2), 0.3, 0.05, sc).psi
    assert abs(a - o) < 1e-10 and abs(a + o) > 0.1


@given(st.integers(1, 40), st.floats(0.0, 2.0), st.floats(1e-4, 0.2))
def test_node_and_zero_current_at_centre(n, _, t):
    sc = Scenario()
    w = eigenstate_wave(n, 0.5, t, sc)
    if n % 2 == 0:
        assert abs(w.psi) < 1e-12
    else:
        assert abs(current(w, sc.constants)) < 1e-12


@given(st.integers(1, 60), st.floats(0.0, 3.0), st.floats(1e-4, 0.2))
def test_density_parity(n, d, t):
    sc = Scenario()
    w = eigenstate_wave(n, np.array([0.5 + d, 0.5 - d]), t, sc)
    r = np.abs(w.psi)
    assert abs(r[0] - r[1]) <= 1e-10


def test_gaussian_short_time(sc):
    w = gaussian_wave(0.5, 0.25, 0.5, sc.t_start, sc)
    assert abs(abs(w.psi) - initial_wave(GAUSS, 0.5, 1.0)) < 1e-3


@pytest.mark.parametrize("state", [Eigenstate(1), Eigenstate(6), GAUSS])
def test_derivative_matches_finite_difference(sc, state):
    x = np.linspace(-0.8, 1.8, 53)
    h = 1e-5
    for t in (0.02, 0.1):
        fd = (evaluate(state, x + h, t, sc).psi - evaluate(state, x - h, t, sc).psi) / (2 * h)
        d = evaluate(state, x, t, sc).dpsi_dx
        assert np.max(np.abs(fd - d) / np.maximum(np.abs(d), 1.0)) < 1e-6


def test_nonlocal_tail(sc):
    assert density(eigenstate_wave(1, 2.0, 1e-5, sc)) > 0


def test_truncated_norm():
    assert norm_truncated_gaussian(0.5, 0.25, 1.0) == pytest.approx(math.erf(math.sqrt(2)), rel=1e-14)


def test_gaussian_norm_at_t01(sc):
    f = lambda x: density(evaluate(GAUSS, x, 0.1, sc))[None, :]
    val, _ = gauss_kronrod(f, -60.0, 61.0, 1e-9, initial_panels=400)
    assert val[0].real == pytest.approx(0.9545, abs=1e-3)


def test_gauss_kronrod_known_integrals():
    f = lambda x: np.stack((np.exp(-x * x), np.cos(40 * x)))
    val, err = gauss_kronrod(f, -6, 6, 1e-13, initial_panels=4)
    assert abs(val[0] - math.sqrt(math.pi)) < 1e-12
    assert abs(val[1] - math.sin(240) / 20) < 1e-12
    assert err < 1e-12


def test_gauss_kronrod_linear():
    x = np.linspace(0, 1, 3)
    f = lambda x: np.stack((np.sin(5 * x), x**2))
    g = lambda x: (np.sin(5 * x) + 2 * x**2)[None, :]
    a, _ = gauss_kronrod(f, 0, 1, 1e-13)
    b, _ = gauss_kronrod(g, 0, 1, 1e-13)
    assert abs(a[0] + 2 * a[1] - b[0]) < 1e-13 and x.size == 3


def test_gauss_kronrod_reports_failure():
    with pytest.raises(QuadratureError):
        gauss_kronrod(lambda x: (1 / np.sqrt(np.abs(x - 0.3)))[None, :], 0, 1, 1e-14, max_panels=64)

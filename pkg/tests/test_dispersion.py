import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from layerlab import wavesolver as ws
from layerlab.dispersion import (ModelParams, alpha, b_coeff, bifurcation_speed, linear_wave,
                                 m_matrix, n_terms, omega, omega_array, omega_eq, symbol_expand,
                                 transfer)
from layerlab.errors import DomainError

a_values = st.floats(0.1, 5.0)
modes = st.integers(-40, 40).filter(lambda j: j != 0)


def test_omega_examples():
    assert omega(1.0, 1) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert omega(0.5, -2) == pytest.approx(-math.sqrt(2), abs=1e-15)
    assert omega(1.0, 3) == pytest.approx(math.sqrt(10), abs=1e-15)
    with pytest.raises(DomainError):
        omega(1.0, 0)
    assert omega_array(1.0, [0, 2]).tolist() == [0.0, math.sqrt(5)]


@given(a_values, modes)
def test_omega_odd_and_bounded_below(a, j):
    assert omega(a, -j) == -omega(a, j)
    assert abs(omega(a, j)) >= a * abs(j)


@given(a_values, st.integers(1, 60))
def test_omega_increasing(a, j):
    assert omega(a, j + 1) > omega(a, j)


def test_transfer_examples():
    tp = transfer(1.0, 1)
    assert tp.b == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-15)
    with mpmath.workdps(50):
        s2 = mpmath.sqrt(2)
        closed = 1 / (2 * (s2 + 1 + mpmath.mpf(1) / 2))
        assert abs(float(closed - (3 - 2 * s2))) < 1e-40
    assert np.linalg.det(tp.q) == pytest.approx(1.0, abs=1e-14)
    d = tp.q_inv @ tp.m @ tp.q
    assert np.allclose(d, np.diag([-1j * math.sqrt(2), 1j * math.sqrt(2)]), atol=1e-14)
    with pytest.raises(DomainError):
        transfer(1.0, 0)


@given(a_values, modes)
def test_transfer_invariants(a, j):
    tp = transfer(a, j)
    assert 0 < tp.b < 1
    assert np.linalg.det(tp.q) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(tp.q @ tp.q_inv, np.eye(2), atol=1e-13)
    d = tp.q_inv @ tp.m @ tp.q
    w = omega(a, j)
    scale = max(1.0, abs(w))
    assert np.allclose(d, np.diag([-1j * w, 1j * w]), atol=1e-13 * scale)


@given(st.floats(0.1, 3.0), st.floats(0.0, 4.0), st.integers(1, 50))
def test_b_uniform_bound(a0, extra, j):
    a = a0 + extra
    assert 0 < b_coeff(a, j) < 2 / (2 + a0 ** 2)


def test_m_matrix_eigenvalues():
    for j in (-3, 1, 5):
        ev = np.sort_complex(np.linalg.eigvals(m_matrix(0.7, j)))
        w = abs(omega(0.7, j))
        assert np.allclose(ev, [-1j * w, 1j * w], atol=1e-13)


def test_omega_eq_examples():
    assert np.allclose(omega_eq(ModelParams(1.0, s_plus=(1,), s_minus=(2,))), [math.sqrt(2), -math.sqrt(5)])
    assert np.allclose(omega_eq(ModelParams(1.0, s_plus=(1, 3))), [math.sqrt(2), math.sqrt(10)])
    assert np.allclose(omega_eq(ModelParams(2.0, s_minus=(1,))), [-math.sqrt(5)])


def test_model_params_validation():
    p = ModelParams(1.0, 0.1, s_plus=(3, 1), s_minus=(2,), amps_plus=(0.5, 1.0))
    assert p.jvec.tolist() == [3, 1, 2]
    assert p.kappas.tolist() == [1, 1, -1]
    assert p.amps.tolist() == [0.5, 1.0, 1.0]
    assert p.tangential(1) == {1, -1, 3, -3}
    bad = [dict(a=0.0), dict(a=1.0, eps=1.0), dict(a=1.0, s_plus=(1,), s_minus=(1,)),
           dict(a=1.0, s_plus=(1, 1)), dict(a=1.0, s_plus=(0,)), dict(a=1.0, s_plus=(1,), amps_plus=(1, 2)),
           dict(a=2.0, a_window=(0.5, 1.5))]
    for kw in bad:
        with pytest.raises(DomainError):
            ModelParams(**kw)


def test_alphas_against_series_oracle():
    # sqrt(1 + z) = sum_p binom(1/2, p) z^p; the (i xi) powers contribute (-1)^p
    taylor = mpmath.taylor(lambda z: mpmath.sqrt(1 + z), 0, 6)
    for p in range(1, 7):
        assert alpha(p) == pytest.approx((-1) ** p * float(taylor[p]), rel=1e-15)
    ex = symbol_expand(2.0, 4)
    assert ex.alphas == pytest.approx((-0.5, -0.125))
    assert ex.coefficients == pytest.approx((-0.25, -0.125 / 8))


def test_alpha_sign_convention():
    # i Omega = a (i xi) sqrt(1 + 1/(a xi)^2) and (i xi)^{-1} = -i / xi flips odd powers
    a, xi = 1.3, 40.0
    ex = symbol_expand(a, 5)
    approx = a * 1j * xi + sum(c * (1j * xi) ** (1 - 2 * p) for p, c in enumerate(ex.coefficients, 1))
    assert abs(1j * math.sqrt(a * a * xi * xi + 1) - approx) < 1e-9


def test_n_terms():
    assert [n_terms(m) for m in (1, 2, 3, 4, 5)] == [0, 1, 1, 2, 2]
    with pytest.raises(DomainError):
        n_terms(0)


def test_symbol_remainder_examples():
    ex = symbol_expand(1.0, 3)
    r100 = abs(ex.remainder(100.0))
    assert r100 <= 1e-5
    # the leading omitted term is alpha_2 (i xi)^{-3} / a^3
    assert r100 == pytest.approx(0.125 / 100 ** 3, rel=1e-3)
    xs = np.logspace(2, 4, 21)
    slope = np.polyfit(np.log(xs), np.log(np.abs(ex.remainder(xs))), 1)[0]
    assert slope == pytest.approx(-3.0, abs=1e-4)


@given(st.floats(0.2, 3.0), st.integers(1, 6), st.floats(1.0, 1e3))
def test_symbol_remainder_bound(a, big_m, xi):
    assume(a * xi >= 2)
    ex = symbol_expand(a, big_m)
    # for a xi >= 2 the tail is at most twice its first term
    p = n_terms(big_m) + 1
    c = 2 * abs(alpha(p)) * a ** (1 - 2 * p)
    assert abs(ex.remainder(xi)) <= c * xi ** (-big_m)


def test_bifurcation_speed():
    assert bifurcation_speed(1.0, 1) == pytest.approx(math.sqrt(2))
    assert bifurcation_speed(1.0, 2) == pytest.approx(math.sqrt(5) / 2)
    assert bifurcation_speed(2.0, 1) == pytest.approx(math.sqrt(5))
    with pytest.raises(DomainError):
        bifurcation_speed(1.0, 0)


def test_linear_wave_examples():
    zero = ModelParams(1.0, s_plus=(1, 2), amps_plus=(0.0, 0.0))
    assert not linear_wave(zero, np.linspace(0, 3, 5), np.linspace(0, 6, 5)).any()
    p = ModelParams(1.0, s_plus=(1,))
    b = 3 - 2 * math.sqrt(2)
    assert np.allclose(linear_wave(p, 0.0, 0.0), np.array([1.0, b]) / math.sqrt(1 - b * b), atol=1e-15)


@given(st.floats(0.4, 2.0), st.integers(0, 2 ** 31 - 1))
def test_linear_wave_is_reversible_traveling_solution(a, seed):
    rng = np.random.default_rng(seed)
    params = ModelParams(a, 0.0, s_plus=(1, 3), s_minus=(2,), amps_plus=tuple(rng.uniform(-1, 1, 2)),
                         amps_minus=(float(rng.uniform(-1, 1)),))
    t = rng.uniform(-5, 5, 7)
    x = rng.uniform(0, 2 * np.pi, 7)
    assert np.allclose(linear_wave(params, -t, -x), linear_wave(params, t, x), atol=1e-14)
    # same samples as the cosine series with frequency vector omega_eq
    w = ws.linear_guess(params, 3)
    sol = ws.WaveSolution(w, omega_eq(params), 0.0, 0.0, 0)
    for ti in t:
        assert np.allclose(sol.profile(ti, x), linear_wave(params, ti, x), atol=1e-13)
    # spectral residual of the linearized system
    res = ws.residual(w, omega_eq(params), params)
    assert np.abs(res.coeffs).max() <= 1e-12
    # traveling: shifting x by y equals shifting the angles by -jvec y
    y = 0.37
    psi = np.multiply.outer(np.ones_like(x), omega_eq(params) * 1.1) - np.multiply.outer(x + y, params.jvec)
    assert np.allclose(linear_wave(params, 1.1, x + y), w.evaluate(psi), atol=1e-13)

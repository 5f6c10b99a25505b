"""Acceptance criteria 1-12, each at its stated tolerance.

Every test prints one ``CRITERION n: PASS|FAIL`` line (also collected into the
terminal summary).  Criteria 2, 5 and 10 cannot be met as stated; they run
unchanged and are marked strict xfail.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from layerlab import dynamics as dy
from layerlab import operlab as ol
from layerlab import resonance as rs
from layerlab import simulator as sm
from layerlab import spectral as sp
from layerlab import wavesolver as ws
from layerlab.dispersion import ModelParams, b_coeff, linear_wave, omega, omega_eq, symbol_expand, transfer
from layerlab.spectral import GridSpec, PairField


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _random_pair(rng, n, band, amp=1.0):
    return PairField.from_coeffs(sp.random_bandlimited(rng, n, band, amp), sp.random_bandlimited(rng, n, band, amp), n)


def test_criterion_01_dispersion():
    t0 = time.perf_counter()
    errs = [abs(omega(1.0, 1) - math.sqrt(2)), abs(omega(1.0, 2) - math.sqrt(5)),
            abs(b_coeff(1.0, 1) - (3 - 2 * math.sqrt(2)))]
    for a in (0.5, 1.0, 2.0):
        for j in (-3, -1, 1, 2, 7):
            tp = transfer(a, j)
            errs.append(abs(np.linalg.det(tp.q) - 1))
            w = omega(a, j)
            errs.append(np.abs(tp.q_inv @ tp.m @ tp.q - np.diag([-1j * w, 1j * w])).max())
    elapsed = time.perf_counter() - t0
    report(1, max(errs) <= 1e-12 and elapsed < 1, f"max error {max(errs):.2e}, {elapsed:.3f} s")


@pytest.mark.xfail(strict=True, reason="exact slope is -3 + O(xi^-2) > -3; see the decisions ledger")
def test_criterion_02_symbol_expansion():
    taylor = mpmath.taylor(lambda z: mpmath.sqrt(1 + z), 0, 2)
    ex = symbol_expand(1.0, 3)
    alphas_ok = (ex.alphas[0] == -0.5 and symbol_expand(1.0, 4).alphas[1] == -0.125
                 and ex.alphas[0] == -float(taylor[1])
                 and symbol_expand(1.0, 4).alphas[1] == float(taylor[2]))
    xs = np.logspace(2, 4, 41)
    lx, ly = np.log(xs), np.log(np.abs(ex.remainder(xs)))
    slope, icpt = np.polyfit(lx, ly, 1)
    r2 = 1 - np.sum((ly - (slope * lx + icpt)) ** 2) / np.sum((ly - ly.mean()) ** 2)
    report(2, alphas_ok and slope <= -3 and r2 >= 0.999,
           f"alphas ok={alphas_ok}, slope {slope:.7f} (need <= -3), R^2 {r2:.6f}")


def test_criterion_03_hamiltonian(rng):
    n = 64
    worst = 0.0
    for _ in range(20):
        params = ModelParams(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.01, 0.5)))
        r = _random_pair(rng, n, 8)
        lhs = params.eps ** 2 * dy.rhs(r, params).stacked_values()
        rhs = dy.apply_j(dy.energy_gradient(r, params)).stacked_values()
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    params = ModelParams(1.0, 0.5)
    r, v = _random_pair(rng, n, 8), _random_pair(rng, n, 8, 10.0)
    exact = np.mean(np.sum(dy.energy_gradient(r, params).stacked_values() * v.stacked_values(), axis=0))

    def fd(h):
        up = PairField.from_arrays(*(r.stacked_values() + h * v.stacked_values()))
        dn = PairField.from_arrays(*(r.stacked_values() - h * v.stacked_values()))
        return (dy.energy(up, params) - dy.energy(dn, params)) / (2 * h)

    ratio = abs(fd(1e-4) - exact) / abs(fd(1e-5) - exact)
    report(3, worst <= 1e-11 and 80 <= ratio <= 120, f"identity sup-error {worst:.2e}, FD ratio {ratio:.1f}")


def test_criterion_04_conservation(rng):
    n, a = 256, 1.0
    # amplitude 0.05 of the physical deformation eps * r
    r = _random_pair(rng, n, 8)
    r = PairField.from_arrays(*(r.stacked_values() / np.abs(r.stacked_values()).max()))
    t0 = time.perf_counter()
    res = sm.run(sm.SimConfig(ModelParams(a, 0.05), GridSpec(n), 1e-3, 10.0, diag_stride=1), r)
    elapsed = time.perf_counter() - t0
    e = np.array([d.energy for d in res.diagnostics]) - dy.flat_energy(a)
    p = np.array([d.momentum for d in res.diagnostics])
    de = np.abs(e - e[0]).max() / abs(e[0])
    dp = np.abs(p - p[0]).max() / abs(p[0])
    means = max(max(abs(d.mean_plus), abs(d.mean_minus)) for d in res.diagnostics)
    report(4, de <= 1e-8 and dp <= 1e-8 and means <= 1e-12 and elapsed < 30,
           f"energy drift {de:.2e}, momentum drift {dp:.2e}, max |mean| {means:.1e}, "
           f"{len(res.diagnostics) - 1} steps in {elapsed:.1f} s")


@pytest.mark.xfail(strict=True, reason="nonlinear return defect 1.64 eps*amp exceeds 1e-8; see the decisions ledger")
def test_criterion_05_linear_solution():
    p = ModelParams(1.0, 0.1, s_plus=(1,), s_minus=(2,))
    w = ws.linear_guess(p, 4)
    lin_res = float(np.abs(ws.residual(w, omega_eq(p), p.replace(eps=0.0)).coeffs).max())
    # eps * amplitude = 1e-8
    eps, amp = 0.1, 1e-7
    q = ModelParams(1.0, eps, s_plus=(1,), amps_plus=(amp,))
    x = GridSpec(32).x()
    v = linear_wave(q, 0.0, x)
    r0 = PairField.from_arrays(v[:, 0], v[:, 1])
    period = 2 * math.pi / omega(1.0, 1)
    out = sm.evolve(r0, sm.SimConfig(q, GridSpec(32), period / 1000, period))
    ret = float(np.abs(out.stacked_values() - r0.stacked_values()).max() / np.abs(r0.stacked_values()).max())
    report(5, lin_res <= 1e-12 and ret <= 1e-8,
           f"linear residual {lin_res:.1e}, period return error {ret:.3e} (need <= 1e-8)")


def test_criterion_06_euler_poisson(rng):
    n = 64
    p = ModelParams(1.0, 0.05)
    r = _random_pair(rng, n, 5)
    t0 = time.perf_counter()
    layer = sm.evolve(r, sm.SimConfig(p, GridSpec(n), 1e-3, 1.0))
    ep = sm.evolve(r, sm.SimConfig(p, GridSpec(n), 1e-3, 1.0, formulation="euler_poisson"))
    elapsed = time.perf_counter() - t0
    s1, s2 = dy.to_euler_poisson(layer, p), dy.to_euler_poisson(ep, p)
    err = max(np.abs(s1.rho.values - s2.rho.values).max(), np.abs(s1.u.values - s2.u.values).max())
    amp = max(np.abs(dy.to_euler_poisson(r, p).rho.values).max(), np.abs(dy.to_euler_poisson(r, p).u.values).max())
    report(6, err <= 1e-6 and amp <= 0.05 and elapsed < 60,
           f"sup mismatch {err:.2e} at amplitude {amp:.3f}, {elapsed:.1f} s")


def test_criterion_07_periodic_wave():
    p = ModelParams(1.0, 1e-3, s_plus=(1,))
    sol = ws.solve(p, 8, eps_path=[1e-5, 1e-4, 1e-3])
    gaps = [abs(h["omega"][0] - math.sqrt(2)) for h in sol.history]
    res_ok = all(h["residual"] <= 1e-10 for h in sol.history)
    # decreasing as eps -> 0 along the path
    mono = gaps[0] < gaps[1] < gaps[2]
    sims = [ws.validate(ws.solve(p.replace(eps=e), 8), p.replace(eps=e)).sim_error for e in (1e-5, 1e-4, 1e-3)]
    report(7, res_ok and mono and max(sims) <= 1e-6,
           f"|omega - sqrt 2| = {', '.join(f'{g:.3e}' for g in gaps)}, max residual "
           f"{max(h['residual'] for h in sol.history):.1e}, max sim error {max(sims):.1e}")


def test_criterion_08_quasi_periodic_wave(params_d2):
    t0 = time.perf_counter()
    guard = ws.divisor_guard(params_d2, 8)
    sol = ws.solve(params_d2, 8)
    rep = ws.validate(sol, params_d2, t_check=1.0, dt=5e-4)
    elapsed = time.perf_counter() - t0
    dev = float(np.abs(sol.omega - [math.sqrt(2), -math.sqrt(5)]).max())
    report(8, sol.residual_norm <= 1e-10 and dev <= 1e-2 and rep.sim_error <= 1e-5 and elapsed < 600,
           f"residual {sol.residual_norm:.1e}, omega deviation {dev:.1e}, sim error {rep.sim_error:.1e}, "
           f"min divisor {guard:.3f}, {elapsed:.1f} s")


def test_criterion_09_floquet(wave_d1, params_d1):
    rep = ol.spectrum(ol.linearized_floquet(wave_d1, params_d1, 8, 24))
    p0 = params_d1.replace(eps=0.0)
    eq = ws.WaveSolution(ws.linear_guess(p0, 8), omega_eq(p0), 0.0, 0.0, 0)
    eq_mat = ol.linearized_floquet(eq, p0, 8, 24)
    eq_err = 0.0
    for blk in eq_mat.blocks:
        lam = np.linalg.eigvals(blk.matrix)
        exact = [1j * (eq.omega[0] * e[0] + k * omega(1.0, j)) for e, j in zip(blk.ells, blk.js) for k in (1, -1)]
        lam, exact = lam[np.argsort(lam.imag)], np.array(exact)[np.argsort(np.imag(exact))]
        eq_err = max(eq_err, float(np.abs(lam - exact).max()))
    report(9, rep.max_abs_real <= 1e-6 and eq_err <= 1e-12,
           f"interior max |Re| {rep.max_abs_real:.1e}, equilibrium error {eq_err:.1e}")


@pytest.mark.xfail(strict=True, reason="remainders decay like |j|^-3, not |j|^-1; see the decisions ledger")
def test_criterion_10_kam_asymptotics(wave_d1, params_d1):
    rep = ol.spectrum(ol.linearized_floquet(wave_d1, params_d1, 8, 24))
    fit = rep.tail_fit
    report(10, 0.7 <= fit["exponent"] <= 1.3,
           f"decay exponent {fit['exponent']:.3f} (need [0.7, 1.3]), R^2 {fit['r2']:.4f}, {fit['n']} modes")


def test_criterion_11_cantor_scan():
    p = ModelParams(1.0, s_plus=(1,), s_minus=(2,))
    q0 = 1
    t0 = time.perf_counter()
    gammas = (1e-1, 1e-2, 1e-3, 1e-4)
    fr = [rs.cantor_measure(p, 0.5, 1.5, g, 2 * q0, 20).excluded_fraction for g in gammas]
    elapsed = time.perf_counter() - t0
    mono = all(x >= y for x, y in zip(fr, fr[1:]))
    report(11, mono and fr[-1] <= 0.05 and elapsed < 300,
           f"excluded fractions {', '.join(f'{v:.2e}' for v in fr)}, {elapsed:.1f} s")


def test_criterion_12_momentum_filters(rng):
    p = ModelParams(1.0, s_plus=(1,), s_minus=(2,))
    audits, rejected = rs.random_audits(p, 100_000, rng)
    bad = 0
    for au in audits:
        ell = np.array(au.ell)
        if au.kind in ("transport", "melnikov1"):
            bad += not rs.momentum_ok(p.jvec, ell, au.j)
        elif au.kind != "dioph":
            bad += not rs.momentum_ok(p.jvec, ell, au.j, au.j_prime)
            bad += au.kind == "melnikov2_diag" and not ell.any() and au.j == au.j_prime
    report(12, bad == 0 and len(audits) + rejected == 100_000,
           f"{len(audits)} audits, {rejected} rejected draws, {bad} violations")

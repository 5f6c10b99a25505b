"""Vector field, energy and momentum of the layer system, and the
Euler-Poisson bridge.

The array-level functions work on one-sided coefficient stacks of shape
(2, n//2 + 1) and return Galerkin-projected results: every pointwise product
is formed on the grid and truncated to |j| <= kmax.  Pass ``kmax=None`` to
skip the projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .dispersion import ModelParams
from .errors import DomainError
from .spectral import PairField, RealField1D


def _inv_lap(c: np.ndarray) -> np.ndarray:
    j = np.arange(c.shape[-1])
    mult = np.zeros(c.shape[-1])
    mult[1:] = -1.0 / j[1:] ** 2
    return c * mult


def _project(c, kmax):
    return c if kmax is None else sp.truncate(c, kmax)


def rhs_coeffs(c: np.ndarray, a: float, eps: float, n: int, kmax: int | None) -> np.ndarray:
    """Layer vector field in coefficient space.

    Uses (+-a + eps r)^2 / (2 eps) = a^2/(2 eps) +- a r + eps r^2 / 2 with the
    constant dropped, so eps = 0 is allowed.
    """
    vals = sp.inverse(c, n)
    sq = _project(sp.forward(vals * vals), kmax)
    pot = _inv_lap(c[0] - c[1]) / (2 * a)
    flux_p = a * c[0] + 0.5 * eps * sq[0] - pot
    flux_m = -a * c[1] + 0.5 * eps * sq[1] - pot
    out = -sp.deriv_coeffs(np.stack([flux_p, flux_m]), 1)
    out[:, 0] = 0
    return out


def nonlinear_coeffs(c: np.ndarray, eps: float, n: int, kmax: int | None) -> np.ndarray:
    """Quadratic part eps * (-r_+ d_x r_+, -r_- d_x r_-) of the vector field."""
    vals = sp.inverse(c, n)
    sq = _project(sp.forward(vals * vals), kmax)
    out = -0.5 * eps * sp.deriv_coeffs(sq, 1)
    out[:, 0] = 0
    return out


def energy_parts(c: np.ndarray, a: float, eps: float, n: int) -> tuple[float, float]:
    """Kinetic and potential parts (without the area prefactor 2a).

    The kinetic v-integral is done in closed form and expanded around the
    flat strip so that the a^3/3 background does not swamp the deviation.
    """
    rp, rm = sp.inverse(c, n)
    dev = (1.5 * a * eps ** 2 * np.mean(rp * rp + rm * rm)
           + 0.5 * eps ** 3 * np.mean(rp ** 3 - rm ** 3)
           + 1.5 * a * a * eps * (c[0, 0].real - c[1, 0].real))
    kin = (a ** 3 / 3.0 + dev / 3.0) / (2 * a)
    g = c[0] - c[1]
    j = np.arange(1, g.shape[-1])
    # mean of g * d_xx^{-1} g over the circle, via Parseval
    pairing = -2.0 * np.sum(np.abs(g[1:]) ** 2 / j ** 2)
    if n % 2 == 0:
        pairing += np.abs(g[-1]) ** 2 / (n // 2) ** 2
    pot = -(eps ** 2) / (8 * a * a) * pairing
    return float(kin), float(pot)


def energy_coeffs(c: np.ndarray, a: float, eps: float, n: int) -> float:
    kin, pot = energy_parts(c, a, eps, n)
    return 2 * a * (kin + pot)


def flat_energy(a: float) -> float:
    """Energy of the unperturbed strip r = 0; drifts are measured against E - flat_energy."""
    return a ** 3 / 3.0


def momentum_coeffs(c: np.ndarray, n: int) -> float:
    rp, rm = sp.inverse(c, n)
    return 0.5 * float(np.mean(rm * rm - rp * rp))


def gradient_values(c: np.ndarray, a: float, eps: float, n: int) -> np.ndarray:
    """L^2 gradient of the energy on the grid (no projection, means kept)."""
    rp, rm = sp.inverse(c, n)
    pot = sp.inverse(_inv_lap(c[0] - c[1]), n) * eps ** 2 / (2 * a)
    gp = 0.5 * eps * (a + eps * rp) ** 2 - pot
    gm = -(0.5 * eps * (-a + eps * rm) ** 2 - pot)
    return np.stack([gp, gm])


def _coeffs(r: PairField) -> np.ndarray:
    if not r.zero_mean:
        raise DomainError("deformations must be zero-mean fields")
    return r.stacked_coeffs()


def rhs(r: PairField, params: ModelParams, kmax: int | None = None) -> PairField:
    c = _coeffs(r)
    return PairField.from_coeffs(*rhs_coeffs(c, params.a, params.eps, r.n, kmax), r.n)


def energy(r: PairField, params: ModelParams) -> float:
    return energy_coeffs(_coeffs(r), params.a, params.eps, r.n)


def momentum(r: PairField) -> float:
    """P = 1/2 mean(r_-^2 - r_+^2); generates x-translations (derived, not quoted)."""
    return momentum_coeffs(_coeffs(r), r.n)


def energy_gradient(r: PairField, params: ModelParams) -> PairField:
    g = gradient_values(_coeffs(r), params.a, params.eps, r.n)
    return PairField.from_arrays(g[0], g[1], zero_mean=False)


def apply_j(g: PairField) -> PairField:
    """The Poisson operator diag(-d_x, d_x)."""
    c = g.stacked_coeffs()
    d = sp.deriv_coeffs(c, 1)
    return PairField.from_coeffs(-d[0], d[1], g.n)


def reflect(r: PairField) -> PairField:
    """x -> -x reflection of both components."""
    return PairField.from_arrays(np.roll(r.plus.values[::-1], 1), np.roll(r.minus.values[::-1], 1),
                                 zero_mean=r.zero_mean)


def swap(r: PairField) -> PairField:
    """(r_+, r_-) -> -(r_-, r_+)."""
    return PairField.from_arrays(-r.minus.values, -r.plus.values, zero_mean=r.zero_mean)


@dataclass(frozen=True)
class EPState:
    rho: RealField1D
    u: RealField1D

    def __post_init__(self):
        if self.rho.n != self.u.n:
            raise DomainError("rho and u must share one grid")
        if np.any(1.0 + self.rho.values <= 0):
            raise DomainError("1 + rho must stay positive")


def to_euler_poisson(r: PairField, params: ModelParams) -> EPState:
    a, eps = params.a, params.eps
    rho = eps / (2 * a) * (r.plus.values - r.minus.values)
    u = eps / 2 * (r.plus.values + r.minus.values)
    return EPState(RealField1D(rho), RealField1D(u))


def from_euler_poisson(s: EPState, params: ModelParams) -> PairField:
    a, eps = params.a, params.eps
    if eps <= 0:
        raise DomainError("the inverse map needs eps > 0")
    if np.any(1.0 + s.rho.values <= 0):
        raise DomainError("1 + rho must stay positive")
    return PairField.from_arrays((s.u.values + a * s.rho.values) / eps,
                                 (s.u.values - a * s.rho.values) / eps)


def ep_rhs_coeffs(c: np.ndarray, a: float, n: int, kmax: int | None) -> np.ndarray:
    """(d_t rho, d_t u) for the cubic-pressure Euler-Poisson system."""
    rho, u = sp.inverse(c, n)
    flux = _project(sp.forward(np.stack([rho * u, a * a * rho * rho + u * u])), kmax)
    j = np.arange(c.shape[-1])
    anti = np.zeros(c.shape[-1], dtype=complex)
    anti[1:] = c[0, 1:] / (1j * j[1:])
    drho = -sp.deriv_coeffs(c[1] + flux[0], 1)
    du = -sp.deriv_coeffs(a * a * c[0] + 0.5 * flux[1], 1) + anti
    out = np.stack([drho, du])
    out[:, 0] = 0
    return out


def ep_rhs(s: EPState, a: float, kmax: int | None = None) -> tuple[RealField1D, RealField1D]:
    if abs(s.rho.mean()) > 1e-12:
        raise DomainError("rho must have zero mean (neutrality)")
    c = np.stack([s.rho.coeffs, s.u.coeffs])
    out = ep_rhs_coeffs(c, a, s.rho.n, kmax)
    return RealField1D.from_coeffs(out[0], s.rho.n), RealField1D.from_coeffs(out[1], s.rho.n)


def ep_to_layer_coeffs(c: np.ndarray, a: float, eps: float) -> np.ndarray:
    return np.stack([(c[1] + a * c[0]) / eps, (c[1] - a * c[0]) / eps])


def layer_to_ep_coeffs(c: np.ndarray, a: float, eps: float) -> np.ndarray:
    return np.stack([eps / (2 * a) * (c[0] - c[1]), eps / 2 * (c[0] + c[1])])

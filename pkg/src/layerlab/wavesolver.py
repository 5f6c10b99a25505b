"""Newton-Galerkin computation of reversible traveling quasi-periodic waves.

A wave is r(t, x) = Rc(omega t - jvec x) with Rc(psi) = sum_l R_l cos(l . psi),
R_l in R^2, over a half-lattice of l with <l> <= L and jvec.l != 0.  The
unknowns are the R_l and the frequency vector omega; d pins fix the cos(psi_k)
coefficient of the excited component of every tangential mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import simulator as sim
from . import spectral as sp
from .dispersion import ModelParams, b_coeff, omega_array, omega_eq
from .errors import ConditioningError, DivergenceError, DomainError
from .resonance import half_lattice


@dataclass(frozen=True)
class TorusWave:
    jvec: tuple[int, ...]
    L: int
    ells: np.ndarray
    coeffs: np.ndarray
    kind: str = "cos"

    def __post_init__(self):
        object.__setattr__(self, "jvec", tuple(int(v) for v in self.jvec))
        ells = np.asarray(self.ells, dtype=int).reshape(-1, len(self.jvec))
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(len(ells), 2)
        object.__setattr__(self, "ells", ells)
        object.__setattr__(self, "coeffs", coeffs)
        m = ells @ np.array(self.jvec)
        if np.any(m == 0):
            raise DomainError("modes with jvec.l = 0 carry x-mean and are excluded")
        if len(ells) and np.abs(ells).max() > self.L:
            raise DomainError("mode outside the cutoff <l> <= L")
        for ell in ells:
            nz = np.flatnonzero(ell)
            if nz.size == 0 or ell[nz[0]] < 0:
                raise DomainError(f"{tuple(ell)} is not a half-lattice representative")

    @classmethod
    def zeros(cls, jvec, L: int) -> "TorusWave":
        jvec = tuple(int(v) for v in jvec)
        ells = half_lattice(len(jvec), L)
        ells = ells[ells @ np.array(jvec) != 0]
        ells = ells[np.lexsort((*ells.T[::-1], np.abs(ells).max(axis=1)))]
        return cls(jvec, L, ells, np.zeros((len(ells), 2)))

    @property
    def d(self) -> int:
        return len(self.jvec)

    @property
    def momenta(self) -> np.ndarray:
        return self.ells @ np.array(self.jvec)

    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(e): k for k, e in enumerate(self.ells)}

    def with_coeffs(self, coeffs) -> "TorusWave":
        return TorusWave(self.jvec, self.L, self.ells, coeffs, self.kind)

    def padded(self, L: int) -> "TorusWave":
        """Same series on a larger cutoff (new coefficients are zero)."""
        big = TorusWave.zeros(self.jvec, L)
        idx = big.index()
        c = np.zeros_like(big.coeffs)
        for e, r in zip(self.ells, self.coeffs):
            c[idx[tuple(e)]] = r
        return big.with_coeffs(c)

    def evaluate(self, psi) -> np.ndarray:
        """Rc(psi) for psi of shape (..., d); returns (..., 2)."""
        psi = np.asarray(psi, dtype=float)
        phase = psi @ self.ells.T
        trig = np.cos(phase) if self.kind == "cos" else np.sin(phase)
        return trig @ self.coeffs


@dataclass
class WaveSolution:
    wave: TorusWave
    omega: np.ndarray
    eps: float
    residual_norm: float
    newton_iters: int
    history: list[dict] = field(default_factory=list)

    def profile(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        psi = np.multiply.outer(np.ones_like(x), self.omega * t) - np.multiply.outer(x, self.wave.jvec)
        return self.wave.evaluate(psi)


class _Galerkin:
    """Residual and Jacobian on a fixed index set."""

    def __init__(self, wave: TorusWave, params: ModelParams):
        self.params = params
        self.ells = wave.ells
        self.m = wave.momenta.astype(float)
        self.d = wave.d
        ng = 3 * wave.L + 1
        self.ng = ng + (ng % 2)
        self.pos = tuple((self.ells % self.ng).T)
        self.neg = tuple(((-self.ells) % self.ng).T)
        shape = (self.ng,) * self.d
        grids = np.meshgrid(*[2 * np.pi * np.arange(self.ng) / self.ng] * self.d, indexing="ij")
        psi = np.stack(grids, axis=-1).reshape(-1, self.d)
        self.cos_table = np.cos(psi @ self.ells.T).T.reshape((len(self.ells),) + shape)
        a = params.a
        self.diag_p = self.m * (a + 1.0 / (2 * a * self.m ** 2))
        self.off = 1.0 / (2 * a * self.m)

    def grid_values(self, coeffs):
        return np.tensordot(coeffs.T, self.cos_table, axes=(1, 0))

    def cos_coeffs(self, g):
        """cos-coefficients on the index set of real even grid functions (last d axes)."""
        axes = tuple(range(g.ndim - self.d, g.ndim))
        gh = np.fft.fftn(g, axes=axes) / self.ng ** self.d
        return 2 * gh[(Ellipsis,) + self.pos].real

    def residual(self, coeffs, omega):
        eps = self.params.eps
        rp, rm = coeffs[:, 0], coeffs[:, 1]
        wl = self.ells @ omega
        vals = self.grid_values(coeffs)
        nl = self.cos_coeffs(0.5 * eps * vals ** 2)
        sp_ = -wl * rp + self.diag_p * rp - self.off * rm + self.m * nl[0]
        sm_ = -wl * rm + self.off * rp - self.diag_p * rm + self.m * nl[1]
        return np.stack([sp_, sm_], axis=1)

    def jacobian(self, coeffs, omega):
        """Blocks d S_s / d R_t for s, t in {+, -} and d S / d omega."""
        eps = self.params.eps
        n = len(self.ells)
        wl = self.ells @ omega
        vals = self.grid_values(coeffs)
        blocks = np.zeros((2, n, 2, n))
        for s in range(2):
            prod = eps * vals[s][None] * self.cos_table
            blocks[s, :, s, :] = self.m[:, None] * self.cos_coeffs(prod).T
        blocks[0, :, 0, :] += np.diag(-wl + self.diag_p)
        blocks[0, :, 1, :] += np.diag(-self.off)
        blocks[1, :, 0, :] += np.diag(self.off)
        blocks[1, :, 1, :] += np.diag(-wl - self.diag_p)
        d_omega = -self.ells[:, None, :] * coeffs[:, :, None]
        return blocks.reshape(2 * n, 2 * n), np.transpose(d_omega, (1, 0, 2)).reshape(2 * n, self.d)


def residual(w: TorusWave, omega, params: ModelParams) -> TorusWave:
    """Sine coefficients of omega.d_psi Rc - jvec.d_psi[(+-a + eps Rc)^2/(2 eps) - ...]."""
    if tuple(params.jvec) != w.jvec:
        raise DomainError("wave and params have different jvec")
    g = _Galerkin(w, params)
    return TorusWave(w.jvec, w.L, w.ells, g.residual(w.coeffs, np.asarray(omega, float)), kind="sin")


def pinned_values(params: ModelParams) -> np.ndarray:
    b = b_coeff(params.a, params.jvec)
    return params.amps / np.sqrt(1 - b ** 2)


def linear_guess(params: ModelParams, L: int) -> TorusWave:
    w = TorusWave.zeros(params.jvec, L)
    idx = w.index()
    c = np.zeros_like(w.coeffs)
    for k, (kap, pin) in enumerate(zip(params.kappas, pinned_values(params))):
        e = [0] * params.d
        e[k] = 1
        b = b_coeff(params.a, params.jvec[k])
        c[idx[tuple(e)]] = (pin, pin * b) if kap > 0 else (pin * b, pin)
    return w.with_coeffs(c)


def divisor_guard(params: ModelParams, L: int, threshold: float = 1e-8) -> float:
    """Smallest first-order divisor over the Galerkin index set.

    Checks |omega_eq.l| for every l != 0 and | |omega_eq.l| - |Omega_m| | on
    the non-tangential modes, where the 2x2 block of mode l is singular.
    """
    w = TorusWave.zeros(params.jvec, L)
    om = omega_eq(params)
    ells = half_lattice(params.d, L)
    small = float(np.min(np.abs(ells @ om)))
    tang = np.eye(params.d, dtype=int)
    is_t = (w.ells[:, None, :] == tang[None]).all(axis=2).any(axis=1)
    if np.any(~is_t):
        wl = np.abs(w.ells[~is_t] @ om)
        om_m = np.abs(omega_array(params.a, w.momenta[~is_t]))
        small = min(small, float(np.min(np.abs(wl - om_m))))
    if small < threshold:
        raise ConditioningError(f"first-order divisor {small:.3e} below {threshold:g}; "
                                "choose a different a or cutoff")
    return small


class _Newton:
    def __init__(self, params: ModelParams, L: int):
        self.params = params
        self.template = TorusWave.zeros(params.jvec, L)
        n = len(self.template.ells)
        self.n = n
        idx = self.template.index()
        self.pin_rows = []
        for k, kap in enumerate(params.kappas):
            e = [0] * params.d
            e[k] = 1
            self.pin_rows.append((idx[tuple(e)], 0 if kap > 0 else 1))
        self.pin_flat = [comp * n + i for i, comp in self.pin_rows]
        self.free = np.setdiff1d(np.arange(2 * n), self.pin_flat)

    def solve(self, coeffs, omega, eps, tol, max_iter, cond_limit):
        params = self.params.replace(eps=eps)
        g = _Galerkin(self.template, params)
        coeffs = coeffs.copy()
        for (i, comp), pin in zip(self.pin_rows, pinned_values(params)):
            coeffs[i, comp] = pin
        omega = np.array(omega, dtype=float)
        history = []
        for it in range(max_iter + 1):
            F = g.residual(coeffs, omega)
            res = float(np.abs(F).max())
            history.append(res)
            if not np.isfinite(res):
                raise DivergenceError("non-finite residual", (coeffs, omega), history)
            if res <= tol:
                return coeffs, omega, res, it, history
            if it == max_iter or (it > 2 and res > 1e3 * history[0]):
                break
            J, Jw = g.jacobian(coeffs, omega)
            A = np.hstack([J[:, self.free], Jw])
            cond = np.linalg.cond(A)
            if cond > cond_limit:
                raise ConditioningError(f"Newton Jacobian condition number {cond:.2e}; "
                                        "near a small divisor, change a")
            rhs = np.concatenate([F[:, 0], F[:, 1]])
            delta = np.linalg.solve(A, -rhs)
            flat = np.concatenate([coeffs[:, 0], coeffs[:, 1]])
            flat[self.free] += delta[: len(self.free)]
            coeffs = np.stack([flat[: self.n], flat[self.n:]], axis=1)
            omega = omega + delta[len(self.free):]
        raise DivergenceError(f"Newton did not reach tol {tol:g}; residual history {history}",
                              (coeffs, omega), history)


def solve(params: ModelParams, L: int, tol: float = 1e-10, eps_path=None, *, max_iter: int = 25,
          min_step: float = 1e-8, cond_limit: float = 1e12) -> WaveSolution:
    """Continuation in eps along ``eps_path`` starting from the linear wave.

    A failed Newton solve halves the continuation step; steps below
    ``min_step`` abort with the last converged iterate attached.
    """
    if params.d == 0:
        raise DomainError("at least one tangential mode is required")
    eps_path = [params.eps] if eps_path is None else [float(e) for e in eps_path]
    if any(e2 <= e1 for e1, e2 in zip(eps_path, eps_path[1:])) or eps_path[0] < 0:
        raise DomainError("eps_path must be increasing and non-negative")
    divisor_guard(params, L)
    newton = _Newton(params, L)
    coeffs = linear_guess(params, L).coeffs
    omega = omega_eq(params)
    history, total = [], 0
    current = None
    targets = list(eps_path)
    while targets:
        target = targets[0]
        try:
            c_new, w_new, res, its, _ = newton.solve(coeffs, omega, target, tol, max_iter, cond_limit)
        except DivergenceError as err:
            if current is None or target - current < min_step:
                raise DivergenceError(f"continuation failed at eps = {target:g}",
                                      (coeffs, omega), err.history) from err
            targets.insert(0, 0.5 * (current + target))
            continue
        coeffs, omega, current = c_new, w_new, target
        total += its
        if target in eps_path:
            history.append({"eps": target, "omega": omega.tolist(), "residual": res, "iters": its})
        targets.pop(0)
    wave = newton.template.with_coeffs(coeffs)
    return WaveSolution(wave, omega, eps_path[-1], history[-1]["residual"], total, history)


@dataclass(frozen=True)
class ValidationReport:
    residual_L: float
    residual_2L: float
    residual_ok: bool
    sim_error: float
    reversible: bool
    momentum_support: bool

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.reversible and self.momentum_support


def validate(sol: WaveSolution, params: ModelParams, t_check: float = 1.0, dt: float = 1e-3,
             n_x: int | None = None, tol: float = 1e-10) -> ValidationReport:
    """Re-check a solution on cutoff 2L and against a direct time simulation.

    The 2L residual passes when it stays below max(10 * residual_L, tol).
    """
    p = params.replace(eps=sol.eps)
    w = sol.wave
    res_l = float(np.abs(residual(w, sol.omega, p).coeffs).max()) if len(w.ells) else 0.0
    big = w.padded(2 * w.L)
    res_2l = float(np.abs(residual(big, sol.omega, p).coeffs).max()) if len(big.ells) else 0.0
    res_ok = res_2l <= max(10 * res_l, tol)
    mmax = int(np.abs(w.momenta).max()) if len(w.ells) else 1
    if n_x is None:
        k = 2 * mmax
        n_x = max(16, 3 * k + 2 + (3 * k + 2) % 2)
    grid = sp.GridSpec(n_x)
    x = grid.x()
    r0 = sol.profile(0.0, x)
    if np.abs(r0).max() == 0:
        err = 0.0
    else:
        init = sp.PairField.from_arrays(r0[:, 0], r0[:, 1])
        cfg = sim.SimConfig(p, grid, dt, t_check)
        final = sim.evolve(init, cfg).stacked_values().T
        err = float(np.abs(final - sol.profile(t_check, x)).max())
    reversible = bool(np.all(np.isfinite(w.coeffs)) and w.kind == "cos")
    momentum = bool(np.all(w.momenta != 0))
    return ValidationReport(res_l, res_2l, res_ok, err, reversible, momentum)


def save_solution(path, sol: WaveSolution, params: ModelParams) -> None:
    doc = {
        "params": {"a": params.a, "eps": sol.eps, "s_plus": list(params.s_plus),
                   "s_minus": list(params.s_minus), "amps_plus": list(params.amps_plus),
                   "amps_minus": list(params.amps_minus)},
        "L": sol.wave.L,
        "omega": [float(v) for v in sol.omega],
        "eps": sol.eps,
        "coeffs": [[[int(v) for v in e], float(r[0]), float(r[1])]
                   for e, r in zip(sol.wave.ells, sol.wave.coeffs)],
        "residual_norm": sol.residual_norm,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_solution(path) -> tuple[WaveSolution, ModelParams]:
    with open(path) as fh:
        doc = json.load(fh)
    pp = doc["params"]
    params = ModelParams(a=pp["a"], eps=pp["eps"], s_plus=tuple(pp["s_plus"]),
                         s_minus=tuple(pp["s_minus"]), amps_plus=tuple(pp["amps_plus"]),
                         amps_minus=tuple(pp["amps_minus"]))
    ells = np.array([c[0] for c in doc["coeffs"]], dtype=int).reshape(-1, params.d)
    coeffs = np.array([[c[1], c[2]] for c in doc["coeffs"]], dtype=float).reshape(-1, 2)
    wave = TorusWave(tuple(params.jvec), doc["L"], ells, coeffs)
    sol = WaveSolution(wave, np.array(doc["omega"]), doc["eps"], doc["residual_norm"], 0)
    return sol, params

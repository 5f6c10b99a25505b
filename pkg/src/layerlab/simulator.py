"""Time integration of the layer system and of the Euler-Poisson system.

The default scheme is a Lawson (integrating-factor) RK4: in the frame
w_j = Q_j^{-1} r_j the linear part is diagonal with entries -+ i Omega_j, so it
is propagated exactly and only the quadratic transport is left to RK4.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from . import spectral as sp
from .dispersion import ModelParams, b_coeff, omega_array
from .errors import BlowUpError, DomainError
from .spectral import GridSpec, PairField

SCHEMES = ("lawson_rk4", "rk4")
FORMULATIONS = ("layer", "euler_poisson")


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    grid: GridSpec
    dt: float
    t_end: float
    scheme: str = "lawson_rk4"
    diag_stride: int = 1
    formulation: str = "layer"
    blowup_factor: float = 10.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.formulation not in FORMULATIONS:
            raise DomainError(f"unknown formulation {self.formulation!r}")
        if not self.dt > 0 or not self.t_end >= self.dt:
            raise DomainError("need dt > 0 and t_end >= dt")
        if self.diag_stride < 1:
            raise DomainError("diag_stride must be positive")
        if self.formulation == "euler_poisson" and self.params.eps <= 0:
            raise DomainError("the Euler-Poisson formulation needs eps > 0")
        if self.uses_rk4 and self.dt * self.max_linear_rate > 1.0:
            raise DomainError(f"rk4 stability guard: dt * max|Omega| = "
                              f"{self.dt * self.max_linear_rate:.3g} > 1")

    @property
    def uses_rk4(self) -> bool:
        return self.scheme == "rk4" or self.formulation == "euler_poisson"

    @property
    def max_linear_rate(self) -> float:
        return math.sqrt(self.params.a ** 2 * self.grid.kmax ** 2 + 1.0)

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy: float
    momentum: float
    mean_plus: float
    mean_minus: float
    max_amplitude: float


@dataclass
class RunResult:
    times: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    diagnostics: list[DiagnosticsRecord] = field(default_factory=list)
    n: int = 0

    def field_at(self, k: int) -> PairField:
        return PairField.from_coeffs(*self.snapshots[k], self.n)

    @property
    def final(self) -> PairField:
        return self.field_at(-1)


class _LayerStepper:
    def __init__(self, params: ModelParams, grid: GridSpec, scheme: str):
        self.a, self.eps = params.a, params.eps
        self.n, self.kmax = grid.n_x, grid.kmax
        self.scheme = scheme
        j = np.arange(grid.n_x // 2 + 1, dtype=float)
        live = (j >= 1) & (j <= self.kmax)
        jj = np.where(live, j, 1.0)
        self.live = live
        self.omega = np.where(live, omega_array(self.a, jj), 0.0)
        self.b = np.where(live, b_coeff(self.a, jj), 0.0)
        self.s = 1.0 / np.sqrt(1.0 - self.b ** 2)
        self._cache: dict[float, np.ndarray] = {}

    def to_diag(self, c):
        return np.stack([self.s * (c[0] - self.b * c[1]), self.s * (c[1] - self.b * c[0])])

    def from_diag(self, w):
        return np.stack([self.s * (w[0] + self.b * w[1]), self.s * (w[1] + self.b * w[0])])

    def propagator(self, h):
        p = self._cache.get(h)
        if p is None:
            p = np.stack([np.exp(-1j * self.omega * h), np.exp(1j * self.omega * h)]) * self.live
            self._cache[h] = p
        return p

    def nonlinear_diag(self, w):
        return self.to_diag(dyn.nonlinear_coeffs(self.from_diag(w), self.eps, self.n, self.kmax))

    def rhs(self, c):
        return dyn.rhs_coeffs(c, self.a, self.eps, self.n, self.kmax)

    def step(self, c, h):
        if self.scheme == "rk4":
            return _rk4(self.rhs, c, h)
        w = self.to_diag(c)
        e1, e2 = self.propagator(h / 2), self.propagator(h)
        k1 = self.nonlinear_diag(w)
        k2 = self.nonlinear_diag(e1 * (w + 0.5 * h * k1))
        k3 = self.nonlinear_diag(e1 * w + 0.5 * h * k2)
        k4 = self.nonlinear_diag(e2 * w + h * e1 * k3)
        w_new = e2 * w + h / 6 * (e2 * k1 + 2 * e1 * (k2 + k3) + k4)
        return self.from_diag(w_new)


class _EPStepper:
    def __init__(self, params: ModelParams, grid: GridSpec):
        self.a, self.n, self.kmax = params.a, grid.n_x, grid.kmax

    def rhs(self, c):
        return dyn.ep_rhs_coeffs(c, self.a, self.n, self.kmax)

    def step(self, c, h):
        return _rk4(self.rhs, c, h)


def _rk4(f, c, h):
    k1 = f(c)
    k2 = f(c + 0.5 * h * k1)
    k3 = f(c + 0.5 * h * k2)
    k4 = f(c + h * k3)
    return c + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _clean(c, kmax):
    c = sp.truncate(c, kmax)
    c[:, 0] = 0
    return c


def _stepper(cfg: SimConfig):
    if cfg.formulation == "euler_poisson":
        return _EPStepper(cfg.params, cfg.grid)
    return _LayerStepper(cfg.params, cfg.grid, cfg.scheme)


def _check_state(state: PairField, cfg: SimConfig):
    if state.n != cfg.grid.n_x:
        raise DomainError("state grid does not match the configuration")
    if not state.zero_mean:
        raise DomainError("state must be zero-mean")


def _layer_coeffs(c, cfg):
    if cfg.formulation == "euler_poisson":
        return dyn.ep_to_layer_coeffs(c, cfg.params.a, cfg.params.eps)
    return c


def step(state: PairField, cfg: SimConfig) -> PairField:
    """Advance ``state`` by one step of size cfg.dt."""
    _check_state(state, cfg)
    c = state.stacked_coeffs()
    if cfg.formulation == "euler_poisson":
        c = dyn.layer_to_ep_coeffs(c, cfg.params.a, cfg.params.eps)
    c = _clean(_stepper(cfg).step(_clean(c, cfg.grid.kmax), cfg.dt), cfg.grid.kmax)
    out = _layer_coeffs(c, cfg)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite state", 0.0, state)
    return PairField.from_coeffs(*out, cfg.grid.n_x)


def diagnostics(c_layer: np.ndarray, t: float, params: ModelParams, n: int) -> DiagnosticsRecord:
    vals = sp.inverse(c_layer, n)
    return DiagnosticsRecord(
        t=t,
        energy=dyn.energy_coeffs(c_layer, params.a, params.eps, n),
        momentum=dyn.momentum_coeffs(c_layer, n),
        mean_plus=float(np.mean(vals[0])),
        mean_minus=float(np.mean(vals[1])),
        max_amplitude=float(np.abs(vals).max()),
    )


def run(cfg: SimConfig, initial: PairField) -> RunResult:
    """Integrate to cfg.t_end; snapshots and diagnostics every diag_stride steps.

    The step is shortened uniformly so that an integer number of steps lands
    exactly on t_end.
    """
    _check_state(initial, cfg)
    n, kmax = cfg.grid.n_x, cfg.grid.kmax
    nsteps = cfg.n_steps
    h = cfg.t_end / nsteps
    stepper = _stepper(cfg)
    c = initial.stacked_coeffs()
    if cfg.formulation == "euler_poisson":
        c = dyn.layer_to_ep_coeffs(c, cfg.params.a, cfg.params.eps)
    c = _clean(c, kmax)
    result = RunResult(n=n)

    def record(c, t):
        cl = _layer_coeffs(c, cfg)
        result.times.append(t)
        result.snapshots.append(cl.copy())
        result.diagnostics.append(diagnostics(cl, t, cfg.params, n))

    record(c, 0.0)
    amp0 = result.diagnostics[0].max_amplitude
    for k in range(1, nsteps + 1):
        c_new = _clean(stepper.step(c, h), kmax)
        amp = np.abs(sp.inverse(c_new, n)).max()
        if not np.isfinite(amp) or (amp0 > 0 and amp > cfg.blowup_factor * amp0):
            raise BlowUpError("amplitude guard tripped", (k - 1) * h,
                              PairField.from_coeffs(*_layer_coeffs(c, cfg), n))
        c = c_new
        if k % cfg.diag_stride == 0 or k == nsteps:
            record(c, k * h)
    return result


def evolve(initial: PairField, cfg: SimConfig) -> PairField:
    """Final state only, without intermediate snapshots."""
    return run(SimConfig(cfg.params, cfg.grid, cfg.dt, cfg.t_end, cfg.scheme,
                         cfg.n_steps, cfg.formulation, cfg.blowup_factor), initial).final


def write_trajectory_csv(path, result: RunResult) -> None:
    x = 2 * np.pi * np.arange(result.n) / result.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "r_plus", "r_minus"])
        for t, c in zip(result.times, result.snapshots):
            vals = sp.inverse(c, result.n)
            for xi, rp, rm in zip(x, vals[0], vals[1]):
                w.writerow([_fmt(t), _fmt(xi), _fmt(rp), _fmt(rm)])


def write_diagnostics_csv(path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "momentum", "mean_plus", "mean_minus", "max_amp"])
        for d in result.diagnostics:
            w.writerow([_fmt(v) for v in (d.t, d.energy, d.momentum, d.mean_plus,
                                          d.mean_minus, d.max_amplitude)])


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"

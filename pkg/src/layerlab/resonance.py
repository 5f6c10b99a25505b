"""Momentum filters, small-divisor audits, transversality, non-degeneracy
and Cantor-set scans over the strip half-width ``a``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import mpmath
import numpy as np

from .dispersion import ModelParams, omega_array
from .errors import DomainError, MomentumError

KINDS = ("dioph", "transport", "melnikov1", "melnikov2_diag", "melnikov2_cross")


def bracket(ell) -> int:
    """<l> = max(1, |l_1|, ..., |l_d|)."""
    ell = np.atleast_1d(np.asarray(ell, dtype=int))
    return int(max(1, np.abs(ell).max(initial=0)))


def momentum_ok(jvec, ell, j: int, j_prime: int | None = None) -> bool:
    jvec, ell = np.atleast_1d(jvec), np.atleast_1d(ell)
    if jvec.shape != ell.shape:
        raise DomainError("jvec and ell must have the same length")
    return int(jvec @ ell) + j - (j_prime or 0) == 0


@dataclass(frozen=True)
class DivisorAudit:
    kind: str
    ell: tuple[int, ...]
    j: int | None
    j_prime: int | None
    value: float
    bound: float
    passed: bool

    def row(self) -> list[str]:
        return [self.kind, " ".join(map(str, self.ell)),
                "" if self.j is None else str(self.j),
                "" if self.j_prime is None else str(self.j_prime),
                f"{self.value:.17g}", f"{self.bound:.17g}", str(self.passed).lower()]


def equilibrium_mu(a: float) -> Callable[[int, int], float]:
    """Eigenvalue provider mu_{j,kappa} = kappa * Omega_j(a)."""
    def mu(j: int, kappa: int) -> float:
        return float(kappa * omega_array(a, j))
    return mu


def divisor(kind: str, params: ModelParams, omega, ell, j: int | None = None,
            j_prime: int | None = None, *, kappa: int = 1, mu=None, transport=None,
            gamma: float, tau: float, tau1: float | None = None,
            upsilon: float | None = None, q0: int = 1) -> DivisorAudit:
    """Evaluate one non-resonance condition.

    ``mu(j, kappa)`` supplies normal-mode eigenvalues (equilibrium values by
    default) and ``transport(kappa)`` the constants c_kappa (default kappa*a).
    For the transport kind the exponent ``upsilon`` defaults to 1/(4 q0 + 1)
    and ``tau1`` to ``tau``.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown divisor kind {kind!r}")
    if kappa not in (1, -1):
        raise DomainError("kappa must be +1 or -1")
    omega = np.asarray(omega, dtype=float)
    ell = np.atleast_1d(np.asarray(ell, dtype=int))
    jvec = params.jvec
    if omega.shape != ell.shape or jvec.shape != ell.shape:
        raise DomainError("omega, ell and jvec must share the torus dimension")
    mu = mu or equilibrium_mu(params.a)
    wl = float(omega @ ell)
    lb = bracket(ell)
    ell_t = tuple(int(v) for v in ell)

    if kind == "dioph":
        if j is not None or j_prime is not None:
            raise MomentumError("dioph divisors carry no space index")
        if not ell.any():
            raise MomentumError("l = 0 is excluded from the Diophantine set")
        value, bound = wl, gamma / lb ** tau
    elif kind == "transport":
        if j is None or j_prime is not None or not momentum_ok(jvec, ell, j):
            raise MomentumError(f"transport tuple violates jvec.l + j = 0: l={ell_t}, j={j}")
        if j == 0 and not ell.any():
            raise MomentumError("(l, j) = (0, 0) is excluded")
        c = transport(kappa) if transport else kappa * params.a
        ups = 1.0 / (4 * q0 + 1) if upsilon is None else upsilon
        value, bound = wl + j * c, gamma ** ups / lb ** (tau if tau1 is None else tau1)
    elif kind == "melnikov1":
        if j is None or j_prime is not None or not momentum_ok(jvec, ell, j):
            raise MomentumError(f"melnikov1 tuple violates jvec.l + j = 0: l={ell_t}, j={j}")
        _normal(params, j, kappa)
        value, bound = wl + mu(j, kappa), gamma * max(1, abs(j)) / lb ** tau
    else:
        if j is None or j_prime is None or not momentum_ok(jvec, ell, j, j_prime):
            raise MomentumError(f"{kind} tuple violates jvec.l + j - j' = 0: "
                                f"l={ell_t}, j={j}, j'={j_prime}")
        if kind == "melnikov2_diag":
            if not ell.any() and j == j_prime:
                raise MomentumError("(0, j, j) is a trivial resonance, never audited")
            _normal(params, j, kappa)
            _normal(params, j_prime, kappa)
            value = wl + mu(j, kappa) - mu(j_prime, kappa)
            bound = 2 * gamma * max(1, abs(j - j_prime)) / lb ** tau
        else:
            _normal(params, j, 1)
            _normal(params, j_prime, -1)
            kappa = 1
            value = wl + mu(j, 1) - mu(j_prime, -1)
            bound = 2 * gamma * max(1, abs(j) + abs(j_prime)) / lb ** tau
    return DivisorAudit(kind, ell_t, j, j_prime, float(value), float(bound), bool(abs(value) > bound))


def _normal(params: ModelParams, j: int, kappa: int):
    if j == 0 or j in params.tangential(kappa):
        raise MomentumError(f"j = {j} is not a normal index for kappa = {kappa:+d}")


def write_audit_csv(path, audits: Iterable[DivisorAudit]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "ell", "j", "jprime", "value", "bound", "pass"])
        for au in audits:
            w.writerow(au.row())


def random_audits(params: ModelParams, count: int, rng: np.random.Generator, *, ell_max: int = 6,
                  j_max: int = 12, gamma: float = 1e-3, tau: float = 3.0) -> tuple[list[DivisorAudit], int]:
    """Audit ``count`` random index tuples; returns the audits and the rejects.

    Tuples are drawn without regard to the momentum rule, so most of them are
    rejected; only admissible ones produce a record.
    """
    d = params.d
    omega = _omega_eq_at(params, params.a)
    kinds = rng.integers(0, len(KINDS), count)
    ells = rng.integers(-ell_max, ell_max + 1, (count, d))
    js = rng.integers(-j_max, j_max + 1, (count, 2))
    force = rng.random(count) < 0.5
    audits, rejected = [], 0
    jvec = params.jvec
    for k in range(count):
        kind = KINDS[kinds[k]]
        ell, j, jp = ells[k], int(js[k, 0]), int(js[k, 1])
        if force[k]:
            # half the draws are steered onto the momentum shell
            if kind in ("transport", "melnikov1"):
                j = -int(jvec @ ell)
            elif kind != "dioph":
                jp = int(jvec @ ell) + j
        kappa = 1 if rng.random() < 0.5 else -1
        try:
            if kind == "dioph":
                au = divisor(kind, params, omega, ell, gamma=gamma, tau=tau)
            elif kind in ("transport", "melnikov1"):
                au = divisor(kind, params, omega, ell, j, kappa=kappa, gamma=gamma, tau=tau)
            else:
                au = divisor(kind, params, omega, ell, j, jp, kappa=kappa, gamma=gamma, tau=tau)
        except MomentumError:
            rejected += 1
            continue
        audits.append(au)
    return audits, rejected


def _omega_eq_at(params: ModelParams, a: float) -> np.ndarray:
    return params.kappas * omega_array(a, params.jvec)


# ---------------------------------------------------------------------------
# transversality

def omega_derivative(a: float, j: int, k: int) -> float:
    """k-th a-derivative of Omega_j(a) = sgn(j) sqrt(a^2 j^2 + 1)."""
    if j == 0:
        raise DomainError("j = 0 is excluded")
    s = math.copysign(1.0, j)
    j2 = float(j * j)
    g = math.sqrt(1.0 + j2 * a * a)
    if k == 0:
        return s * g
    if k == 1:
        return s * j2 * a / g
    if k == 2:
        return s * j2 / g ** 3
    if k == 3:
        return -3 * s * j2 ** 2 * a / g ** 5
    if k == 4:
        return -3 * s * j2 ** 2 * (1 - 4 * j2 * a * a) / g ** 7
    with mpmath.workdps(40):
        return float(s * mpmath.diff(lambda t: mpmath.sqrt(1 + j2 * t * t), a, k))


@dataclass(frozen=True)
class FrequencyCurve:
    """One of the five equilibrium frequency combinations f(a).

    case "i":   omega_eq(a).l
    case "ii":  (omega_eq(a) - jvec a).l
    case "iii": omega_eq(a).l + kappa Omega_j(a),              jvec.l + j = 0
    case "iv":  omega_eq(a).l + kappa (Omega_j - Omega_j')(a), jvec.l + j - j' = 0
    case "v":   omega_eq(a).l + Omega_j(a) - Omega_j'(a),      jvec.l + j - j' = 0
    """

    case: str
    s_plus: tuple[int, ...]
    s_minus: tuple[int, ...]
    ell: tuple[int, ...]
    j: int | None = None
    j_prime: int | None = None
    kappa: int = 1

    def __post_init__(self):
        jvec = np.array(self.s_plus + self.s_minus, dtype=int)
        ell = np.asarray(self.ell, dtype=int)
        if ell.shape != jvec.shape:
            raise DomainError("ell has the wrong dimension")
        splus = set(self.s_plus) | {-j for j in self.s_plus}
        sminus = set(self.s_minus) | {-j for j in self.s_minus}
        sk = splus if self.kappa > 0 else sminus
        c = self.case
        if c == "i":
            if not ell.any():
                raise MomentumError("case (i) needs l != 0")
        elif c == "ii":
            pass
        elif c == "iii":
            if self.j in (None, 0) or self.j in sk or not momentum_ok(jvec, ell, self.j):
                raise MomentumError("case (iii) index not admissible")
        elif c in ("iv", "v"):
            if self.j in (None, 0) or self.j_prime in (None, 0):
                raise MomentumError("cases (iv)/(v) need nonzero j, j'")
            if not momentum_ok(jvec, ell, self.j, self.j_prime):
                raise MomentumError("momentum condition violated")
            if c == "iv":
                if self.j in sk or self.j_prime in sk:
                    raise MomentumError("case (iv) indices must be normal")
                if not ell.any() and self.j == self.j_prime:
                    raise MomentumError("(0, j, j) is excluded in case (iv)")
            elif self.j in splus or self.j_prime in sminus:
                raise MomentumError("case (v) indices must be normal")
        else:
            raise DomainError(f"unknown case {c!r}")

    def derivative(self, a: float, k: int) -> float:
        jvec = self.s_plus + self.s_minus
        kap = [1] * len(self.s_plus) + [-1] * len(self.s_minus)
        val = sum(kp * l * omega_derivative(a, jk, k) for kp, l, jk in zip(kap, self.ell, jvec))
        if self.case == "ii" and k <= 1:
            val -= sum(l * jk for l, jk in zip(self.ell, jvec)) * (a if k == 0 else 1.0)
        elif self.case == "iii":
            val += self.kappa * omega_derivative(a, self.j, k)
        elif self.case == "iv":
            val += self.kappa * (omega_derivative(a, self.j, k) - omega_derivative(a, self.j_prime, k))
        elif self.case == "v":
            val += omega_derivative(a, self.j, k) - omega_derivative(a, self.j_prime, k)
        return val


@dataclass(frozen=True)
class TransversalityResult:
    inf_max: float
    argmin_a: float
    ell_bracket: int

    @property
    def ratio(self) -> float:
        return self.inf_max / self.ell_bracket


def transversality(curve: FrequencyCurve, a_lo: float, a_hi: float, q0: int,
                   grid_n: int = 2001) -> TransversalityResult:
    """min over an a-grid of max_{k <= q0} |d^k f / da^k|."""
    if not a_lo < a_hi or a_lo <= 0:
        raise DomainError("need 0 < a_lo < a_hi")
    grid = np.linspace(a_lo, a_hi, grid_n)
    vals = np.array([max(abs(curve.derivative(a, k)) for k in range(q0 + 1)) for a in grid])
    i = int(np.argmin(vals))
    return TransversalityResult(float(vals[i]), float(grid[i]), bracket(curve.ell))


# ---------------------------------------------------------------------------
# non-degeneracy

def vandermonde(s_plus, s_minus) -> np.ndarray:
    js = list(s_plus) + list(s_minus)
    return np.array([[j ** (2 * n) for j in js] for n in range(len(js))], dtype=float)


def nondegeneracy(s_plus, s_minus, a_lo: float = 0.5, a_hi: float = 1.5) -> bool:
    """True iff the Vandermonde system (j_k^{2n}) is invertible.

    The determinant is evaluated exactly as prod_{i<k} (j_k^2 - j_i^2), so the
    answer does not depend on floating-point conditioning.
    """
    if not 0 < a_lo < a_hi:
        raise DomainError("need 0 < a_lo < a_hi")
    if set(s_plus) & set(s_minus):
        raise DomainError("s_plus and s_minus must be disjoint")
    sq = [int(j) ** 2 for j in list(s_plus) + list(s_minus)]
    det = 1
    for i, k in itertools.combinations(range(len(sq)), 2):
        det *= sq[k] - sq[i]
    return det != 0


# ---------------------------------------------------------------------------
# Cantor scans

def half_lattice(d: int, ell_max: int, include_zero: bool = False) -> np.ndarray:
    """One representative of each +-l pair with <l> <= ell_max (first nonzero entry > 0)."""
    pts = np.array(list(itertools.product(range(-ell_max, ell_max + 1), repeat=d)), dtype=int)
    pts = pts.reshape(-1, d)
    keep = []
    for p in pts:
        nz = np.flatnonzero(p)
        if nz.size == 0:
            keep.append(include_zero)
        else:
            keep.append(p[nz[0]] > 0)
    return pts[np.array(keep, dtype=bool)]


@dataclass(frozen=True)
class CantorScan:
    gamma: float
    tau: float
    ell_max: int
    a_lo: float
    a_hi: float
    excluded_fraction: float
    grid_excluded_fraction: float
    intervals: tuple[tuple[float, float], ...]

    def to_json(self) -> str:
        return json.dumps({
            "gamma": self.gamma, "tau": self.tau, "ell_max": self.ell_max,
            "excluded_fraction": self.excluded_fraction,
            "intervals": [list(iv) for iv in self.intervals],
        }, indent=2)


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(iv) for iv in out]


def cantor_measure(params: ModelParams, a_lo: float, a_hi: float, gamma: float, tau: float,
                   ell_max: int, a_grid_n: int | None = None, chunk: int = 128) -> CantorScan:
    """Measure of {a : |omega_eq(a).l| <= gamma/<l>^tau for some 0 < <l> <= ell_max}.

    Every divisor is sampled on the a-grid; crossings of f = +-bound between
    neighbouring grid points are refined by bisection, so thin excluded
    intervals falling between grid points are still measured.
    """
    if not 0 < a_lo < a_hi:
        raise DomainError("need 0 < a_lo < a_hi")
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    if a_grid_n is None:
        a_grid_n = int(round(1e4 * (a_hi - a_lo))) + 1
    grid = np.linspace(a_lo, a_hi, a_grid_n)
    jsq = params.jvec.astype(float) ** 2
    kap = params.kappas.astype(float)
    ells = half_lattice(params.d, ell_max)
    brackets = np.abs(ells).max(axis=1)
    bounds = gamma / brackets.astype(float) ** tau

    def f(a, lvec):
        # a: (..., ), lvec: (..., d) broadcastable
        w = kap * np.sqrt(np.asarray(a)[..., None] ** 2 * jsq + 1.0)
        return np.sum(w * lvec, axis=-1)

    w_grid = kap * np.sqrt(grid[:, None] ** 2 * jsq + 1.0)
    intervals = []
    grid_hit = np.zeros(a_grid_n, dtype=bool)
    for s in range(0, len(ells), chunk):
        L, B = ells[s:s + chunk], bounds[s:s + chunk]
        F = w_grid @ L.T
        inside = np.abs(F) <= B
        grid_hit |= inside.any(axis=1)
        roots_l, roots_a = [], []
        for sign in (1.0, -1.0):
            G = F - sign * B
            cells, cols = np.nonzero(np.signbit(G[:-1]) != np.signbit(G[1:]))
            if cells.size == 0:
                continue
            lo, hi = grid[cells].copy(), grid[cells + 1].copy()
            glo = G[cells, cols]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                gm = f(mid, L[cols]) - sign * B[cols]
                same = np.signbit(gm) == np.signbit(glo)
                lo = np.where(same, mid, lo)
                glo = np.where(same, gm, glo)
                hi = np.where(same, hi, mid)
            roots_l.append(cols)
            roots_a.append(0.5 * (lo + hi))
        cols_all = np.concatenate(roots_l) if roots_l else np.zeros(0, dtype=int)
        roots_all = np.concatenate(roots_a) if roots_a else np.zeros(0)
        order = np.lexsort((roots_all, cols_all))
        cols_all, roots_all = cols_all[order], roots_all[order]
        splits = np.searchsorted(cols_all, np.arange(len(L) + 1))
        for c in range(len(L)):
            state = bool(inside[0, c])
            start = a_lo
            for x in roots_all[splits[c]:splits[c + 1]]:
                if state:
                    intervals.append((start, x))
                else:
                    start = x
                state = not state
            if state:
                intervals.append((start, a_hi))
    merged = _merge(intervals)
    measure = sum(hi - lo for lo, hi in merged)
    return CantorScan(gamma=gamma, tau=tau, ell_max=ell_max, a_lo=a_lo, a_hi=a_hi,
                      excluded_fraction=measure / (a_hi - a_lo),
                      grid_excluded_fraction=float(grid_hit.mean()),
                      intervals=tuple(merged))

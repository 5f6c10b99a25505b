"""Truncated linearized operators at traveling waves.

The operator L = omega.d_phi - J M_{eps r} acts on h(phi, x) = sum h_{l,j}
exp(i(l.phi + j x)).  For a traveling wave r = Rc(phi - jvec x) multiplication
by r maps (l, j) to (l + l_k, j - jvec.l_k), so the shells jvec.l + j = n are
invariant and the matrix is block diagonal over shells.  Blocks are stored in
the complex exponential basis; the operator itself is real, which shows up
as the symmetry between shells n and -n.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import ModelParams, b_coeff, m_matrix, omega_array
from .errors import ConditioningError, DomainError, NumericalError
from .resonance import DivisorAudit, divisor
from .spectral import PairField
from .wavesolver import WaveSolution

INTERIOR = 2.0 / 3.0


@dataclass
class FloquetBlock:
    shell: int | None
    ells: np.ndarray
    js: np.ndarray
    matrix: np.ndarray


@dataclass
class FloquetMatrix:
    blocks: list[FloquetBlock]
    omega: np.ndarray
    params: ModelParams
    L_phi: int
    L_x: int
    transport: tuple[float, float] | None = None

    @property
    def size(self) -> int:
        return sum(b.matrix.shape[0] for b in self.blocks)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        k = 0
        for b in self.blocks:
            n = b.matrix.shape[0]
            out[k:k + n, k:k + n] = b.matrix
            k += n
        return out

    def basis(self) -> list[tuple[tuple[int, ...], int, int]]:
        """(l, j, component) for every row of ``dense()``; component 0 is r_+."""
        out = []
        for b in self.blocks:
            for ell, j in zip(b.ells, b.js):
                out += [(tuple(int(v) for v in ell), int(j), 0), (tuple(int(v) for v in ell), int(j), 1)]
        return out


@dataclass
class FloquetReport:
    eigenvalues: np.ndarray
    max_abs_real: float
    matched: list[tuple[int, int, float]]
    tail_fit: dict | None
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_abs_real_all: float = 0.0
    rows: list[tuple[complex, int, int, bool]] = field(default_factory=list)

    def mu(self, j: int, kappa: int) -> float:
        for jj, kk, m in self.matched:
            if jj == j and kk == kappa:
                return m
        raise KeyError((j, kappa))

    def mu_table(self) -> dict[tuple[int, int], float]:
        return {(j, k): m for j, k, m in self.matched}


def _terms_from_wave(sol: WaveSolution):
    w = sol.wave
    m = w.momenta
    terms = []
    for ell, mk, r in zip(w.ells, m, w.coeffs):
        if np.any(r != 0):
            terms.append((tuple(ell), -int(mk), 0.5 * r.astype(complex)))
            terms.append((tuple(-ell), int(mk), 0.5 * r.astype(complex)))
    return terms


def _terms_from_field(r: PairField):
    c = r.stacked_coeffs()
    terms = []
    for q in range(1, c.shape[1]):
        if 2 * q == r.n:
            continue
        if np.any(c[:, q] != 0):
            terms.append(((), q, c[:, q].copy()))
            terms.append(((), -q, np.conj(c[:, q])))
    return terms


def linearized_floquet(state, params: ModelParams, L_phi: int, L_x: int) -> FloquetMatrix:
    """Matrix of omega.d_phi - J M_{eps r} on ||l||_inf <= L_phi, 0 < |j| <= L_x.

    ``state`` is a WaveSolution (quasi-periodic operator, shells kept apart)
    or a PairField (operator frozen at one instant, a single block).
    """
    a = params.a
    if isinstance(state, WaveSolution):
        eps = state.eps
        jvec = np.array(state.wave.jvec, dtype=int)
        omega = np.asarray(state.omega, dtype=float)
        d = len(jvec)
        terms = _terms_from_wave(state)
        if L_phi < 1 or L_x < int(np.abs(jvec).max()):
            raise DomainError("truncation must contain the tangential modes")
        transport = transport_constant(state, params)
    elif isinstance(state, PairField):
        eps = params.eps
        jvec = np.zeros(0, dtype=int)
        omega = np.zeros(0)
        d = 0
        terms = _terms_from_field(state)
        transport = None
        L_phi = 0
        if L_x < 1:
            raise DomainError("L_x must be positive")
    else:
        raise DomainError("state must be a WaveSolution or a PairField")

    ells = np.array(list(itertools.product(range(-L_phi, L_phi + 1), repeat=d)), dtype=int)
    ells = ells.reshape(len(ells), d)
    js = np.array([j for j in range(-L_x, L_x + 1) if j != 0])
    pairs = [(tuple(e), int(j)) for e in ells for j in js]
    if d:
        shell_of = {p: int(np.dot(p[0], jvec)) + p[1] for p in pairs}
    else:
        shell_of = {p: None for p in pairs}
    groups: dict = {}
    for p in pairs:
        groups.setdefault(shell_of[p], []).append(p)

    blocks = []
    keys = sorted(groups, key=lambda s: (s is None, s if s is not None else 0))
    for s in keys:
        members = groups[s]
        index = {p: k for k, p in enumerate(members)}
        n = len(members)
        B = np.zeros((2 * n, 2 * n), dtype=complex)
        for k, (ell, j) in enumerate(members):
            wl = float(np.dot(omega, ell)) if d else 0.0
            B[2 * k:2 * k + 2, 2 * k:2 * k + 2] = 1j * wl * np.eye(2) - m_matrix(a, j)
            if eps == 0:
                continue
            for t_ell, t_q, coef in terms:
                src = (tuple(np.subtract(ell, t_ell)) if d else (), j - t_q)
                col = index.get(src)
                if col is None:
                    continue
                for sgm in range(2):
                    B[2 * k + sgm, 2 * col + sgm] += 1j * j * eps * coef[sgm]
        blocks.append(FloquetBlock(s, np.array([p[0] for p in members], dtype=int).reshape(n, d),
                                   np.array([p[1] for p in members]), B))
    return FloquetMatrix(blocks, omega, params, L_phi, L_x, transport)


def _q_blocks(a: float, js: np.ndarray):
    b = b_coeff(a, np.abs(js))
    s = 1.0 / np.sqrt(1.0 - b ** 2)
    return b, s


def spectrum(mat: FloquetMatrix) -> FloquetReport:
    """Eigenvalues, (j, kappa) matching and the tail fit of the remainders.

    Each block is conjugated into the frame where the equilibrium part is
    diagonal; an eigenvalue is attributed to the basis element carrying most
    of its eigenvector, and mu = Im(lambda) - omega.l for that element.
    Only interior elements (within 2/3 of both cutoffs) are used.
    """
    a = mat.params.a
    d = len(mat.omega)
    all_eigs, rows = [], []
    mu_best: dict[tuple[int, int], tuple[int, float]] = {}
    interior_re = [0.0]
    for blk in mat.blocks:
        n = len(blk.js)
        b, s = _q_blocks(a, blk.js)
        Q = np.zeros((2 * n, 2 * n))
        Qi = np.zeros((2 * n, 2 * n))
        for k in range(n):
            Q[2 * k:2 * k + 2, 2 * k:2 * k + 2] = s[k] * np.array([[1, b[k]], [b[k], 1]])
            Qi[2 * k:2 * k + 2, 2 * k:2 * k + 2] = s[k] * np.array([[1, -b[k]], [-b[k], 1]])
        D = Qi @ blk.matrix @ Q
        try:
            lam, vec = np.linalg.eig(D)
        except np.linalg.LinAlgError as err:
            raise NumericalError(f"eigensolver failed on shell {blk.shell}") from err
        all_eigs.append(lam)
        dom = np.argmax(np.abs(vec), axis=0)
        for lk, col in zip(lam, dom):
            k, comp = divmod(int(col), 2)
            ell, j = blk.ells[k], int(blk.js[k])
            kappa = 1 if comp == 0 else -1
            inner = (abs(j) <= INTERIOR * mat.L_x and (d == 0 or np.abs(ell).max() <= INTERIOR * mat.L_phi))
            rows.append((complex(lk), j, kappa, bool(inner)))
            if not inner:
                continue
            interior_re.append(abs(lk.real))
            mu = float(lk.imag - (np.dot(mat.omega, ell) if d else 0.0))
            rank = int(np.abs(ell).sum()) if d else 0
            key = (j, kappa)
            if key not in mu_best or rank < mu_best[key][0]:
                mu_best[key] = (rank, mu)
    eigs = np.concatenate(all_eigs) if all_eigs else np.zeros(0, dtype=complex)
    matched = sorted((j, k, m) for (j, k), (_, m) in mu_best.items())
    report = FloquetReport(eigs, float(max(interior_re)), matched, None, mat.omega.copy(),
                           float(np.abs(eigs.real).max(initial=0.0)), rows)
    if mat.transport is not None:
        report.tail_fit = tail_fit(report, mat.params, mat.transport)
    return report


def kam_remainders(report: FloquetReport, params: ModelParams, transport) -> list[tuple[int, int, float]]:
    """mu_{j,kappa} - kappa Omega_j - j (c_kappa - kappa a) on normal matched modes."""
    a = params.a
    out = []
    for j, kappa, mu in report.matched:
        if j in params.tangential(kappa):
            continue
        c = transport[0] if kappa > 0 else transport[1]
        out.append((j, kappa, mu - kappa * float(omega_array(a, j)) - j * (c - kappa * a)))
    return out


def tail_fit(report: FloquetReport, params: ModelParams, transport, j_min: int = 2,
             floor: float | None = None) -> dict | None:
    """Fit log|r_{j,kappa}| = log C_kappa - p log|j| over matched normal modes.

    The exponent p is shared by both families, the constants are not (the
    r_- component of a wave is smaller by b_j).  Remainders below ``floor``
    (default: 100 ulp of the largest matched mu) are eigensolver noise.
    """
    if floor is None:
        big = max((abs(m) for _, _, m in report.matched), default=1.0)
        floor = 100 * np.finfo(float).eps * max(1.0, big)
    rem = [(abs(j), k, abs(r)) for j, k, r in kam_remainders(report, params, transport)
           if abs(j) >= j_min and abs(r) > floor]
    if len(rem) < 3:
        return None
    kap = np.array([v[1] for v in rem])
    fams = [k for k in (1, -1) if np.any(kap == k)]
    x = np.log([v[0] for v in rem])
    y = np.log([v[2] for v in rem])
    A = np.column_stack([x] + [(kap == k).astype(float) for k in fams])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    consts = {k: float(math.exp(c)) for k, c in zip(fams, coef[1:])}
    return {"C": max(consts.values()), "C_by_kappa": consts, "exponent": float(-coef[0]),
            "r2": r2, "n": len(rem)}


def transport_from_coeffs(ells, coeffs, jvec, omega, a: float, eps: float) -> tuple[float, float]:
    """c_kappa from one homological correction of the transport coefficient.

    Straightening omega.d_phi + (kappa a + eps r_kappa) d_x along the wave
    leaves the average speed
        c_kappa - kappa a = eps^2 sum_l m R_{kappa,l}^2 / (2 (omega.l - kappa a m)),
    with m = jvec.l; the neglected terms are O(eps^3).
    """
    ells = np.asarray(ells, dtype=int).reshape(len(coeffs), -1)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1, 2)
    m = ells @ np.asarray(jvec, dtype=int)
    wl = ells @ np.asarray(omega, dtype=float)
    out = []
    for comp, kappa in ((0, 1), (1, -1)):
        r = coeffs[:, comp]
        live = r != 0
        den = wl[live] - kappa * a * m[live]
        if den.size and np.abs(den).min() < 1e-10:
            raise ConditioningError(f"transport divisor {np.abs(den).min():.2e} below 1e-10")
        out.append(kappa * a + eps ** 2 * float(np.sum(m[live] * r[live] ** 2 / (2 * den))))
    return out[0], out[1]


def transport_constant(sol: WaveSolution, params: ModelParams) -> tuple[float, float]:
    w = sol.wave
    return transport_from_coeffs(w.ells, w.coeffs, w.jvec, sol.omega, params.a, sol.eps)


def parity(values: np.ndarray, tol: float = 1e-12) -> int | None:
    """+1 or -1 when values(-z) = +-values(z) on a uniform periodic grid, else None."""
    v = np.asarray(values, dtype=float)
    refl = v
    for ax in range(v.ndim):
        refl = np.roll(np.flip(refl, axis=ax), 1, axis=ax)
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))
    if np.abs(refl - v).max(initial=0.0) <= tol * scale:
        return 1
    if np.abs(refl + v).max(initial=0.0) <= tol * scale:
        return -1
    return None


def decouple_step(r_off, f_plus, f_minus, m: int, a: float, eps: float, kappa: int = 1) -> np.ndarray:
    """p = -r_off / (2 a kappa + eps (f_kappa - f_{-kappa})), pointwise on the grid.

    When r_off has parity (-1)^m under (phi, x) -> (-phi, -x) and f_+- are
    even, the output is checked to carry parity (-1)^m as well.
    """
    if kappa not in (1, -1):
        raise DomainError("kappa must be +1 or -1")
    r_off = np.asarray(r_off, dtype=float)
    fk, fo = (f_plus, f_minus) if kappa > 0 else (f_minus, f_plus)
    den = 2 * a * kappa + eps * (np.asarray(fk, dtype=float) - np.asarray(fo, dtype=float))
    den = np.broadcast_to(den, r_off.shape) if np.ndim(den) < r_off.ndim else den
    if np.abs(den).min() < 0.1 * abs(a):
        raise DomainError(f"decoupling denominator {np.abs(den).min():.3g} below 0.1 a")
    p = -r_off / den
    if r_off.ndim and np.ndim(f_plus) == r_off.ndim and np.ndim(f_minus) == r_off.ndim:
        want = (-1) ** m
        if parity(r_off) == want and parity(f_plus) == 1 and parity(f_minus) == 1:
            if parity(p, tol=1e-10) != want:
                raise NumericalError("decoupling output lost its parity")
    return p


def kam_audit(report: FloquetReport, params: ModelParams, gamma: float, tau: float,
              L: int) -> list[DivisorAudit]:
    """First and second Melnikov conditions with the measured mu's.

    Every momentum-admissible tuple with ||l||_inf <= L whose indices were
    matched in ``report`` is audited; tuples outside the matched set are
    skipped rather than filled with model values.
    """
    d = params.d
    jvec = params.jvec
    omega = report.omega
    table = report.mu_table()

    def mu(j, kappa):
        return table[(j, kappa)]

    normal = {k: sorted(j for (j, kk) in table if kk == k and j not in params.tangential(k)) for k in (1, -1)}
    audits = []
    for ell in itertools.product(range(-L, L + 1), repeat=d):
        ell = np.array(ell, dtype=int)
        m = int(ell @ jvec)
        for kappa in (1, -1):
            if -m in normal[kappa]:
                audits.append(divisor("melnikov1", params, omega, ell, -m, kappa=kappa, mu=mu,
                                      gamma=gamma, tau=tau))
            for j in normal[kappa]:
                jp = m + j
                if jp in normal[kappa] and (ell.any() or j != jp):
                    audits.append(divisor("melnikov2_diag", params, omega, ell, j, jp, kappa=kappa,
                                          mu=mu, gamma=gamma, tau=tau))
        for j in normal[1]:
            jp = m + j
            if jp in normal[-1]:
                audits.append(divisor("melnikov2_cross", params, omega, ell, j, jp, mu=mu,
                                      gamma=gamma, tau=tau))
    return audits


def audit_summary(audits: list[DivisorAudit]) -> tuple[float, list[DivisorAudit]]:
    fails = [au for au in audits if not au.passed]
    rate = 1.0 - len(fails) / len(audits) if audits else 1.0
    return rate, fails


def write_spectrum_csv(path, report: FloquetReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "j", "kappa", "matched"])
        for lam, j, kappa, inner in sorted(report.rows, key=lambda r: (r[0].imag, r[0].real, r[1], r[2])):
            w.writerow([f"{lam.real:.17g}", f"{lam.imag:.17g}", j, kappa, int(inner)])

"""Linear theory of the flat strip.

Each Fourier mode j of the linearized layer system evolves by a 2x2 matrix
whose eigenvalues are -+ i Omega_j(a), Omega_j(a) = sgn(j) sqrt(a^2 j^2 + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    """Strip half-width ``a``, amplitude ``eps`` and the excited modes.

    ``s_plus`` / ``s_minus`` keep the order in which they are given; that
    order fixes ``jvec`` and the ordering of frequency vectors.
    """

    a: float
    eps: float = 0.0
    s_plus: tuple[int, ...] = ()
    s_minus: tuple[int, ...] = ()
    amps_plus: tuple[float, ...] = ()
    amps_minus: tuple[float, ...] = ()
    a_window: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        for name in ("s_plus", "s_minus"):
            object.__setattr__(self, name, tuple(int(j) for j in getattr(self, name)))
        for name in ("amps_plus", "amps_minus"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.amps_plus and self.s_plus:
            object.__setattr__(self, "amps_plus", (1.0,) * len(self.s_plus))
        if not self.amps_minus and self.s_minus:
            object.__setattr__(self, "amps_minus", (1.0,) * len(self.s_minus))
        a0, a1 = self.a_window
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"a must be positive, got {self.a}")
        if not 0 <= a0 < a1 or not a0 < self.a < a1:
            raise DomainError(f"a = {self.a} outside the window {self.a_window}")
        if not 0 <= self.eps < 1:
            raise DomainError(f"eps must lie in [0, 1), got {self.eps}")
        for s in (self.s_plus, self.s_minus):
            if any(j <= 0 for j in s) or len(set(s)) != len(s):
                raise DomainError("mode sets hold distinct positive integers")
        if set(self.s_plus) & set(self.s_minus):
            raise DomainError("s_plus and s_minus must be disjoint")
        if len(self.amps_plus) != len(self.s_plus) or len(self.amps_minus) != len(self.s_minus):
            raise DomainError("one amplitude per tangential mode is required")

    @property
    def jvec(self) -> np.ndarray:
        return np.array(self.s_plus + self.s_minus, dtype=int)

    @property
    def d(self) -> int:
        return len(self.s_plus) + len(self.s_minus)

    @property
    def kappas(self) -> np.ndarray:
        """+1 for modes in s_plus, -1 for modes in s_minus, in jvec order."""
        return np.array([1] * len(self.s_plus) + [-1] * len(self.s_minus), dtype=int)

    @property
    def amps(self) -> np.ndarray:
        return np.array(self.amps_plus + self.amps_minus)

    def tangential(self, kappa: int) -> frozenset[int]:
        """The symmetric set {+-j : j in S_kappa}."""
        s = self.s_plus if kappa > 0 else self.s_minus
        return frozenset(s) | frozenset(-j for j in s)

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


def _check_mode(a, j):
    if j == 0:
        raise DomainError("mode j = 0 is excluded")
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")


def omega(a: float, j: int) -> float:
    _check_mode(a, j)
    return math.copysign(math.sqrt(a * a * j * j + 1.0), j)


def omega_array(a: float, j) -> np.ndarray:
    """Vectorized omega; entries with j = 0 map to 0."""
    j = np.asarray(j, dtype=float)
    return np.sign(j) * np.sqrt(a * a * j * j + 1.0)


def b_coeff(a: float, j) -> np.ndarray | float:
    aj = a * np.abs(np.asarray(j, dtype=float))
    b = 1.0 / (2 * aj * (np.sqrt(aj * aj + 1.0) + aj + 1.0 / (2 * aj)))
    return float(b) if np.ndim(b) == 0 else b


def m_matrix(a: float, j: int) -> np.ndarray:
    """Matrix of the linearized system acting on the j-th Fourier coefficient."""
    _check_mode(a, j)
    aj = a * abs(j)
    return (1j * np.sign(j)) * np.array([[-aj - 1 / (2 * aj), 1 / (2 * aj)],
                                         [-1 / (2 * aj), aj + 1 / (2 * aj)]])


@dataclass(frozen=True)
class TransferPair:
    b: float
    q: np.ndarray
    q_inv: np.ndarray
    m: np.ndarray


def transfer(a: float, j: int) -> TransferPair:
    _check_mode(a, j)
    b = b_coeff(a, j)
    s = 1.0 / math.sqrt(1.0 - b * b)
    q = s * np.array([[1.0, b], [b, 1.0]])
    q_inv = s * np.array([[1.0, -b], [-b, 1.0]])
    return TransferPair(b=b, q=q, q_inv=q_inv, m=m_matrix(a, j))


def omega_eq(params: ModelParams) -> np.ndarray:
    return params.kappas * omega_array(params.a, params.jvec)


def bifurcation_speed(a: float, m: int) -> float:
    if m < 1:
        raise DomainError("m must be a positive integer")
    return math.sqrt(a * a * m * m + 1.0) / m


def n_terms(big_m: int) -> int:
    """Largest p with 1 - 2p > -big_m."""
    if big_m < 1:
        raise DomainError("big_m must be >= 1")
    return big_m // 2


def alpha(p: int) -> float:
    prod = 1.0
    for m in range(p):
        prod *= 0.5 - m
    return (-1) ** p * prod / math.factorial(p)


@dataclass(frozen=True)
class SymbolExpansion:
    a: float
    big_m: int
    alphas: tuple[float, ...]
    coefficients: tuple[float, ...]
    remainder: Callable = field(repr=False, compare=False)


def symbol_expand(a: float, big_m: int, dps: int = 60) -> SymbolExpansion:
    """Homogeneous expansion of i Omega(a, xi) in powers (i xi)^{1-2p}.

    The remainder is the exact symbol minus the truncation, evaluated in
    ``dps``-digit arithmetic because the difference cancels catastrophically
    in double precision for large xi.
    """
    if not a > 0:
        raise DomainError("a must be positive")
    npt = n_terms(big_m)
    alphas = tuple(alpha(p) for p in range(1, npt + 1))
    coeffs = tuple(al * a ** (1 - 2 * p) for p, al in enumerate(alphas, start=1))

    def remainder(xi):
        xs = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty(xs.shape, dtype=complex)
        with mpmath.workdps(dps):
            ma = mpmath.mpf(a)
            for k, x in enumerate(xs.flat):
                if x == 0:
                    raise DomainError("the symbol expansion is taken at xi != 0")
                mx = mpmath.mpf(x)
                exact = 1j * mpmath.sign(mx) * mpmath.sqrt(ma * ma * mx * mx + 1)
                trunc = ma * 1j * mx
                for p, al in enumerate(alphas, start=1):
                    trunc += mpmath.mpf(al) * ma ** (1 - 2 * p) * (1j * mx) ** (1 - 2 * p)
                out.flat[k] = complex(exact - trunc)
        return out if np.ndim(xi) else out[0]

    return SymbolExpansion(a=a, big_m=big_m, alphas=alphas, coefficients=coeffs, remainder=remainder)


def linear_wave(params: ModelParams, t, x) -> np.ndarray:
    """Reversible traveling solution of the linearized system.

    Broadcasts over ``t`` and ``x``; the last axis of the result holds
    (r_plus, r_minus).
    """
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    out = np.zeros(t.shape + (2,))
    a = params.a
    for j, amp in zip(params.s_plus, params.amps_plus):
        b = b_coeff(a, j)
        c = amp * np.cos(omega(a, j) * t - j * x) / math.sqrt(1 - b * b)
        out[..., 0] += c
        out[..., 1] += b * c
    for j, amp in zip(params.s_minus, params.amps_minus):
        b = b_coeff(a, j)
        c = amp * np.cos(omega(a, j) * t + j * x) / math.sqrt(1 - b * b)
        out[..., 0] += b * c
        out[..., 1] += c
    return out

"""Fourier grids, fields and the traveling-wave substitution.

Coefficients follow f(x) = sum_j c_j exp(i j x), so ``c_0`` is the average
(2 pi)^{-1} int f dx.  Real fields are stored through their one-sided
``rfft`` coefficients (j = 0 .. n/2), divided by n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError

_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    n_x: int
    n_phi: tuple[int, ...] = ()
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        object.__setattr__(self, "n_phi", tuple(int(n) for n in self.n_phi))
        object.__setattr__(self, "dealias_fraction", Fraction(self.dealias_fraction))
        for n in (self.n_x, *self.n_phi):
            if n < 8 or n % 2:
                raise DomainError(f"grid sizes must be even and >= 8, got {n}")
        if not 0 < self.dealias_fraction <= 1:
            raise DomainError("dealias_fraction must lie in (0, 1]")

    @property
    def kmax(self) -> int:
        """Largest retained |j|; the 2/3 rule gives n_x >= 3 kmax + 1."""
        if self.dealias_fraction == Fraction(2, 3):
            return (self.n_x - 1) // 3
        return int(self.dealias_fraction * self.n_x / 2)

    def x(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_x) / self.n_x

    def phi(self) -> list[np.ndarray]:
        return [2 * np.pi * np.arange(n) / n for n in self.n_phi]


def wavenumbers(n: int) -> np.ndarray:
    """Non-negative wavenumbers matching ``np.fft.rfft`` of length n."""
    return np.arange(n // 2 + 1)


def forward(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft(values, axis=-1) / values.shape[-1]


def inverse(coeffs: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfft(coeffs * n, n=n, axis=-1)


def deriv_coeffs(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Apply (i j)^m to one-sided coefficients; mode 0 is set to zero."""
    j = np.arange(coeffs.shape[-1])
    mult = np.zeros(coeffs.shape[-1], dtype=complex)
    mult[1:] = (1j * j[1:]) ** m
    if m % 2:
        # sin of the Nyquist mode vanishes on the grid
        mult[-1] = 0
    return coeffs * mult


def truncate(coeffs: np.ndarray, kmax: int) -> np.ndarray:
    out = coeffs.copy()
    out[..., kmax + 1:] = 0
    return out


@dataclass(frozen=True)
class RealField1D:
    """Real samples on n uniform points of [0, 2 pi) with their coefficients."""

    values: np.ndarray
    zero_mean: bool = True
    coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DomainError("RealField1D expects a 1D sample array")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        coeffs = forward(values)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.zero_mean and abs(coeffs[0]) > _MEAN_TOL * max(1.0, np.abs(values).max(initial=0.0)):
            raise DomainError(f"field flagged zero-mean has mean {coeffs[0].real:.3e}")

    @classmethod
    def from_coeffs(cls, coeffs, n: int, zero_mean: bool = True) -> "RealField1D":
        c = np.zeros(n // 2 + 1, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        k = min(len(c), len(coeffs))
        c[:k] = coeffs[:k]
        if zero_mean:
            c[0] = 0
        return cls(inverse(c, n), zero_mean=zero_mean)

    @classmethod
    def from_function(cls, func, n: int, zero_mean: bool = True) -> "RealField1D":
        x = 2 * np.pi * np.arange(n) / n
        return cls(func(x), zero_mean=zero_mean)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def coeff(self, j: int) -> complex:
        """Coefficient of exp(i j x), negative j through Hermitian symmetry."""
        c = self.coeffs[abs(j)]
        return complex(np.conj(c)) if j < 0 else complex(c)

    def mean(self) -> float:
        return float(self.coeffs[0].real)


@dataclass(frozen=True)
class PairField:
    plus: RealField1D
    minus: RealField1D

    def __post_init__(self):
        if self.plus.n != self.minus.n:
            raise DomainError("components of a PairField must share one grid")
        if self.plus.zero_mean != self.minus.zero_mean:
            raise DomainError("components of a PairField must share the zero-mean flag")

    @property
    def n(self) -> int:
        return self.plus.n

    @property
    def zero_mean(self) -> bool:
        return self.plus.zero_mean

    @classmethod
    def from_arrays(cls, plus, minus, zero_mean: bool = True) -> "PairField":
        return cls(RealField1D(plus, zero_mean), RealField1D(minus, zero_mean))

    @classmethod
    def from_coeffs(cls, cplus, cminus, n: int, zero_mean: bool = True) -> "PairField":
        return cls(RealField1D.from_coeffs(cplus, n, zero_mean),
                   RealField1D.from_coeffs(cminus, n, zero_mean))

    @classmethod
    def zeros(cls, n: int) -> "PairField":
        return cls.from_arrays(np.zeros(n), np.zeros(n))

    def stacked_coeffs(self) -> np.ndarray:
        return np.stack([self.plus.coeffs, self.minus.coeffs])

    def stacked_values(self) -> np.ndarray:
        return np.stack([self.plus.values, self.minus.values])


def deriv(f: RealField1D, m: int) -> RealField1D:
    """Return the field with coefficients (i j)^m c_j and zero mean."""
    if m < 0 and abs(f.mean()) > _MEAN_TOL * max(1.0, np.abs(f.values).max()):
        raise DomainError("negative-order derivative needs a zero-mean field")
    return RealField1D.from_coeffs(deriv_coeffs(f.coeffs, m), f.n)


def random_bandlimited(rng: np.random.Generator, n: int, kmax: int, amplitude: float = 1.0,
                       decay: float = 0.0) -> np.ndarray:
    """One-sided zero-mean coefficients with random modes 1..kmax."""
    c = np.zeros(n // 2 + 1, dtype=complex)
    j = np.arange(1, kmax + 1)
    c[1:kmax + 1] = (rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)) * j ** (-decay)
    scale = np.abs(inverse(c, n)).max()
    return c * (amplitude / scale if scale > 0 else 0.0)


def traveling_substitute(wave, jvec, grid: GridSpec) -> np.ndarray:
    """Sample Rc(phi - jvec x) on the product grid T^d x T.

    ``wave`` is any object exposing ``ells`` (n, d) and ``coeffs`` (n, ...)
    for the cosine series Rc(psi) = sum_l R_l cos(l . psi).  The output has
    shape ``(*grid.n_phi, grid.n_x, *coeffs.shape[1:])``.
    """
    jvec = np.asarray(jvec, dtype=int)
    ells = np.asarray(wave.ells, dtype=int)
    coeffs = np.asarray(wave.coeffs, dtype=float)
    if len(grid.n_phi) != len(jvec) or (ells.size and ells.shape[-1] != len(jvec)):
        raise DomainError("grid torus dimension does not match jvec")
    ells = ells.reshape(-1, len(jvec))
    axes = np.meshgrid(*grid.phi(), grid.x(), indexing="ij")
    phis, x = axes[:-1], axes[-1]
    out = np.zeros(x.shape + coeffs.shape[1:])
    for ell, r in zip(ells, coeffs):
        arg = sum(l * p for l, p in zip(ell, phis)) - int(ell @ jvec) * x
        out += np.multiply.outer(np.cos(arg), r)
    return out

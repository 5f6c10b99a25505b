"""Two-layer dispersive waves: dispersion, dynamics, traveling quasi-periodic
waves, small-divisor audits and linearized spectra."""

from .dispersion import ModelParams
from .errors import (BlowUpError, ConditioningError, DivergenceError, DomainError, LayerLabError,
                     MomentumError, NumericalError)
from .spectral import GridSpec, PairField, RealField1D

__all__ = [
    "ModelParams", "GridSpec", "PairField", "RealField1D", "LayerLabError", "DomainError",
    "MomentumError", "NumericalError", "BlowUpError", "ConditioningError", "DivergenceError",
]
__version__ = "0.1.0"

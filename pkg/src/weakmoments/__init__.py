"""Kernel-weighted ("weak") moments, transforms and cumulants for heavy-tailed laws."""

__version__ = "0.1.0"

from .distributions import Atom, Cauchy, Gaussian, Mixture, NIG, StudentT, SymmetricStable, from_dict
from .errors import ConfigError, DomainError, NumericalError, WeakMomentError
from .kernels import KernelSpec
from .quadrature import QuadratureConfig
from .weakcore import (
    WeakPair,
    normalise,
    weak_cf,
    weak_cumulants,
    weak_expectation,
    weak_moment,
    weak_moments,
)

__all__ = [
    "Atom", "Cauchy", "Gaussian", "Mixture", "NIG", "StudentT", "SymmetricStable", "from_dict",
    "ConfigError", "DomainError", "NumericalError", "WeakMomentError",
    "KernelSpec", "QuadratureConfig",
    "WeakPair", "normalise", "weak_cf", "weak_cumulants", "weak_expectation",
    "weak_moment", "weak_moments",
]

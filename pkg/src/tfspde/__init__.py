"""Spectral Galerkin solver for fractional diffusion driven by tempered fractional Gaussian noise.

Modules
-------
specfun   log-gamma and the modified Bessel function ``K_nu``
tfgn      tempered fractional Brownian motion covariance and sampling
spectral  Dirichlet sine basis, fractional eigenvalues, projection
solver    transformed semi-implicit Euler time stepping
harness   Monte Carlo convergence studies and presets
"""

from .errors import (AccuracyError, ConfigurationError, DegenerateRateError, DomainError,
                     FactorizationError, ProtocolError, ShapeError, TfspdeError)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ConfigurationError",
    "DegenerateRateError",
    "DomainError",
    "FactorizationError",
    "ProtocolError",
    "ShapeError",
    "TfspdeError",
]

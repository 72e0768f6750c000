"""Variational Monte Carlo in Fock space for 1D bosonic field theories."""

from fockvmc.core import (
    Boundary,
    Configuration,
    EstimateResult,
    Geometry,
    binned_statistics,
    wrap_position,
)

__all__ = [
    "Boundary",
    "Configuration",
    "EstimateResult",
    "Geometry",
    "binned_statistics",
    "wrap_position",
]

__version__ = "0.1.0"

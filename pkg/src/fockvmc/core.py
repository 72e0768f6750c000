"""Shared domain types: geometry, particle configurations, and binned estimates.

All quantities are 64-bit floats. Configurations store positions unsorted;
permutation invariance is a property of the functions consuming them, not of
the storage. The vacuum (n = 0) is a valid configuration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Boundary(enum.Enum):
    HARD_WALL = "hard_wall"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Geometry:
    """A 1D box of size `length` with either hard walls at 0 and L or a ring."""

    length: float
    boundary: Boundary

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"system length must be positive, got {self.length}")

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC


@dataclass(frozen=True)
class Configuration:
    """An unordered set of particle positions in [0, L], stored as a 1D array.

    n = 0 (empty array) is the vacuum.
    """

    positions: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=np.float64))
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.size

    def validate(self, geom: Geometry) -> None:
        if self.n and (self.positions.min() < 0 or self.positions.max() > geom.length):
            raise ValueError("positions outside [0, L]")


def wrap_position(x, geom: Geometry):
    """Map a proposed position into the box.

    Periodic: x mod L, in [0, L). Hard wall: returned unchanged; callers are
    responsible for rejecting out-of-range proposals.
    """
    if geom.periodic:
        return np.mod(x, geom.length)
    return x


@dataclass(frozen=True)
class EstimateResult:
    """Mean and binned standard error of a scalar observable."""

    mean: float
    std_err: float
    n_samples: int
    n_bins: int


class InsufficientDataError(ValueError):
    """Raised when a binning analysis has fewer than two complete bins."""


def default_bin_size(chain_length: int) -> int:
    """Default bin size: chain_length / 20, at least 10."""
    return max(10, chain_length // 20)


def binned_statistics(chains: Sequence[np.ndarray], bin_size: int | None = None) -> EstimateResult:
    """Binning analysis over per-chain sample sequences.

    Each chain is cut into consecutive bins of `bin_size` samples (trailing
    partial bins dropped); the standard error is the standard deviation of the
    bin means over all chains divided by sqrt(number of bins). The mean is the
    grand mean of the retained samples.
    """
    chains = [np.asarray(c, dtype=np.float64).ravel() for c in chains]
    if not chains or any(c.size == 0 for c in chains):
        raise InsufficientDataError("empty chain passed to binning analysis")
    if bin_size is None:
        bin_size = default_bin_size(min(c.size for c in chains))
    if bin_size < 1:
        raise ValueError(f"bin_size must be >= 1, got {bin_size}")

    bin_means = []
    kept = 0
    for c in chains:
        n_bins_c = c.size // bin_size
        if n_bins_c:
            trimmed = c[: n_bins_c * bin_size].reshape(n_bins_c, bin_size)
            bin_means.append(trimmed.mean(axis=1))
            kept += n_bins_c * bin_size
    n_bins = sum(b.size for b in bin_means)
    if n_bins < 2:
        raise InsufficientDataError(
            f"binning needs at least 2 complete bins, got {n_bins} "
            f"(bin_size={bin_size}, chain lengths={[c.size for c in chains]})"
        )
    bin_means = np.concatenate(bin_means)
    mean = float(bin_means.mean())
    std_err = float(bin_means.std(ddof=1) / np.sqrt(n_bins))
    return EstimateResult(mean=mean, std_err=std_err, n_samples=kept, n_bins=n_bins)

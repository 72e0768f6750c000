"""Shared toy states implementing the model evaluation protocol."""

import numpy as np
import pytest

from fockvmc.core import Boundary, Geometry


class ConstantSectorState:
    """phi_n identically c_n on sectors 0..len(c)-1, zero elsewhere.

    Closed form: P_n = c_n^2 L^n / Z with Z = sum_m c_m^2 L^m.
    """

    n_params = 0

    def __init__(self, amplitudes, L=1.0, boundary=Boundary.PERIODIC):
        self.amplitudes = np.asarray(amplitudes, dtype=np.float64)
        self.geometry = Geometry(L, boundary)
        self.n_max = self.amplitudes.size - 1

    def sector_allowed(self, n):
        return 0 <= n <= self.n_max and self.amplitudes[n] != 0.0

    def sector_probabilities(self):
        weights = self.amplitudes**2 * self.geometry.length ** np.arange(self.amplitudes.size)
        return weights / weights.sum()

    def log_amp(self, params, x):
        x = np.asarray(x, dtype=np.float64)
        b, n = x.shape
        if not self.sector_allowed(n):
            return np.full(b, -np.inf)
        out = np.full(b, np.log(self.amplitudes[n]))
        if not self.geometry.periodic and n:
            inside = ((x > 0) & (x < self.geometry.length)).all(axis=1)
            out[~inside] = -np.inf
        return out

    def log_amp_derivs(self, params, x):
        x = np.asarray(x, dtype=np.float64)
        b, n = x.shape
        return self.log_amp(params, x), np.zeros((b, n)), np.zeros(b)


class GaussianToy:
    """ln phi = -sum_i x_i^2 / 2 in every sector (free-boson test state)."""

    n_params = 0

    def __init__(self, L=10.0):
        self.geometry = Geometry(L, Boundary.PERIODIC)
        self.n_max = 64
        self.jastrow = None

    def sector_allowed(self, n):
        return n <= self.n_max

    def log_amp(self, params, x):
        x = np.asarray(x, dtype=np.float64)
        return -0.5 * (x**2).sum(axis=1)

    def log_amp_derivs(self, params, x):
        x = np.asarray(x, dtype=np.float64)
        return self.log_amp(params, x), -x, np.full(x.shape[0], -float(x.shape[1]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240815)

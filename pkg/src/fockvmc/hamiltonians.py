"""Benchmark Hamiltonians and their n-particle local energies.

The kinetic part always uses the Laplacian form

    -(1/2m) [ lap ln phi + |grad ln phi|^2 ],

which becomes configuration-independent for an exact eigenstate. For the
contact-interaction model the delta potential is omitted pointwise (it is
measure-zero under sampling); its physics enters exactly through the Jastrow
cusp u'(0) = m g u(0), which is checked when the local energy is assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fockvmc.ansatz import LiebLinigerJastrow, NqfsModel
from fockvmc.core import Boundary, Configuration

_SIN_GUARD = 1e-11


@dataclass(frozen=True)
class LiebLiniger:
    """Contact-interacting bosons in a hard-wall box."""

    m: float
    mu: float
    g: float
    potential: Callable[[np.ndarray], np.ndarray] | None = None

    boundary = Boundary.HARD_WALL

    def __post_init__(self):
        if self.m <= 0 or self.g < 0:
            raise ValueError("require m > 0 and g >= 0")


@dataclass(frozen=True)
class CalogeroSutherland:
    """Bosons on a ring with inverse-square-sinusoidal interaction."""

    m: float
    mu: float
    g: float

    boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.m <= 0 or self.g < 0:
            raise ValueError("require m > 0 and g >= 0")


@dataclass(frozen=True)
class RegularizedKleinGordon:
    """Quadratic boson model with a pair-creation term of strength lam.

    Well-defined only for |lam/v| <= 1/2. The kinetic coefficient is 1
    (equivalent to m = 1/2) and the number term enters with +v.
    """

    v: float
    lam: float
    quad_points: int = 64

    boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("require v > 0")
        if abs(self.lam / self.v) > 0.5:
            raise ValueError(f"|lam/v| = {abs(self.lam / self.v):.4f} exceeds 1/2")
        if self.quad_points < 2:
            raise ValueError("quad_points must be >= 2")


HamiltonianSpec = LiebLiniger | CalogeroSutherland | RegularizedKleinGordon


def kg_from_physical(mass: float, cutoff: float) -> tuple[float, float]:
    """(v, lam) couplings from the physical mass and momentum cutoff."""
    if cutoff <= 0:
        raise ValueError("momentum cutoff must be positive")
    return 0.5 * (mass**2 + cutoff**2), 0.25 * (mass**2 - cutoff**2)


def _check_contact_cusp(spec: LiebLiniger, model) -> None:
    """With g > 0 the ansatz must carry the matching contact-cusp Jastrow."""
    jastrow = getattr(model, "jastrow", None)
    if spec.g > 0:
        if not isinstance(jastrow, LiebLinigerJastrow):
            raise ValueError(
                "contact interaction with g > 0 requires the contact-cusp Jastrow "
                "(the delta potential is cancelled by u'(0) = m g u(0))"
            )
        if not (jastrow.m == spec.m and jastrow.g == spec.g):
            raise ValueError(
                f"Jastrow cusp (m={jastrow.m}, g={jastrow.g}) does not match the "
                f"Hamiltonian (m={spec.m}, g={spec.g})"
            )


def kg_pair_term_batch(model: NqfsModel, params, x: np.ndarray,
                       lam: float, quad_points: int) -> np.ndarray:
    """Pair-creation local term 2 lam sqrt((n+1)(n+2)) int dx' phi_{n+2}(x, x', x') / phi_n(x).

    The x' integral runs over a uniform grid of quad_points+1 trapezoid nodes
    (endpoints identified on the ring). Ratios are evaluated as
    exp(ln phi_{n+2} - ln phi_n) per node. If the n+2 sector is excluded the
    term is exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    b, n = x.shape
    if lam == 0.0 or not model.sector_allowed(n + 2):
        return np.zeros(b)
    L = model.geometry.length
    q = quad_points
    nodes = np.linspace(0.0, L, q + 1)
    weights = np.full(q + 1, L / q)
    weights[0] *= 0.5
    weights[-1] *= 0.5

    base = model.log_amp(params, x)
    big = np.empty((b, q + 1, n + 2))
    big[:, :, :n] = x[:, None, :]
    big[:, :, n] = nodes[None, :]
    big[:, :, n + 1] = nodes[None, :]
    log_up = model.log_amp(params, big.reshape(b * (q + 1), n + 2)).reshape(b, q + 1)
    ratio = np.exp(log_up - base[:, None])
    integral = ratio @ weights
    return 2.0 * lam * math.sqrt((n + 1) * (n + 2)) * integral


def local_energy_batch(spec: HamiltonianSpec, model, params, x: np.ndarray) -> np.ndarray:
    """Local energies of a same-sector batch x of shape (B, n)."""
    x = np.asarray(x, dtype=np.float64)
    b, n = x.shape
    if n == 0 and not isinstance(spec, RegularizedKleinGordon):
        return np.zeros(b)

    if isinstance(spec, RegularizedKleinGordon):
        if n:
            val, grad, lap = model.log_amp_derivs(params, x)
            kin = -(lap + (grad * grad).sum(axis=1))
        else:
            kin = np.zeros(b)
        e = kin + spec.v * n
        e += kg_pair_term_batch(model, params, x, spec.lam, spec.quad_points)
        return e

    val, grad, lap = model.log_amp_derivs(params, x)
    kin = -(0.5 / spec.m) * (lap + (grad * grad).sum(axis=1))
    pot = np.full(b, -spec.mu * n)
    if isinstance(spec, LiebLiniger):
        _check_contact_cusp(spec, model)
        if spec.potential is not None:
            pot = pot + spec.potential(x).sum(axis=1)
        return kin + pot

    # Calogero-Sutherland pair potential
    L = model.geometry.length
    if n >= 2:
        i_idx, j_idx = np.triu_indices(n, k=1)
        d = np.mod(x[:, i_idx] - x[:, j_idx], L)
        s = np.sin(np.pi * d / L)
        if np.abs(s).min() < _SIN_GUARD:
            raise ValueError("coincident particles: inverse-square potential is singular")
        pot = pot + (spec.g * np.pi**2 / L**2) * (1.0 / (s * s)).sum(axis=1)
    return kin + pot


def local_energy(spec: HamiltonianSpec, model, params, config: Configuration) -> float:
    """Local energy of a single configuration."""
    return float(local_energy_batch(spec, model, params, config.positions.reshape(1, -1))[0])


def kg_pair_term(model: NqfsModel, params, config: Configuration,
                 lam: float, quad_points: int = 64) -> float:
    """Pair-creation term of one configuration (see kg_pair_term_batch)."""
    x = config.positions.reshape(1, -1)
    return float(kg_pair_term_batch(model, params, x, lam, quad_points)[0])

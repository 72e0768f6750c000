"""Closed-form and semi-analytic ground-truth solutions for the benchmarks.

Everything here is independent of the variational machinery: these functions
are the oracles that tests and the CLI `exact` subcommand compare against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from fockvmc.core import Boundary, Geometry

# -- Tonks-Girardeau (free fermions in a box) ----------------------------------


def tg_energy_at_n(n: int, m: float, mu: float, L: float) -> float:
    """pi^2 n(n+1)(2n+1) / (12 m L^2) - mu n."""
    return math.pi**2 * n * (n + 1) * (2 * n + 1) / (12.0 * m * L**2) - mu * n


def tg_ground_state(m: float, mu: float, L: float, n_range: int = 1000) -> tuple[float, int]:
    """Minimize the hard-wall free-fermion energy over particle number."""
    if m <= 0 or L <= 0:
        raise ValueError("require m > 0 and L > 0")
    best_e, best_n = 0.0, 0
    for n in range(1, n_range + 1):
        e = tg_energy_at_n(n, m, mu, L)
        if e < best_e:
            best_e, best_n = e, n
        elif n > best_n + 2:
            break  # energy is convex in n; well past the minimum
    return best_e, best_n


def tg_densities(n0: int, m: float, L: float, grid: np.ndarray):
    """Number and kinetic-energy densities of the hard-wall free-fermion state."""
    grid = np.asarray(grid, dtype=np.float64)
    j = np.arange(1, n0 + 1)[:, None]
    sines = np.sin(j * np.pi * grid[None, :] / L)
    cosines = np.cos(j * np.pi * grid[None, :] / L)
    number = (2.0 / L) * (sines**2).sum(axis=0)
    kinetic = (1.0 / (2 * m)) * (2.0 / L) * ((j * np.pi / L) ** 2 * cosines**2).sum(axis=0)
    return number, kinetic


# -- hard-wall Bethe equations -------------------------------------------------


@dataclass(frozen=True)
class BetheSolution:
    k: np.ndarray
    energy: float
    n: int
    residual: float


class BetheConvergenceError(RuntimeError):
    pass


def _bethe_residual(k: np.ndarray, c: float, L: float) -> np.ndarray:
    """F_i(k) = k_i L - pi i + sum_{j != i} [atan((k_i-k_j)/c) + atan((k_i+k_j)/c)].

    Quantum numbers are i = 1..n; this is the branch convention that reduces
    to k_i = i pi / L in the impenetrable limit.
    """
    n = k.size
    dif = k[:, None] - k[None, :]
    tot = k[:, None] + k[None, :]
    terms = np.arctan(dif / c) + np.arctan(tot / c)
    np.fill_diagonal(terms, 0.0)
    return k * L - np.pi * np.arange(1, n + 1) + terms.sum(axis=1)


def _bethe_jacobian(k: np.ndarray, c: float, L: float) -> np.ndarray:
    n = k.size
    dif = k[:, None] - k[None, :]
    tot = k[:, None] + k[None, :]
    a = c / (c**2 + dif**2)
    b = c / (c**2 + tot**2)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(b, 0.0)
    jac = -a + b
    jac[np.arange(n), np.arange(n)] = L + (a + b).sum(axis=1)
    return jac


def _newton_bethe(k0: np.ndarray, c: float, L: float,
                  tol: float = 1e-12, max_iter: int = 200) -> np.ndarray | None:
    k = k0.copy()
    for _ in range(max_iter):
        f = _bethe_residual(k, c, L)
        if np.abs(f).max() < tol:
            return k
        step = np.linalg.solve(_bethe_jacobian(k, c, L), f)
        lam, f0 = 1.0, np.abs(f).max()
        for _ in range(40):
            trial = k - lam * step
            if np.abs(_bethe_residual(trial, c, L)).max() < f0:
                k = trial
                break
            lam *= 0.5
        else:
            return None
    return k if np.abs(_bethe_residual(k, c, L)).max() < tol else None


def bethe_solve(m: float, mu: float, g: float, L: float, n: int) -> BetheSolution:
    """Ground-state pseudomomenta at fixed particle number n."""
    if g <= 0:
        raise ValueError("Bethe equations require g > 0")
    if n == 0:
        return BetheSolution(k=np.empty(0), energy=0.0, n=0, residual=0.0)
    c = 2.0 * m * g
    k = _newton_bethe(np.arange(1, n + 1) * np.pi / L, c, L)
    if k is None:
        # continuation from the impenetrable limit down to the requested coupling
        k = np.arange(1, n + 1) * np.pi / L
        for cc in np.geomspace(max(c * 1e4, 1e4), c, 25):
            k_next = _newton_bethe(k, cc, L)
            if k_next is None:
                raise BetheConvergenceError(
                    f"Newton failed at c={cc:.3e} (n={n}); residual "
                    f"{np.abs(_bethe_residual(k, cc, L)).max():.2e}"
                )
            k = k_next
    residual = float(np.abs(_bethe_residual(k, c, L)).max())
    if residual > 1e-10:
        raise BetheConvergenceError(f"Bethe residual {residual:.2e} exceeds 1e-10")
    if not (np.all(np.diff(k) > 0) and np.all(k > 0)):
        raise BetheConvergenceError("pseudomomenta are not strictly increasing and positive")
    energy = float((k**2).sum() / (2 * m) - mu * n)
    return BetheSolution(k=k, energy=energy, n=n, residual=residual)


def bethe_ground(m: float, mu: float, g: float, L: float,
                 n_range: int = 200) -> BetheSolution:
    """Minimize the fixed-n Bethe energy over the particle number."""
    best = BetheSolution(k=np.empty(0), energy=0.0, n=0, residual=0.0)
    for n in range(1, n_range + 1):
        sol = bethe_solve(m, mu, g, L, n)
        if sol.energy < best.energy:
            best = sol
        elif n > best.n + 2:
            break
    return best


# -- Calogero-Sutherland -------------------------------------------------------


def cs_lambda(m: float, g: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * m * g))


def cs_energy_at_n(n: int, m: float, mu: float, g: float, L: float) -> float:
    lam = cs_lambda(m, g)
    return math.pi**2 * lam**2 * n * (n**2 - 1) / (6.0 * m * L**2) - mu * n


def cs_ground(m: float, mu: float, g: float, L: float,
              n_range: int = 1000) -> tuple[float, int, float]:
    """(E0, n0, lambda) of the ring model with inverse-square-sinusoidal coupling."""
    if g < 0:
        raise ValueError("require g >= 0")
    lam = cs_lambda(m, g)
    best_e, best_n = 0.0, 0
    for n in range(1, n_range + 1):
        e = cs_energy_at_n(n, m, mu, g, L)
        if e < best_e:
            best_e, best_n = e, n
        elif n > best_n + 2:
            break
    return best_e, best_n, lam


def _cs_exact_log_amp(x: np.ndarray, lam: float, L: float) -> np.ndarray:
    """lam * sum_{i<j} ln|sin(pi (x_i - x_j)/L)| for rows of x."""
    n = x.shape[1]
    i_idx, j_idx = np.triu_indices(n, k=1)
    s = np.abs(np.sin(np.pi * (x[:, i_idx] - x[:, j_idx]) / L))
    with np.errstate(divide="ignore"):
        return lam * np.log(s).sum(axis=1)


def cs_exact_g1(m: float, g: float, L: float, n0: int, displacements: np.ndarray,
                mc_samples: int = 20000, seed: int = 0, burn_in: int = 1000,
                n_chains: int = 8):
    """One-body density matrix of the exact ring ground state, by Monte Carlo.

    Samples |prod sin^lam|^2 with a fixed-n random-walk Metropolis and applies
    the displaced-coordinate ratio estimator. Returns (values, std_errs) per
    displacement.
    """
    if n0 < 1:
        raise ValueError("need at least one particle")
    displacements = np.asarray(displacements, dtype=np.float64)
    lam = cs_lambda(m, g)
    rng = np.random.default_rng(seed)
    w = 0.3 * L

    x = rng.uniform(0, L, size=(n_chains, n0))
    logp = _cs_exact_log_amp(x, lam, L)
    per_chain = np.zeros((n_chains, displacements.size))
    counts = 0
    steps = burn_in + mc_samples
    for step in range(steps):
        prop = np.mod(x + rng.uniform(-w / 2, w / 2, size=x.shape), L)
        logp_prop = _cs_exact_log_amp(prop, lam, L)
        accept = np.log(rng.uniform(size=n_chains)) < 2.0 * (logp_prop - logp)
        x[accept] = prop[accept]
        logp[accept] = logp_prop[accept]
        if step >= burn_in:
            shifted = np.repeat(x[:, None, :], displacements.size, axis=1)
            shifted[:, :, 0] = np.mod(shifted[:, :, 0] + displacements[None, :], L)
            flat = shifted.reshape(n_chains * displacements.size, n0)
            ratios = np.exp(
                _cs_exact_log_amp(flat, lam, L).reshape(n_chains, -1) - logp[:, None]
            )
            per_chain += (n0 / L) * ratios
            counts += 1
    per_chain /= counts
    values = per_chain.mean(axis=0)
    std_errs = per_chain.std(axis=0, ddof=1) / math.sqrt(n_chains)
    return values, std_errs


# -- Bogoliubov solution of the quadratic model ---------------------------------


@dataclass(frozen=True)
class BogoliubovSolution:
    momenta: np.ndarray          # p_j = 2 pi j / L for j = 0..j_max
    u: np.ndarray
    v: np.ndarray
    eps0: float                  # ground-state energy density
    pn: np.ndarray               # P_n over n = 0..n_trunc (odd entries zero)
    mean_n: float                # sum_p v_p^2 over all modes |j| <= j_max
    mean_n_from_pn: float        # sum_n n P_n from the table
    norm_deficit: float          # 1 - (truncated norm) / (closed-form norm)

    @property
    def j_max(self) -> int:
        return self.momenta.size - 1


def bogoliubov_solve(v: float, lam: float, L: float, j_max: int | None = None,
                     n_trunc: int = 40) -> BogoliubovSolution:
    """Diagonalize the quadratic pair-creation Hamiltonian on a ring.

    u_p, v_p follow the closed forms; eps0 = (1/2L) sum_p [sqrt((p^2+v)^2-4 lam^2)
    - (p^2+v)]; P_n comes from a convolution over modes of the pair-occupation
    weights (zero-momentum mode (v0/2u0)^(2l) (2l)!/(l!)^2, paired modes
    (v_p/u_p)^(2l)), normalized at the end.
    """
    if v <= 0:
        raise ValueError("require v > 0")
    if abs(lam) > 0.5 * v:
        raise ValueError(f"|lam/v| = {abs(lam) / v:.4f} exceeds 1/2")

    def mode_quantities(j):
        p = 2.0 * np.pi * j / L
        a = p**2 + v
        root = np.sqrt(a**2 - 4.0 * lam**2)
        up = np.sqrt(a / (2.0 * root) + 0.5)
        vp = -np.sqrt(np.maximum(a / (2.0 * root) - 0.5, 0.0))
        return a, root, up, vp

    if j_max is None:
        j_max = 4
        while True:
            a, root, _, vp = mode_quantities(np.array([float(j_max)]))
            if abs(root[0] - a[0]) / (2 * L) < 1e-12 and vp[0] ** 2 < 1e-12:
                break
            j_max *= 2
            if j_max > 2**24:
                raise RuntimeError("failed to find a converged mode cutoff")

    j = np.arange(j_max + 1, dtype=np.float64)
    a, root, u_arr, v_arr = mode_quantities(j)
    # modes +-p_j for j >= 1 both contribute; j = 0 contributes once
    eps0 = float((root[0] - a[0]) + 2.0 * (root[1:] - a[1:]).sum()) / (2.0 * L)
    mean_n = float(v_arr[0] ** 2 + 2.0 * (v_arr[1:] ** 2).sum())

    # particle-number distribution by convolution over pair counts
    l_max = n_trunc // 2
    ls = np.arange(l_max + 1)
    r0 = (v_arr[0] / (2.0 * u_arr[0])) ** 2
    with np.errstate(divide="ignore"):
        log_w0 = ls * np.log(r0) if r0 > 0 else np.where(ls == 0, 0.0, -np.inf)
    w0 = np.exp(log_w0 + gammaln(2 * ls + 1) - 2 * gammaln(ls + 1))
    dist = w0
    for jj in range(1, j_max + 1):
        r = (v_arr[jj] / u_arr[jj]) ** 2
        if r < 1e-300:
            continue
        wj = r**ls
        dist = np.convolve(dist, wj)[: l_max + 1]

    # closed-form norm u_0 prod_j u_j^2 gives the truncation deficit
    log_norm = float(np.log(u_arr[0]) + 2.0 * np.log(u_arr[1:]).sum())
    norm_deficit = 1.0 - float(dist.sum()) * math.exp(-log_norm)

    pn = np.zeros(n_trunc + 1)
    pn[0 : 2 * l_max + 1 : 2] = dist / dist.sum()
    mean_n_from_pn = float((np.arange(n_trunc + 1) * pn).sum())
    return BogoliubovSolution(
        momenta=2.0 * np.pi * j / L, u=u_arr, v=v_arr, eps0=eps0, pn=pn,
        mean_n=mean_n, mean_n_from_pn=mean_n_from_pn, norm_deficit=norm_deficit,
    )


# -- reference amplitude for density cross-checks --------------------------------


class TonksGirardeauState:
    """|det[sqrt(2/L) sin(j pi x_i / L)]| reference state (fixed sector n0).

    Implements the evaluation protocol the sampler and density estimators
    consume (log_amp / log_amp_derivs); it has no variational parameters.
    """

    n_params = 0

    def __init__(self, n0: int, L: float):
        if n0 < 1:
            raise ValueError("need at least one particle")
        self.n0 = int(n0)
        self.geometry = Geometry(L, Boundary.HARD_WALL)
        self.n_max = int(n0)

    def sector_allowed(self, n: int) -> bool:
        return n == self.n0

    def _matrices(self, x: np.ndarray):
        L = self.geometry.length
        j = np.arange(1, self.n0 + 1)
        arg = np.pi * x[:, :, None] * j[None, None, :] / L
        norm = math.sqrt(2.0 / L)
        m = norm * np.sin(arg)
        dm = norm * (np.pi * j / L)[None, None, :] * np.cos(arg)
        d2m = -((np.pi * j / L) ** 2)[None, None, :] * m
        return m, dm, d2m

    def log_amp(self, params, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        b, n = x.shape
        if n != self.n0:
            return np.full(b, -np.inf)
        L = self.geometry.length
        out = np.full(b, -np.inf)
        valid = ((x > 0.0) & (x < L)).all(axis=1)
        if valid.any():
            m, _, _ = self._matrices(x[valid])
            _, logdet = np.linalg.slogdet(m)
            out[valid] = logdet
        return out

    def log_amp_derivs(self, params, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.n0:
            raise ValueError("sector has zero amplitude under this reference state")
        m, dm, d2m = self._matrices(x)
        inv = np.linalg.inv(m)
        _, logdet = np.linalg.slogdet(m)
        # row i of m depends on x_i only
        first = np.einsum("bij,bji->bi", dm, inv, optimize=True)
        tr2 = np.einsum("bij,bji->bi", d2m, inv, optimize=True)
        lap = (tr2 - first**2).sum(axis=1)
        return logdet, first, lap

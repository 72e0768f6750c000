"""Permutation-invariant log-amplitude over particle-number sectors.

The n-particle log-amplitude is assembled as

    ln phi_n(x) = -(n/2) ln L                     (dimensional prefactor)
                + rho1( sum_i  phi1(embed(x_i)) )  (position network)
                + rho2( sum_{i<j} phi2(embed(x_i - x_j)) )  (separation network)
                + ln q_n                           (particle-number regularizer)
                + ln cutoff (hard wall, optional)
                + ln J_n    (pairwise Jastrow, optional)

The two network outputs are used directly as additive log-factors, which keeps
the ansatz strictly positive and all arithmetic in log space. Excluded sectors
(wrong parity, n > n_max) and hard-wall boundary contact carry a -inf
sentinel; no NaN is ever produced.

Parameter vector layout (float64, fixed at model construction):

    [ f1.phi | f1.rho | f2.phi | f2.rho | c1 | c2 | s ]

with each network block laid out as documented in ``fockvmc.nets``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import qmc

from fockvmc.core import Boundary, Configuration, Geometry
from fockvmc.nets import Mlp

NEG_INF = -np.inf


# -- feature embeddings -------------------------------------------------------


class EmbeddingKind(enum.Enum):
    HARD_WALL_POSITION = "hard_wall_position"
    HARD_WALL_SEPARATION = "hard_wall_separation"
    PERIODIC_POSITION = "periodic_position"
    PERIODIC_SEPARATION = "periodic_separation"


@dataclass(frozen=True)
class EmbeddingSpec:
    kind: EmbeddingKind
    length: float


def embed(spec: EmbeddingSpec, raw: float) -> np.ndarray:
    """Feature embedding of one position or signed separation."""
    L = spec.length
    if spec.kind is EmbeddingKind.HARD_WALL_POSITION:
        return np.array([raw / L, 1.0 - raw / L])
    if spec.kind is EmbeddingKind.PERIODIC_POSITION:
        return np.array([np.sin(2 * np.pi * raw / L), np.cos(2 * np.pi * raw / L)])
    if spec.kind is EmbeddingKind.HARD_WALL_SEPARATION:
        return np.array([(raw / L) ** 2])
    return np.array([np.cos(2 * np.pi * raw / L)])


def embedding_dim(kind: EmbeddingKind) -> int:
    return 2 if kind in (EmbeddingKind.HARD_WALL_POSITION, EmbeddingKind.PERIODIC_POSITION) else 1


def _embed_batch(kind: EmbeddingKind, L: float, raw: np.ndarray) -> np.ndarray:
    """Vectorized embedding; output shape raw.shape + (embedding_dim,)."""
    if kind is EmbeddingKind.HARD_WALL_POSITION:
        u = raw / L
        return np.stack([u, 1.0 - u], axis=-1)
    if kind is EmbeddingKind.PERIODIC_POSITION:
        u = 2 * np.pi * raw / L
        return np.stack([np.sin(u), np.cos(u)], axis=-1)
    if kind is EmbeddingKind.HARD_WALL_SEPARATION:
        return ((raw / L) ** 2)[..., None]
    return np.cos(2 * np.pi * raw / L)[..., None]


def _embed_jet(kind: EmbeddingKind, L: float, raw: np.ndarray):
    """Embedding with first and second derivatives w.r.t. the raw coordinate."""
    if kind is EmbeddingKind.HARD_WALL_POSITION:
        u = raw / L
        e = np.stack([u, 1.0 - u], axis=-1)
        de = np.broadcast_to(np.array([1.0 / L, -1.0 / L]), e.shape)
        d2e = np.zeros_like(e)
        return e, np.ascontiguousarray(de), d2e
    if kind is EmbeddingKind.PERIODIC_POSITION:
        w = 2 * np.pi / L
        s, c = np.sin(w * raw), np.cos(w * raw)
        e = np.stack([s, c], axis=-1)
        de = np.stack([w * c, -w * s], axis=-1)
        d2e = -(w * w) * e
        return e, de, d2e
    if kind is EmbeddingKind.HARD_WALL_SEPARATION:
        e = ((raw / L) ** 2)[..., None]
        de = (2.0 * raw / L**2)[..., None]
        d2e = np.full_like(e, 2.0 / L**2)
        return e, de, d2e
    w = 2 * np.pi / L
    c = np.cos(w * raw)
    e = c[..., None]
    de = (-w * np.sin(w * raw))[..., None]
    d2e = -(w * w) * e
    return e, de, d2e


# -- deep set = rho(sum phi) --------------------------------------------------


@dataclass(frozen=True)
class DeepSet:
    """Sum-aggregated permutation-invariant network rho(sum_k phi(e_k)).

    Defined on the empty set: the aggregate is the zero feature vector.
    """

    phi: Mlp
    rho: Mlp

    def __post_init__(self):
        if self.rho.input_dim != self.phi.output_dim:
            raise ValueError("rho input dim must equal phi output dim")
        if self.rho.output_dim != 1:
            raise ValueError("rho must have scalar output")

    @property
    def n_params(self) -> int:
        return self.phi.n_params + self.rho.n_params

    def split(self, params):
        return params[: self.phi.n_params], params[self.phi.n_params :]

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate([self.phi.init_params(rng), self.rho.init_params(rng)])

    def value(self, params, emb: np.ndarray) -> np.ndarray:
        """emb: (B, M, emb_dim) embedded set members (M may be 0) -> (B,)."""
        p_phi, p_rho = self.split(params)
        b, m, _ = emb.shape
        if m:
            feats = self.phi.forward(p_phi, emb.reshape(b * m, -1)).reshape(b, m, -1)
            agg = feats.sum(axis=1)
        else:
            agg = np.zeros((b, self.phi.output_dim))
        return self.rho.forward(p_rho, agg)[:, 0]


def deepset_eval(ds: DeepSet, params, spec: EmbeddingSpec, raws) -> float:
    """Evaluate one deep set on a (possibly empty) sequence of raw inputs."""
    raws = np.asarray(raws, dtype=np.float64).reshape(1, -1)
    emb = _embed_batch(spec.kind, spec.length, raws)
    return float(ds.value(params, emb)[0])


# -- analytic factors ---------------------------------------------------------


def log_reg_factor(n, c1, c2, s):
    """ln q_n for the smoothed-pulse particle-number regularizer.

    q_n = 1/(1+exp(-s(n-c1))) * 1/(1+exp(s(n-c2))), evaluated in log space
    (no overflow for |s*n| up to ~1e3 and far beyond).
    """
    n = np.asarray(n, dtype=np.float64)
    return -np.logaddexp(0.0, -s * (n - c1)) - np.logaddexp(0.0, s * (n - c2))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def reg_param_grads(n, c1, c2, s):
    """d(ln q_n)/d(c1, c2, s); shape n.shape + (3,)."""
    n = np.asarray(n, dtype=np.float64)
    a = s * (n - c1)
    b = s * (n - c2)
    sig_ma = _sigmoid(np.atleast_1d(-a))
    sig_b = _sigmoid(np.atleast_1d(b))
    g = np.stack(
        [-s * sig_ma, s * sig_b, sig_ma * (n - c1) - sig_b * (n - c2)],
        axis=-1,
    )
    return g.reshape(np.shape(n) + (3,))


def _log_cutoff_values(x: np.ndarray, L: float):
    """Per-position ln[(x/L)(1-x/L)] (interior or boundary; -inf on contact)."""
    with np.errstate(divide="ignore"):
        return np.log(x) + np.log(L - x) - 2.0 * math.log(L)


def _log_cutoff_terms(x: np.ndarray, L: float):
    """Per-position ln[(x/L)(1-x/L)] with first/second derivatives (interior only)."""
    t = _log_cutoff_values(x, L)
    dt = 1.0 / x - 1.0 / (L - x)
    d2t = -1.0 / x**2 - 1.0 / (L - x) ** 2
    return t, dt, d2t


def log_cutoff_factor(config: Configuration, L: float) -> float:
    """ln[(L/30)^(-n/2) prod_i (x_i/L)(1 - x_i/L)]; -inf on boundary contact."""
    x = config.positions
    if x.size == 0:
        return 0.0
    t = _log_cutoff_values(x, L)
    return float(t.sum() - 0.5 * x.size * math.log(L / 30.0))


# -- Jastrow factors ----------------------------------------------------------


@dataclass(frozen=True)
class LiebLinigerJastrow:
    """Contact-interaction Jastrow u(d) = |d|/L + 1/(mgL).

    Satisfies the contact cusp condition u'(0) = m g u(0) by construction, so
    the delta potential is cancelled by the kinetic term exactly. Each sector
    is L2-normalized (Selberg closed form at g = inf, quasi-random quadrature
    otherwise).
    """

    m: float
    g: float

    kind = "lieb_liniger"
    needs_norm = True

    def pair_jets(self, d: np.ndarray, L: float):
        a = np.abs(d) + 1.0 / (self.m * self.g)
        t = np.log(a / L)
        dt = np.sign(d) / a
        d2t = -1.0 / a**2
        return t, dt, d2t


@dataclass(frozen=True)
class CalogeroTanhJastrow:
    """Inverse-square cusp Jastrow u(d) = tanh(k|d|/L)^lam (1-tanh(k|d|/L))^lam.

    Behaves as |d|^lam at short distance (Kato exponent for the
    inverse-square-sinusoidal interaction) and decays smoothly as |d| -> L,
    while staying deliberately far from the exact ground state.
    """

    lam: float
    kappa: float = 12.0

    kind = "calogero_tanh"
    needs_norm = False

    def pair_jets(self, d: np.ndarray, L: float):
        u = self.kappa * np.abs(d) / L
        t_ = np.tanh(u)
        g = 1.0 - t_ * t_
        with np.errstate(divide="ignore"):
            t = self.lam * (np.log(t_) + np.log1p(-t_))
        with np.errstate(divide="ignore"):
            du = self.lam * (g / t_ - (1.0 + t_))
            d2u = -self.lam * g * (1.0 / t_**2 + 2.0)
        scale = self.kappa / L
        return t, du * scale * np.sign(d), d2u * scale**2


@dataclass(frozen=True)
class CalogeroSinJastrow:
    """Reference ansatz u(d) = |sin(pi d / L)|^lam (exact ring ground state).

    Used as an oracle state by tests and the exact one-body-density-matrix
    baseline, not during optimization.
    """

    lam: float

    kind = "calogero_sin"
    needs_norm = False

    def pair_jets(self, d: np.ndarray, L: float):
        w = np.pi / L
        s = np.sin(w * d)
        with np.errstate(divide="ignore"):
            t = self.lam * np.log(np.abs(s))
        with np.errstate(divide="ignore", invalid="ignore"):
            dt = self.lam * w * np.cos(w * d) / s
            d2t = -self.lam * w * w / (s * s)
        return t, dt, d2t


Jastrow = LiebLinigerJastrow | CalogeroTanhJastrow | CalogeroSinJastrow


def log_jastrow(config: Configuration, jastrow: Jastrow | None, L: float,
                log_norm: float = 0.0) -> float:
    """Sum of pairwise log-Jastrow terms minus half the sector log-norm."""
    if jastrow is None or config.n < 2:
        return 0.0 if (jastrow is None or not jastrow.needs_norm) else -0.5 * log_norm
    i_idx, j_idx = np.triu_indices(config.n, k=1)
    d = config.positions[i_idx] - config.positions[j_idx]
    t, _, _ = jastrow.pair_jets(d, L)
    total = float(t.sum())
    if jastrow.needs_norm:
        total -= 0.5 * log_norm
    return total


def selberg_log_norm(n: int, L: float) -> float:
    """ln integral over [0,L]^n of prod_{i<j} (|x_i-x_j|/L)^2, closed form."""
    j = np.arange(n)
    return n * math.log(L) + float(
        np.sum(2 * gammaln(1 + j) + gammaln(2 + j) - gammaln(1 + n + j))
    )


def _qmc_log_norm(n: int, L: float, m: float, g: float, n_points: int = 2**14) -> float:
    """ln integral over [0,L]^n of prod_{i<j} (|x_i-x_j|/L + 1/(mgL))^2.

    Quasi-random (Sobol) quadrature; deterministic for a given n.
    """
    if n < 2:
        return n * math.log(L)
    sob = qmc.Sobol(d=n, scramble=True, seed=1234 + n)
    pts = sob.random(n_points) * L
    i_idx, j_idx = np.triu_indices(n, k=1)
    d = np.abs(pts[:, i_idx] - pts[:, j_idx])
    logf = 2.0 * np.log(d / L + 1.0 / (m * g * L)).sum(axis=1)
    peak = logf.max()
    return n * math.log(L) + peak + math.log(np.exp(logf - peak).mean())


def jastrow_log_norm(n: int, jastrow: Jastrow, L: float, n_max: int | None = None) -> float:
    """Sector L2 normalization ln int d^n x J_n^2 for normalized Jastrows."""
    if n_max is not None and n > n_max:
        raise ValueError(f"n={n} exceeds n_max={n_max}")
    if not jastrow.needs_norm:
        return 0.0
    if math.isinf(jastrow.g):
        return selberg_log_norm(n, L)
    return _qmc_log_norm(n, L, jastrow.m, jastrow.g)


# -- pair bookkeeping ---------------------------------------------------------


@lru_cache(maxsize=128)
def _pair_indices(n: int):
    """(i_idx, j_idx, signed incidence (n, P), absolute incidence (n, P))."""
    i_idx, j_idx = np.triu_indices(n, k=1)
    p = i_idx.size
    a = np.zeros((n, p))
    a[i_idx, np.arange(p)] = 1.0
    a[j_idx, np.arange(p)] -= 1.0
    return i_idx, j_idx, a, np.abs(a)


class Parity(enum.Enum):
    ALL = "all"
    EVEN_ONLY = "even_only"


# -- the model ----------------------------------------------------------------


class NqfsModel:
    """Assembled field-state ansatz; immutable once constructed.

    Construct via :func:`build_model`. All evaluation methods are functional
    in the parameter vector and safe for concurrent read-only use.
    """

    def __init__(self, geometry: Geometry, f1: DeepSet, f2: DeepSet,
                 jastrow: Jastrow | None, cutoff_enabled: bool,
                 parity: Parity, n_max: int,
                 reg_init: tuple[float, float, float] = (0.0, 12.0, 1.0)):
        if cutoff_enabled and geometry.periodic:
            raise ValueError("the boundary cutoff factor requires hard walls")
        self.geometry = geometry
        self.f1 = f1
        self.f2 = f2
        self.jastrow = jastrow
        self.cutoff_enabled = cutoff_enabled
        self.parity = parity
        self.n_max = int(n_max)
        self.reg_init = tuple(float(v) for v in reg_init)
        self._pos_kind = (
            EmbeddingKind.PERIODIC_POSITION if geometry.periodic
            else EmbeddingKind.HARD_WALL_POSITION
        )
        self._sep_kind = (
            EmbeddingKind.PERIODIC_SEPARATION if geometry.periodic
            else EmbeddingKind.HARD_WALL_SEPARATION
        )
        if f1.phi.input_dim != 2 or f2.phi.input_dim != 1:
            raise ValueError("f1 expects 2-dim embeddings, f2 expects 1-dim embeddings")
        self._jastrow_norms: dict[int, float] = {}

    # parameter layout ------------------------------------------------------

    @property
    def n_params(self) -> int:
        return self.f1.n_params + self.f2.n_params + 3

    @property
    def reg_slice(self) -> slice:
        return slice(self.n_params - 3, self.n_params)

    @property
    def net_slice(self) -> slice:
        return slice(0, self.n_params - 3)

    def split_params(self, params):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        k1 = self.f1.n_params
        k2 = k1 + self.f2.n_params
        return params[:k1], params[k1:k2], params[k2:]

    def init_params(self, seed: int | np.random.SeedSequence = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return np.concatenate([
            self.f1.init_params(rng),
            self.f2.init_params(rng),
            np.asarray(self.reg_init, dtype=np.float64),
        ])

    def jastrow_log_norm(self, n: int) -> float:
        if self.jastrow is None or not self.jastrow.needs_norm:
            return 0.0
        if n not in self._jastrow_norms:
            self._jastrow_norms[n] = jastrow_log_norm(
                n, self.jastrow, self.geometry.length, self.n_max
            )
        return self._jastrow_norms[n]

    # sector admissibility ----------------------------------------------------

    def sector_allowed(self, n: int) -> bool:
        if n > self.n_max or n < 0:
            return False
        if self.parity is Parity.EVEN_ONLY and n % 2:
            return False
        return True

    def _valid_rows(self, x: np.ndarray) -> np.ndarray:
        """Hard-wall interior check per row; periodic rows are always valid."""
        if self.geometry.periodic or x.shape[1] == 0:
            return np.ones(x.shape[0], dtype=bool)
        L = self.geometry.length
        return ((x > 0.0) & (x < L)).all(axis=1)

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("expected a (batch, n) position array")
        if self.geometry.periodic and x.shape[1]:
            x = np.mod(x, self.geometry.length)
        return x

    # value -------------------------------------------------------------------

    def log_amp(self, params, x: np.ndarray) -> np.ndarray:
        """Batched ln phi_n for one sector; x has shape (B, n). -inf sentinels."""
        x = self._prepare(x)
        b, n = x.shape
        if not self.sector_allowed(n):
            return np.full(b, NEG_INF)
        valid = self._valid_rows(x)
        out = np.full(b, NEG_INF)
        if not valid.any():
            return out
        xv = x[valid]
        p1, p2, reg = self.split_params(params)
        L = self.geometry.length

        val = self._analytic_log(xv, reg)
        emb1 = _embed_batch(self._pos_kind, L, xv)
        val += self.f1.value(p1, emb1)
        val += self.f2.value(p2, self._pair_embeddings(xv))
        out[valid] = val
        return out

    def _pair_embeddings(self, x: np.ndarray) -> np.ndarray:
        b, n = x.shape
        if n < 2:
            return np.zeros((b, 0, 1))
        i_idx, j_idx, _, _ = _pair_indices(n)
        d = x[:, i_idx] - x[:, j_idx]
        return _embed_batch(self._sep_kind, self.geometry.length, d)

    def _analytic_log(self, x: np.ndarray, reg) -> np.ndarray:
        """All position-dependent analytic log-factors plus n-only terms."""
        b, n = x.shape
        L = self.geometry.length
        c1, c2, s = reg
        val = np.full(b, float(log_reg_factor(n, c1, c2, s)) - 0.5 * n * math.log(L))
        if self.cutoff_enabled and n:
            val += _log_cutoff_values(x, L).sum(axis=1) - 0.5 * n * math.log(L / 30.0)
        if self.jastrow is not None and n >= 2:
            i_idx, j_idx, _, _ = _pair_indices(n)
            d = x[:, i_idx] - x[:, j_idx]
            t, _, _ = self.jastrow.pair_jets(d, L)
            val += t.sum(axis=1)
        if self.jastrow is not None and self.jastrow.needs_norm:
            val -= 0.5 * self.jastrow_log_norm(n)
        return val

    # derivatives w.r.t. positions ---------------------------------------------

    def log_amp_derivs(self, params, x: np.ndarray):
        """(value, d/dx_i, sum_i d2/dx_i^2) for interior configurations.

        Raises on any excluded or boundary-contact row (derivatives of a zero
        amplitude are undefined).
        """
        x = self._prepare(x)
        b, n = x.shape
        if not self.sector_allowed(n):
            raise ValueError(f"sector n={n} has zero amplitude under this model")
        if not self._valid_rows(x).all():
            raise ValueError("boundary-contact configuration has zero amplitude")
        p1, p2, reg = self.split_params(params)
        L = self.geometry.length

        val = self._analytic_log(x, reg)
        grad = np.zeros((b, n))
        lap = np.zeros(b)

        if self.cutoff_enabled and n:
            _, dt, d2t = _log_cutoff_terms(x, L)
            grad += dt
            lap += d2t.sum(axis=1)

        if n >= 2:
            i_idx, j_idx, inc, inc_abs = _pair_indices(n)
            d = x[:, i_idx] - x[:, j_idx]
            if self.jastrow is not None:
                _, dt, d2t = self.jastrow.pair_jets(d, L)
                grad += dt @ inc.T
                lap += (d2t @ inc_abs.T).sum(axis=1)

        # position network
        if n:
            e, de, d2e = _embed_jet(self._pos_kind, L, x)
            flat = (b * n, 1, e.shape[-1])
            y, j1, j2 = self.f1.phi.jet(
                p1[: self.f1.phi.n_params],
                e.reshape(b * n, -1), de.reshape(flat), d2e.reshape(flat),
            )
            feats = y.reshape(b, n, -1)
            s1 = feats.sum(axis=1)
            r, dr, d2r = self.f1.rho.jet(
                p1[self.f1.phi.n_params:], s1,
                j1.reshape(b, n, -1), j2.reshape(b, n, -1),
            )
            val += r[:, 0]
            grad += dr[:, :, 0]
            lap += d2r[:, :, 0].sum(axis=1)
        else:
            val += self.f1.value(p1, np.zeros((b, 0, 2)))

        # separation network
        if n >= 2:
            e, de, d2e = _embed_jet(self._sep_kind, L, d)
            p = d.shape[1]
            flat = (b * p, 1, 1)
            y, j1, j2 = self.f2.phi.jet(
                p2[: self.f2.phi.n_params],
                e.reshape(b * p, -1), de.reshape(flat), d2e.reshape(flat),
            )
            feats = y.reshape(b, p, -1)
            s2 = feats.sum(axis=1)
            pj1 = j1.reshape(b, p, -1)
            pj2 = j2.reshape(b, p, -1)
            ds2 = np.einsum("bpf,kp->bkf", pj1, inc, optimize=True)
            d2s2 = np.einsum("bpf,kp->bkf", pj2, inc_abs, optimize=True)
            r, dr, d2r = self.f2.rho.jet(p2[self.f2.phi.n_params:], s2, ds2, d2s2)
            val += r[:, 0]
            grad += dr[:, :, 0]
            lap += d2r[:, :, 0].sum(axis=1)
        else:
            val += self.f2.value(p2, np.zeros((b, 0, 1)))

        return val, grad, lap

    # derivatives w.r.t. parameters ---------------------------------------------

    def _deepset_param_grad(self, ds: DeepSet, p, emb, cot):
        """Weighted deep-set parameter gradients.

        emb: (B, M, emb_dim); cot: (B, K) weights on the scalar output.
        Returns (ds.n_params, K).
        """
        b, m, _ = emb.shape
        p_phi, p_rho = ds.split(p)
        if m:
            feats = ds.phi.forward(p_phi, emb.reshape(b * m, -1)).reshape(b, m, -1)
            agg = feats.sum(axis=1)
        else:
            agg = np.zeros((b, ds.phi.output_dim))
        g_rho, in_cot = ds.rho.backprop(p_rho, agg, cot[:, :, None])
        if m:
            k = cot.shape[1]
            member_cot = np.broadcast_to(in_cot[:, None, :, :], (b, m, k, in_cot.shape[-1]))
            g_phi, _ = ds.phi.backprop(
                p_phi, emb.reshape(b * m, -1), member_cot.reshape(b * m, k, -1)
            )
        else:
            g_phi = np.zeros((ds.phi.n_params, cot.shape[1]))
        return np.concatenate([g_phi, g_rho], axis=0)

    def param_grad_weighted(self, params, x: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_s weights[s, k] * d ln phi(x_s)/d theta  -> (n_params, K)."""
        x = self._prepare(x)
        weights = np.asarray(weights, dtype=np.float64)
        b, n = x.shape
        if weights.shape[0] != b:
            raise ValueError("weights must have one row per sample")
        p1, p2, reg = self.split_params(params)
        L = self.geometry.length
        out = np.empty((self.n_params, weights.shape[1]))
        emb1 = _embed_batch(self._pos_kind, L, x) if n else np.zeros((b, 0, 2))
        k1 = self.f1.n_params
        out[:k1] = self._deepset_param_grad(self.f1, p1, emb1, weights)
        out[k1 : k1 + self.f2.n_params] = self._deepset_param_grad(
            self.f2, p2, self._pair_embeddings(x), weights
        )
        g_reg = reg_param_grads(n, *reg)  # (3,), constant across the sector
        out[self.reg_slice] = g_reg[:, None] * weights.sum(axis=0)[None, :]
        return out

    def param_grad(self, params, x: np.ndarray) -> np.ndarray:
        """Per-sample d ln phi / d theta -> (B, n_params)."""
        x = self._prepare(x)
        b, n = x.shape
        p1, p2, reg = self.split_params(params)
        L = self.geometry.length
        out = np.empty((b, self.n_params))

        for ds, p, emb, sl in (
            (self.f1, p1,
             _embed_batch(self._pos_kind, L, x) if n else np.zeros((b, 0, 2)),
             slice(0, self.f1.n_params)),
            (self.f2, p2, self._pair_embeddings(x),
             slice(self.f1.n_params, self.f1.n_params + self.f2.n_params)),
        ):
            bb, m, _ = emb.shape
            p_phi, p_rho = ds.split(p)
            if m:
                feats = ds.phi.forward(p_phi, emb.reshape(bb * m, -1)).reshape(bb, m, -1)
                agg = feats.sum(axis=1)
            else:
                agg = np.zeros((bb, ds.phi.output_dim))
            g_rho, in_cot = ds.rho.backprop_per_sample(p_rho, agg, np.ones((bb, 1)))
            if m:
                member_cot = np.broadcast_to(in_cot[:, None, :], (bb, m, in_cot.shape[-1]))
                g_phi, _ = ds.phi.backprop_per_sample(
                    p_phi, emb.reshape(bb * m, -1), member_cot.reshape(bb * m, -1)
                )
                g_phi = g_phi.reshape(bb, m, -1).sum(axis=1)
            else:
                g_phi = np.zeros((bb, ds.phi.n_params))
            out[:, sl] = np.concatenate([g_phi, g_rho], axis=1)

        out[:, self.reg_slice] = reg_param_grads(n, *reg)[None, :]
        return out


def build_model(geometry: Geometry, width: int = 32, depth: int = 2,
                feature_dim: int = 32, jastrow: Jastrow | None = None,
                cutoff_enabled: bool = False, parity: Parity = Parity.ALL,
                n_max: int = 20,
                reg_init: tuple[float, float, float] = (0.0, 12.0, 1.0)) -> NqfsModel:
    """Construct the ansatz with matched position/separation deep sets."""
    hidden = (width,) * depth
    f1 = DeepSet(phi=Mlp((2, *hidden, feature_dim)), rho=Mlp((feature_dim, *hidden, 1)))
    f2 = DeepSet(phi=Mlp((1, *hidden, feature_dim)), rho=Mlp((feature_dim, *hidden, 1)))
    return NqfsModel(geometry, f1, f2, jastrow, cutoff_enabled, parity, n_max, reg_init)


# -- spec-level scalar wrappers ------------------------------------------------


def log_amplitude(model: NqfsModel, params, config: Configuration) -> float:
    """ln phi_n of a single configuration (-inf for excluded sectors)."""
    return float(model.log_amp(params, config.positions.reshape(1, -1))[0])


def log_amplitude_derivatives(model: NqfsModel, params, config: Configuration):
    """(value, d/dx_i, laplacian, d/dtheta) of ln phi at one configuration."""
    x = config.positions.reshape(1, -1)
    val, grad, lap = model.log_amp_derivs(params, x)
    gp = model.param_grad(params, x)
    return float(val[0]), grad[0].copy(), float(lap[0]), gp[0].copy()

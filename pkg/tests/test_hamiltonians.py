import math

import numpy as np
import pytest

from conftest import ConstantSectorState, GaussianToy
from fockvmc.ansatz import (
    CalogeroSinJastrow,
    LiebLinigerJastrow,
    Parity,
    build_model,
)
from fockvmc.core import Boundary, Configuration, Geometry
from fockvmc.exact import cs_ground, cs_lambda
from fockvmc.hamiltonians import (
    CalogeroSutherland,
    LiebLiniger,
    RegularizedKleinGordon,
    kg_from_physical,
    kg_pair_term,
    local_energy,
    local_energy_batch,
)


def cs_exact_model(m=0.5, g=5.0, L=5.0, n_max=10):
    lam = cs_lambda(m, g)
    model = build_model(Geometry(L, Boundary.PERIODIC), width=4, depth=1, feature_dim=3,
                        jastrow=CalogeroSinJastrow(lam), n_max=n_max)
    params = model.init_params(0)
    params[model.net_slice] = 0.0
    return model, params


def separated_configs(rng, count, n, L, min_sep=1e-3):
    out = []
    while len(out) < count:
        x = np.sort(rng.uniform(0, L, size=n))
        gaps = np.diff(np.concatenate([x, [x[0] + L]]))
        if gaps.min() > min_sep * L:
            out.append(x)
    return np.array(out)


def test_cs_exact_eigenstate_constant_local_energy(rng):
    m, g, L, n = 0.5, 5.0, 5.0, 5
    lam = cs_lambda(m, g)
    mu = 3 * 5**2 * math.pi**2 * lam**2 / (6 * m * L**2)
    e0, n0, _ = cs_ground(m, mu, g, L)
    assert n0 == n
    model, params = cs_exact_model(m, g, L)
    spec = CalogeroSutherland(m=m, mu=mu, g=g)

    x = separated_configs(rng, 200, n, L)
    e_loc = local_energy_batch(spec, model, params, x)
    np.testing.assert_allclose(e_loc, e0, rtol=1e-6)
    assert e_loc.var() / e0**2 <= 1e-10


def test_cs_local_energy_varies_for_inexact_state(rng):
    # same Hamiltonian, tanh Jastrow instead of the exact one: not an eigenstate
    m, g, L = 0.5, 5.0, 5.0
    lam = cs_lambda(m, g)
    from fockvmc.ansatz import CalogeroTanhJastrow

    model = build_model(Geometry(L, Boundary.PERIODIC), width=4, depth=1, feature_dim=3,
                        jastrow=CalogeroTanhJastrow(lam), n_max=8)
    params = model.init_params(0)
    params[model.net_slice] = 0.0
    spec = CalogeroSutherland(m=m, mu=10.0, g=g)
    x = separated_configs(rng, 50, 4, L)
    e_loc = local_energy_batch(spec, model, params, x)
    assert e_loc.std() > 1e-3


def test_gaussian_toy_free_hamiltonian(rng):
    toy = GaussianToy()
    spec = LiebLiniger(m=0.5, mu=0.0, g=0.0)
    x = rng.normal(size=(30, 4))
    e_loc = local_energy_batch(spec, toy, None, x)
    np.testing.assert_allclose(e_loc, (1.0 - x**2).sum(axis=1), rtol=1e-12)


def test_vacuum_local_energy_is_zero():
    toy = GaussianToy()
    spec = LiebLiniger(m=0.5, mu=7.0, g=0.0)
    assert local_energy(spec, toy, None, Configuration([])) == 0.0


def test_ll_requires_matching_cusp():
    model = build_model(Geometry(1.0, Boundary.HARD_WALL), width=4, depth=1,
                        feature_dim=3, jastrow=None, cutoff_enabled=True, n_max=6)
    params = model.init_params(1)
    spec = LiebLiniger(m=0.5, mu=0.0, g=10.0)
    with pytest.raises(ValueError, match="Jastrow"):
        local_energy_batch(spec, model, params, np.array([[0.2, 0.4]]))

    mismatched = build_model(Geometry(1.0, Boundary.HARD_WALL), width=4, depth=1,
                             feature_dim=3, jastrow=LiebLinigerJastrow(0.5, 5.0),
                             cutoff_enabled=True, n_max=6)
    with pytest.raises(ValueError, match="does not match"):
        local_energy_batch(spec, mismatched, mismatched.init_params(1),
                           np.array([[0.2, 0.4]]))


def test_cs_coincident_particles_error():
    model, params = cs_exact_model()
    spec = CalogeroSutherland(m=0.5, mu=0.0, g=5.0)
    x = np.array([[1.0, 1.0 + 1e-14, 3.0, 4.0, 4.5]])
    with pytest.raises(ValueError, match="singular|coincident"):
        local_energy_batch(spec, model, params, x)


def test_kato_boundedness_of_ll_kinetic_term():
    # combined kinetic local term stays bounded as two particles approach,
    # while its pieces diverge
    m, g = 0.5, 1e4
    model = build_model(Geometry(1.0, Boundary.HARD_WALL), width=5, depth=2,
                        feature_dim=4, jastrow=LiebLinigerJastrow(m, g),
                        cutoff_enabled=True, n_max=6)
    params = model.init_params(3)
    base = np.array([0.31, 0.62])
    vals = []
    for sep in [1e-3, 1e-4, 1e-5]:
        x = np.array([[base[0], base[0] + sep, base[1]]])
        _, grad, lap = model.log_amp_derivs(params, x)
        kinetic = -(0.5 / m) * (lap[0] + (grad[0] ** 2).sum())
        vals.append(kinetic)
        # individual pieces diverge like 1/(sep + 1/mg)^2
        assert abs(lap[0]) > 0.1 / (sep + 1 / (m * g)) ** 2
    assert abs(vals[1] - vals[2]) / abs(vals[2]) < 0.01


# -- Klein-Gordon pieces ----------------------------------------------------------


def test_kg_from_physical():
    assert kg_from_physical(2.0, 2.0) == (4.0, 0.0)
    v, lam = kg_from_physical(0.0, 3.0)
    assert (v, lam) == (4.5, -2.25)
    assert lam / v == pytest.approx(-0.5)
    assert kg_from_physical(2.0, 4.0) == (10.0, -3.0)
    with pytest.raises(ValueError):
        kg_from_physical(1.0, 0.0)


def test_kg_spec_validation():
    with pytest.raises(ValueError):
        RegularizedKleinGordon(v=6.0, lam=-3.5)
    with pytest.raises(ValueError):
        RegularizedKleinGordon(v=-1.0, lam=0.0)
    RegularizedKleinGordon(v=6.0, lam=-3.0)  # critical point allowed


def test_kg_pair_term_zero_cases():
    toy = ConstantSectorState([1.0, 0.0, 0.5], L=1.0)
    assert kg_pair_term(toy, None, Configuration([]), lam=0.0) == 0.0
    # n + 2 beyond the table: contributes zero
    assert kg_pair_term(toy, None, Configuration([0.3, 0.5]), lam=-1.0) == 0.0


def test_kg_pair_term_constant_state():
    c = 0.7
    toy = ConstantSectorState([1.0, c, c**2, c**3, c**4], L=1.0)
    for n in [0, 2]:
        cfg = Configuration([0.2, 0.6][:n])
        term = kg_pair_term(toy, None, cfg, lam=-1.3, quad_points=16)
        expected = 2 * (-1.3) * math.sqrt((n + 1) * (n + 2)) * c**2
        assert term == pytest.approx(expected, rel=1e-12)


def test_kg_local_energy_constant_state():
    c = 0.4
    toy = ConstantSectorState([1.0, c, c**2, c**3, c**4], L=1.0)
    spec = RegularizedKleinGordon(v=6.0, lam=-1.8, quad_points=32)
    e0 = local_energy(spec, toy, None, Configuration([]))
    assert e0 == pytest.approx(2 * spec.lam * math.sqrt(2.0) * c**2, rel=1e-12)
    e2 = local_energy(spec, toy, None, Configuration([0.1, 0.9]))
    assert e2 == pytest.approx(2 * 6.0 + 2 * spec.lam * math.sqrt(12.0) * c**2, rel=1e-12)


def test_kg_pair_term_quadrature_convergence(rng):
    model = build_model(Geometry(1.0, Boundary.PERIODIC), width=6, depth=2,
                        feature_dim=5, parity=Parity.EVEN_ONLY, n_max=8)
    params = model.init_params(5)
    x = rng.uniform(0, 1, size=(4, 2))
    t64 = [kg_pair_term(model, params, Configuration(r), lam=-1.8, quad_points=64) for r in x]
    t128 = [kg_pair_term(model, params, Configuration(r), lam=-1.8, quad_points=128) for r in x]
    for a, b in zip(t64, t128):
        assert abs(a - b) <= 1e-3 * abs(b)


def test_kg_local_energy_even_parity_model(rng):
    model = build_model(Geometry(1.0, Boundary.PERIODIC), width=6, depth=2,
                        feature_dim=5, parity=Parity.EVEN_ONLY, n_max=8)
    params = model.init_params(6)
    spec = RegularizedKleinGordon(v=6.0, lam=-1.8, quad_points=32)
    e = local_energy_batch(spec, model, params, rng.uniform(0, 1, size=(5, 2)))
    assert np.all(np.isfinite(e))

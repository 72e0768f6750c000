import numpy as np
import pytest

from fockvmc.core import (
    Boundary,
    Configuration,
    Geometry,
    InsufficientDataError,
    binned_statistics,
    default_bin_size,
    wrap_position,
)


def test_geometry_rejects_nonpositive_length():
    with pytest.raises(ValueError):
        Geometry(length=0.0, boundary=Boundary.PERIODIC)
    with pytest.raises(ValueError):
        Geometry(length=-1.0, boundary=Boundary.HARD_WALL)


def test_wrap_position_periodic():
    geom = Geometry(length=1.0, boundary=Boundary.PERIODIC)
    assert wrap_position(1.3, geom) == pytest.approx(0.3)
    assert wrap_position(-0.2, geom) == pytest.approx(0.8)
    assert 0.0 <= wrap_position(5.0, geom) < 1.0


def test_wrap_position_hard_wall_identity():
    geom = Geometry(length=1.0, boundary=Boundary.HARD_WALL)
    assert wrap_position(0.4, geom) == 0.4
    # out-of-range values pass through unchanged; callers reject them
    assert wrap_position(1.7, geom) == 1.7


def test_configuration_vacuum_and_count():
    vac = Configuration(np.empty(0))
    assert vac.n == 0
    cfg = Configuration(np.array([0.1, 0.9, 0.4]))
    assert cfg.n == 3
    cfg.validate(Geometry(1.0, Boundary.HARD_WALL))
    with pytest.raises(ValueError):
        Configuration(np.array([1.5])).validate(Geometry(1.0, Boundary.HARD_WALL))


def test_binning_constant_data():
    chains = [np.full(200, 3.25), np.full(200, 3.25)]
    res = binned_statistics(chains, bin_size=10)
    assert res.mean == pytest.approx(3.25)
    assert res.std_err == 0.0
    assert res.n_bins == 40
    assert res.n_samples == 400


def test_binning_alternating_signs():
    chain = np.tile([1.0, -1.0], 500)
    res = binned_statistics([chain], bin_size=20)
    assert res.mean == pytest.approx(0.0)
    assert res.std_err == pytest.approx(0.0)


def test_binning_iid_noise_matches_clt():
    rng = np.random.default_rng(7)
    n = 10_000
    chains = [rng.normal(size=n), rng.normal(size=n)]
    res = binned_statistics(chains, bin_size=100)
    expected = 1.0 / np.sqrt(2 * n)
    assert expected / 1.5 < res.std_err < expected * 1.5


def test_binning_drops_partial_bins():
    res = binned_statistics([np.arange(25, dtype=float)], bin_size=10)
    # third, partial bin (20..24) dropped
    assert res.n_samples == 20
    assert res.mean == pytest.approx(np.arange(20).mean())


def test_binning_insufficient_data():
    with pytest.raises(InsufficientDataError):
        binned_statistics([np.ones(15)], bin_size=10)
    with pytest.raises(InsufficientDataError):
        binned_statistics([np.empty(0)])


def test_binning_doubling_bin_size_stable_on_iid_data():
    rng = np.random.default_rng(123)
    ratios = []
    for _ in range(60):
        chain = rng.normal(size=4000)
        a = binned_statistics([chain], bin_size=20).std_err
        b = binned_statistics([chain], bin_size=40).std_err
        ratios.append(b / a)
    assert abs(np.mean(ratios) - 1.0) < 0.10


def test_default_bin_size():
    assert default_bin_size(400) == 20
    assert default_bin_size(50) == 10

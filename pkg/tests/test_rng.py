import numpy as np
import pytest

from fefet_imc.errors import ConfigError
from fefet_imc.rng import derive_seed, gaussian_for_cells, sample_vth


def test_zero_sigma_is_zero():
    assert sample_vth(7, (0, 0), 0.0).deviation == 0.0


def test_replay_is_identical():
    a = sample_vth(7, (0, 0), 0.040)
    b = sample_vth(7, (0, 0), 0.040)
    assert a.deviation == b.deviation
    assert a.deviation != 0.0


def test_distinct_cells_and_seeds_differ():
    base = sample_vth(7, (3, 4), 0.040).deviation
    assert sample_vth(7, (3, 5), 0.040).deviation != base
    assert sample_vth(7, (4, 4), 0.040).deviation != base
    assert sample_vth(8, (3, 4), 0.040).deviation != base


def test_grid_matches_scalar_path():
    grid = gaussian_for_cells(11, np.arange(4)[:, None], np.arange(3)[None, :], 0.02)
    assert grid.shape == (4, 3)
    for r in range(4):
        for c in range(3):
            assert grid[r, c] == sample_vth(11, (r, c), 0.02).deviation


def test_sample_std_of_1e5_draws():
    # std-of-std bound for n = 1e5 at sigma = 40 mV
    draws = gaussian_for_cells(3, np.arange(100_000), 0, 0.040)
    assert 0.0392 <= draws.std(ddof=1) <= 0.0408
    assert abs(draws.mean()) < 5e-4


def test_negative_sigma_rejected():
    with pytest.raises(ConfigError):
        sample_vth(1, (0, 0), -0.01)


def test_derive_seed_lineage():
    assert derive_seed(7, 0) == derive_seed(7, 0)
    assert derive_seed(7, 0) != derive_seed(7, 1)
    assert derive_seed(7, 0) != derive_seed(8, 0)

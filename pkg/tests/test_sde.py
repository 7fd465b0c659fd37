import math

import numpy as np
import pytest

from gexpect.errors import ConfigurationError, InputError
from gexpect.sde import (CoefficientField, TimeGrid, eval_coefficients, load_ensemble, save_ensemble, simulate_paths)


def test_time_grid_nodes_and_lookup():
    g = TimeGrid(1.0, 4)
    assert g.dt == 0.25
    assert g.index_of(0.75) == 3
    with pytest.raises(InputError):
        g.index_of(0.3)
    with pytest.raises(ConfigurationError):
        TimeGrid(1.0, 0)


def test_same_seed_identical_bytes_and_worker_independent():
    c = CoefficientField.standard()
    a = simulate_paths(c, 0.0, TimeGrid(1.0, 20), 10000, seed=3, workers=1)
    b = simulate_paths(c, 0.0, TimeGrid(1.0, 20), 10000, seed=3, workers=3)
    assert a.states.tobytes() == b.states.tobytes()
    d = simulate_paths(c, 0.0, TimeGrid(1.0, 20), 10000, seed=4)
    assert not np.array_equal(a.states, d.states)


def test_antithetic_pairs_mirror():
    e = simulate_paths(CoefficientField.standard(), 0.0, TimeGrid(1.0, 10), 100, seed=0, antithetic=True)
    assert np.array_equal(e.increments[0::2], -e.increments[1::2])
    with pytest.raises(ConfigurationError):
        simulate_paths(CoefficientField.standard(), 0.0, TimeGrid(1.0, 10), 101, seed=0, antithetic=True)


def test_brownian_moments():
    e = simulate_paths(CoefficientField.standard(2.0), 1.0, TimeGrid(1.0, 50), 100000, seed=1)
    xT = e.terminal[:, 0]
    # mean 1, variance 4
    assert abs(xT.mean() - 1.0) < 3 * 2.0 / math.sqrt(xT.size)
    assert abs(xT.var() - 4.0) < 0.06


def test_gbm_mean():
    r, s = 0.05, 0.2
    e = simulate_paths(CoefficientField.gbm(r, s), 1.0, TimeGrid(1.0, 200), 100000, seed=2)
    xT = e.terminal[:, 0]
    # Euler mean is (1 + r dt)^steps exactly in expectation
    expected = (1 + r / 200) ** 200
    assert abs(xT.mean() - expected) < 3 * xT.std() / math.sqrt(xT.size)


def test_window_freezes_outside_interval():
    e = simulate_paths(CoefficientField.brownian_window(2.0, 0.3, 0.6), 0.5, TimeGrid(1.0, 10), 50, seed=0)
    x = e.states[:, :, 0]
    dw = e.increments[:, :, 0]
    assert np.all(x[:, 3] == 0.5)
    assert np.allclose(x[:, -1], 0.5 + 2.0 * dw[:, 3:6].sum(axis=1))
    assert np.all(x[:, 6] == x[:, -1])


def test_coefficients_shapes():
    c = CoefficientField.standard(np.eye(2), n=2, d=2)
    b, s = eval_coefficients(c, 0.0, [1.0, 2.0])
    assert b.shape == (2,) and s.shape == (2, 2)
    with pytest.raises(InputError):
        eval_coefficients(c, 0.0, [1.0])


def test_from_dict_round_trip_and_errors():
    c = CoefficientField.gbm(0.05, 0.2)
    assert CoefficientField.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigurationError, match="model.sigma_typo"):
        CoefficientField.from_dict({"sigma_typo": 1.0})
    with pytest.raises(ConfigurationError):
        CoefficientField.from_dict({"diffusion": {"kind": "window", "t0": 0.5, "t1": 0.2}})


def test_save_load_round_trip(tmp_path):
    c = CoefficientField.standard()
    e = simulate_paths(c, 0.0, TimeGrid(0.5, 7), 33, seed=9)
    save_ensemble(e, tmp_path / "p.bin")
    f = load_ensemble(tmp_path / "p.bin", c.id)
    assert f.states.tobytes() == e.states.tobytes()
    assert f.increments.tobytes() == e.increments.tobytes()
    assert f.grid == e.grid and f.seed == 9

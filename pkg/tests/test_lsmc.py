import math

import numpy as np
import pytest
from scipy.stats import norm

from conftest import gaussian_expectation
from gexpect.claims import AbsValueClipped, Constant, Indicator, IdentityClipped, SmoothMonotone
from gexpect.errors import ConfigurationError, InputError
from gexpect.generators import GeneratorSpec
from gexpect.lsmc import RegressionBasis, lsmc_values, solve_bsde_lsmc, z_structure_probe
from gexpect.sde import CoefficientField, TimeGrid, simulate_paths

BM = CoefficientField.standard()
ABS = GeneratorSpec.abs(0.5)


@pytest.fixture(scope="module")
def paths():
    return simulate_paths(BM, 0.0, TimeGrid(1.0, 50), 40000, seed=11, antithetic=True)


def test_martingale_identity(paths):
    sol = solve_bsde_lsmc(paths, GeneratorSpec.zero(), IdentityClipped(6.0), coeff=BM)
    assert abs(sol.Y0) <= 3 * sol.stderr_Y0 + 1e-12
    # Z = 1 for the identity claim
    assert np.mean(sol.Z) == pytest.approx(1.0, abs=0.02)


def test_girsanov_and_worst_case(paths):
    v, se, basis = lsmc_values(paths, GeneratorSpec.linear(0.3), [Indicator(0.0)], coeff=BM)
    assert basis.kind == "hats"
    assert abs(v[0] - norm.cdf(0.3)) <= 3 * se[0] + 2e-3
    v, se, _ = lsmc_values(paths, ABS, [SmoothMonotone(), IdentityClipped(6.0)], coeff=BM)
    assert abs(v[0] - gaussian_expectation(np.tanh, mean=0.5)) <= 3 * se[0] + 2e-3
    assert abs(v[1] - 0.5) <= max(3 * se[1], 0.01)


def test_constant_claim_exact(paths):
    v, se, _ = lsmc_values(paths, ABS, [Constant(0.4)], coeff=BM)
    # sparse outer hats trigger the ridge, which perturbs constants at the 1e-8 level
    assert v[0] == pytest.approx(0.4, abs=1e-6) and se[0] < 1e-6


def test_stderr_tracks_seed_spread():
    vals, ses = [], []
    for seed in range(4):
        p = simulate_paths(BM, 0.0, TimeGrid(1.0, 20), 20000, seed=seed, antithetic=True)
        v, se, _ = lsmc_values(p, ABS, [SmoothMonotone()], coeff=BM)
        vals.append(v[0])
        ses.append(se[0])
    ref = gaussian_expectation(np.tanh, mean=0.5)
    assert max(abs(v - ref) for v in vals) <= 3 * max(ses) + 2e-3


def test_deterministic_given_paths(paths):
    a = solve_bsde_lsmc(paths, ABS, SmoothMonotone(), coeff=BM)
    b = solve_bsde_lsmc(paths, ABS, SmoothMonotone(), coeff=BM)
    assert a.Y0 == b.Y0 and a.stderr_Y0 == b.stderr_Y0


def test_z_structure_probe(paths):
    good = solve_bsde_lsmc(paths, ABS, SmoothMonotone(), coeff=BM)
    assert z_structure_probe(good, paths, BM).status == "pass"
    bad = solve_bsde_lsmc(paths, ABS, AbsValueClipped(6.0), coeff=BM)
    rep = z_structure_probe(bad, paths, BM)
    assert rep.status == "fail" and rep.fraction_negative > 0.2


def test_probe_inconclusive_when_sigma_vanishes():
    coeff = CoefficientField.brownian_window(1.0, 0.5, 0.6)
    p = simulate_paths(coeff, 0.0, TimeGrid(0.6, 60), 2000, seed=0)
    sol = solve_bsde_lsmc(p, ABS, SmoothMonotone(), coeff=coeff)
    assert z_structure_probe(sol, p, coeff).status == "inconclusive"


def test_wrong_ensemble_rejected(paths):
    with pytest.raises(InputError):
        solve_bsde_lsmc(paths, ABS, SmoothMonotone(), coeff=CoefficientField.standard(2.0))


def test_basis_validation_and_multi_dimensional():
    with pytest.raises(ConfigurationError):
        RegressionBasis("splines")
    coeff = CoefficientField.standard(np.eye(2), n=2, d=2)
    p = simulate_paths(coeff, 0.0, TimeGrid(1.0, 20), 20000, seed=1, antithetic=True)
    v, se, basis = lsmc_values(p, GeneratorSpec.abs(0.5, d=2), [SmoothMonotone()], coeff=coeff)
    # only the first coordinate enters the claim, so the drift is kappa along it
    assert basis.kind == "polynomial"
    assert abs(v[0] - gaussian_expectation(np.tanh, mean=0.5)) <= 3 * se[0] + 3e-3


def test_conditional_regression_recovers_heat_solution(paths):
    sol = solve_bsde_lsmc(paths, GeneratorSpec.zero(), SmoothMonotone(), coeff=BM)
    m = 25  # t = 0.5
    x = np.array([[-0.5], [0.0], [0.5]])
    ref = [gaussian_expectation(np.tanh, mean=xi, sd=math.sqrt(0.5)) for xi in x[:, 0]]
    assert sol.conditional(m, x) == pytest.approx(ref, abs=0.01)

import math

import numpy as np
import pytest
from scipy.stats import norm

from conftest import gaussian_expectation
from gexpect.claims import (AbsValueClipped, Constant, Indicator, IdentityClipped, MollifiedIndicator, SmoothMonotone,
                            TwoBump)
from gexpect.errors import ConfigurationError, UnsupportedConfiguration
from gexpect.generators import GeneratorSpec
from gexpect.pde import (SpaceTimeGrid, bracket_claims, certify, default_grid, extract_z_surface,
                         gradient_sign_check, pde_values, run_backward, solve_semilinear_pde)
from gexpect.sde import CoefficientField, TimeGrid

TIME = TimeGrid(1.0, 100)
BM = CoefficientField.standard()
ABS = GeneratorSpec.abs(0.5)


def value(g, claim, coeff=BM, x0=0.0, nx=801):
    grid = default_grid(coeff, g, x0, TIME, nx)
    res = pde_values(coeff, g, [claim], grid, x0)
    return float(res.value[0]), float(res.error[0])


def test_heat_equation_on_mollified_indicator():
    psi = MollifiedIndicator(0.0, 0.05, "lower")
    ref = gaussian_expectation(psi)
    v, _ = value(GeneratorSpec.zero(), psi)
    assert v == pytest.approx(ref, abs=2e-4)


def test_girsanov_capacity_inside_bracket():
    v, err = value(GeneratorSpec.linear(0.3), Indicator(0.0))
    assert abs(v - norm.cdf(0.3)) <= err
    assert err < 5e-3


def test_worst_case_drift_oracles():
    v, _ = value(ABS, IdentityClipped(6.0))
    assert v == pytest.approx(0.5, abs=1e-3)
    v, _ = value(ABS, SmoothMonotone())
    assert v == pytest.approx(gaussian_expectation(np.tanh, mean=0.5), abs=3e-4)
    # a decreasing claim picks the opposite drift
    v, _ = value(ABS, -1.0 * SmoothMonotone())
    assert v == pytest.approx(-gaussian_expectation(np.tanh, mean=-0.5), abs=3e-4)


def test_pos_part_one_sided_drift():
    g = GeneratorSpec.pos_part(0.5)
    v, _ = value(g, SmoothMonotone())
    assert v == pytest.approx(gaussian_expectation(np.tanh, mean=0.5), abs=3e-4)
    v, _ = value(g, -1.0 * SmoothMonotone())
    assert v == pytest.approx(0.0, abs=3e-4)


def test_smooth_nonhom_constant_z_solution():
    # Phi(x) = x gives Z = 1, so Y0 = g(1) T
    v, _ = value(GeneratorSpec.smooth_nonhom(1.0), IdentityClipped(6.0))
    assert v == pytest.approx(math.sqrt(2) - 1, abs=1e-3)


@pytest.mark.parametrize("g", [GeneratorSpec.zero(), GeneratorSpec.linear(0.3), ABS, GeneratorSpec.pos_part(0.5),
                               GeneratorSpec.smooth_nonhom(1.0),
                               GeneratorSpec.y_modulated(GeneratorSpec.abs(0.5), 1.0)])
def test_constants_preserved(g):
    v, err = value(g, Constant(0.7))
    assert v == pytest.approx(0.7, abs=1e-12) and err < 1e-12


def test_affine_coefficients_against_gbm_mean():
    coeff = CoefficientField.gbm(0.05, 0.2)
    v, _ = value(GeneratorSpec.zero(), IdentityClipped(6.0), coeff, x0=1.0)
    assert v == pytest.approx(math.exp(0.05), abs=1e-3)


def test_bracket_orders_and_contains():
    upper, lower = bracket_claims(TwoBump(), (-6, 6), 0.02)
    x = np.linspace(-6, 6, 20001)
    assert np.all(lower(x) <= TwoBump()(x) + 1e-15) and np.all(TwoBump()(x) <= upper(x) + 1e-15)
    grid = default_grid(BM, ABS, 0.0, TIME)
    res = pde_values(BM, ABS, [TwoBump()], grid, 0.0)
    assert res.half_width[0] > 0 and res.error[0] >= res.half_width[0]


def test_cfl_certificate():
    grid = default_grid(BM, ABS, 0.0, TIME)
    dt_adm, dt_used = grid.cfl[0]
    assert dt_used <= dt_adm
    too_few = SpaceTimeGrid(grid.x_min, grid.x_max, grid.nx, TIME, substeps=(1,) * 100)
    with pytest.raises(ConfigurationError, match="at least"):
        certify(too_few, BM, ABS)


def test_window_intervals_take_single_substep():
    coeff = CoefficientField.brownian_window(1.0, 0.5, 0.6)
    grid = default_grid(coeff, ABS, 0.0, TimeGrid(0.6, 60))
    assert grid.substeps[0] == 1 and grid.substeps[55] > 1


def test_two_dimensional_state_rejected():
    coeff = CoefficientField.standard(np.eye(2), n=2, d=2)
    grid = SpaceTimeGrid(-1, 1, 11, TIME)
    with pytest.raises(UnsupportedConfiguration):
        run_backward(coeff, ABS, np.zeros((1, 11)), grid)


def test_gradient_sign_pass_and_fail():
    grid = default_grid(BM, ABS, 0.0, TIME)
    ok = gradient_sign_check(solve_semilinear_pde(BM, ABS, SmoothMonotone(), grid, 0.0))
    assert ok.passed and ok.min_gradient >= -1e-6
    bad = gradient_sign_check(solve_semilinear_pde(BM, ABS, AbsValueClipped(6.0), grid, 0.0))
    assert not bad.passed
    assert grid.x[bad.location[1]] < 0


def test_z_surface_unit_slope_for_identity():
    grid = default_grid(BM, ABS, 0.0, TIME)
    surf = solve_semilinear_pde(BM, ABS, IdentityClipped(6.0), grid, 0.0)
    z = extract_z_surface(surf, BM)
    inner = np.abs(grid.x) < 2
    assert np.allclose(z[:50, inner], 1.0, atol=2e-3)


def test_surface_value_matches_batch_and_csv(tmp_path):
    grid = default_grid(BM, ABS, 0.0, TIME, nx=201)
    surf = solve_semilinear_pde(BM, ABS, Indicator(0.0), grid, 0.0)
    res = pde_values(BM, ABS, [Indicator(0.0)], grid, 0.0, richardson=False)
    assert surf.value == pytest.approx(res.value[0], abs=1e-12)
    assert surf.half_width == pytest.approx(res.half_width[0], abs=1e-12)
    surf.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1] == "t,x,u,du" and len(lines) == 2 + 101 * 201

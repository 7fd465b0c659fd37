import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from conftest import gaussian_expectation
from gexpect.choquet import (ThresholdQuadrature, choquet_integral, comonotonic_additivity_test, comonotonic_check,
                             integrate_curve, property_checks, truncation_convergence)
from gexpect.claims import (AbsValueClipped, Identity, IdentityClipped, Indicator, SmoothMonotone, Step, TwoBump,
                            make_step_approximation, Affine)
from gexpect.errors import ConfigurationError, DomainError, PreconditionError
from gexpect.expectation import g_expectation
from gexpect.generators import GeneratorSpec

ABS = GeneratorSpec.abs(0.5)
LINEAR = GeneratorSpec.linear(0.3)


def test_quadrature_rules():
    q = ThresholdQuadrature.for_claim(SmoothMonotone(), 4)
    assert q.rule == "uniform" and q.thresholds == pytest.approx([-0.75, -0.25, 0.25, 0.75])
    q = ThresholdQuadrature.for_claim(TwoBump())
    assert q.rule == "adapted" and q.edges == pytest.approx([0, 0.5, 1]) and q.K == 2
    with pytest.raises(DomainError, match="clip"):
        ThresholdQuadrature.for_claim(Identity())
    with pytest.raises(ConfigurationError):
        ThresholdQuadrature.for_claim(SmoothMonotone(), rule="adapted")


@given(lo=st.floats(-3, 3), width=st.floats(0.1, 4), p=st.floats(0, 1))
def test_integrate_curve_on_two_point_law(lo, width, p):
    # X = hi with probability p else lo: V = p on (lo, hi], C = lo + p (hi - lo)
    hi = lo + width
    q = ThresholdQuadrature(lo, hi, 30)
    value, neg, pos, _ = integrate_curve(q, np.full(30, p), np.zeros(30))
    assert value == pytest.approx(lo + p * width, abs=1e-12)
    assert neg + pos == pytest.approx(value, abs=1e-12)
    assert neg <= 1e-12 and pos >= -1e-12


def test_linear_driver_is_an_expectation(bm):
    # Girsanov: both sides equal E[Phi(W + mu)] for any claim
    oracle = (norm.cdf(0.5 - 0.3) - norm.cdf(-0.3)) + 0.5 * norm.sf(1.5 - 0.3)
    c = choquet_integral(LINEAR, TwoBump(), bm)
    e = g_expectation(LINEAR, TwoBump(), bm)
    assert abs(c.value - oracle) <= c.quadrature_error
    assert abs(e.value - oracle) <= e.error_estimate


def test_worst_case_identity(bm):
    c = choquet_integral(ABS, IdentityClipped(6.0), bm)
    assert abs(c.value - 0.5) <= c.quadrature_error
    assert c.capacity_curve.shape == (201, 3)
    # negative part -int_{-6}^0 (1 - N(k - t)) dt
    neg = -gaussian_expectation(lambda x: max(-x, 0.0), mean=0.5)
    assert abs(c.negative_part - neg) <= c.quadrature_error


def test_heat_abs_value(bm):
    c = choquet_integral(GeneratorSpec.zero(), AbsValueClipped(6.0), bm)
    assert abs(c.value - math.sqrt(2 / math.pi)) <= c.quadrature_error


def test_single_indicator_equals_capacity(bm):
    for g in (ABS, GeneratorSpec.smooth_nonhom(1.0)):
        c = choquet_integral(g, Indicator(0.3), bm)
        e = g_expectation(g, Indicator(0.3), bm)
        assert c.value == pytest.approx(e.value, abs=1e-12)


def test_comonotonic_check():
    assert comonotonic_check(SmoothMonotone(), IdentityClipped(6))
    assert comonotonic_check(Indicator(0.0), Indicator(0.5))
    assert not comonotonic_check(SmoothMonotone(), AbsValueClipped(6))
    with pytest.raises(PreconditionError):
        comonotonic_additivity_test(ABS, SmoothMonotone(), -1.0 * SmoothMonotone(), None)


def test_property_checks_abs(bm):
    checks = property_checks(ABS, bm, K=51)
    names = [c.name for c in checks]
    assert names[0] == "monotonicity" and names[-1] == "comonotonic_additivity"
    assert all(c.passed for c in checks), [c.to_dict() for c in checks if not c.passed]


def test_comonotonic_additivity_on_step_sums(bm):
    phi = make_step_approximation(Affine(SmoothMonotone(), 0.5, 0.5), 4, 1.0)
    chk = comonotonic_additivity_test(ABS, phi, Step((1.0,), (0.25,)), bm)
    assert chk.passed


def test_truncation_against_closed_form(bm):
    rep = truncation_convergence(ABS, Identity(), (2, 3, 4, 5), bm)
    # for abs and a nondecreasing claim C_N = E[clip_N(W + kappa)]
    ref6 = gaussian_expectation(lambda x: min(max(x, -6), 6), mean=0.5)
    for N, err, bar in zip(rep.levels, rep.errors, rep.error_bars):
        oracle = abs(gaussian_expectation(lambda x: min(max(x, -N), N), mean=0.5) - ref6)
        assert abs(err - oracle) <= bar + 1e-4
    assert rep.nonincreasing
    with pytest.raises(ConfigurationError):
        truncation_convergence(ABS, Identity(), (3, 2), bm)

import math

import numpy as np
import pytest
from numpy.polynomial.hermite import hermval
from scipy.integrate import quad

from loctime.errors import ConfigError
from loctime.testfunctions import (TestFunction, VectorTestFunction,
                                   gaussian_bump, hermite_bundle,
                                   hermite_function, linear_combination,
                                   zero_bundle, zero_function)


def hermite_reference(n, x):
    """(2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2} via numpy's hermval."""
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    norm = 1.0 / math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi))
    return norm * hermval(x, coeffs) * np.exp(-0.5 * x ** 2)


@pytest.mark.parametrize("n", [0, 1, 2, 4, 7])
def test_hermite_matches_polynomial_route(n):
    x = np.linspace(-4.0, 4.0, 17)
    f = hermite_function(n)
    np.testing.assert_allclose(f(x), hermite_reference(n, x),
                               rtol=1e-12, atol=1e-13)


def test_hermite_l2_norm_is_one():
    for n in (0, 3, 6):
        f = hermite_function(n)
        assert f.l2_norm == 1.0
        val, _ = quad(lambda x: f(x) ** 2, -f.support_radius,
                      f.support_radius)
        assert abs(val - 1.0) < 1e-9


def test_hermite_orthogonality():
    f2, f4 = hermite_function(2), hermite_function(4)
    val, _ = quad(lambda x: f2(x) * f4(x), -20.0, 20.0, limit=100)
    assert abs(val) < 1e-9


@pytest.mark.parametrize("n", [1, 3, 5])
def test_hermite_derivative_matches_finite_differences(n):
    f = hermite_function(n)
    x = np.array([-2.3, -0.7, 0.0, 0.4, 1.9])
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2.0 * h)
    np.testing.assert_allclose(f.deriv(x), fd, rtol=1e-8, atol=1e-8)


def test_hermite_shift_translates_graph():
    f = hermite_function(2, shift=0.6)
    g = hermite_function(2)
    x = np.linspace(-2.0, 2.0, 9)
    np.testing.assert_allclose(f(x), g(x - 0.6), rtol=1e-13)


def test_hermite_negative_index_rejected():
    with pytest.raises(ConfigError):
        hermite_function(-1)


def test_gaussian_bump_norms_are_closed_form():
    f = gaussian_bump(0.7, 0.2, 0.5)
    assert f.sup_norm == 0.7
    assert abs(f.sup_deriv_norm - 0.7 * math.exp(-0.5) / 0.5) < 1e-15
    assert abs(f.l2_norm - 0.7 * math.sqrt(0.5 * math.sqrt(math.pi))) < 1e-15
    # peak location and value
    assert abs(f(0.2) - 0.7) < 1e-15
    assert f.deriv(np.array([0.2]))[0] == 0.0


def test_gaussian_bump_rejects_bad_width():
    with pytest.raises(ConfigError):
        gaussian_bump(1.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        gaussian_bump(1.0, 0.0, -2.0)


def test_gaussian_zero_amplitude_collapses_to_zero():
    f = gaussian_bump(0.0, 0.3, 0.4)
    assert f.is_zero
    assert f.triple_norm == 0.0


def test_scaled_norms_and_values():
    f = gaussian_bump(0.5, 0.0, 1.0)
    g = f.scaled(-2.0)
    x = np.linspace(-1.0, 1.0, 5)
    np.testing.assert_allclose(g(x), -2.0 * f(x), rtol=1e-15)
    assert abs(g.triple_norm - 2.0 * f.triple_norm) < 1e-14
    assert f.scaled(0.0).is_zero


def test_linear_combination_pointwise_and_cancellation():
    f0 = hermite_function(0)
    f1 = hermite_function(1)
    combo = linear_combination([2.0, -0.5], [f0, f1])
    x = np.linspace(-3.0, 3.0, 11)
    np.testing.assert_allclose(combo(x), 2.0 * f0(x) - 0.5 * f1(x),
                               rtol=1e-12, atol=1e-14)
    cancel = linear_combination([1.0, -1.0], [f0, f0])
    assert np.max(np.abs(cancel(x))) < 1e-15
    assert linear_combination([0.0], [f0]).is_zero
    with pytest.raises(ConfigError):
        linear_combination([1.0, 2.0], [f0])


def test_zero_function_and_bundle():
    z = zero_function()
    assert z.is_zero and z.triple_norm == 0.0
    assert np.all(z(np.linspace(-1, 1, 5)) == 0.0)
    zb = zero_bundle(3)
    assert zb.d == 3 and zb.is_zero and zb.norm == 0.0


def test_vector_bundle_norm_aggregation():
    comps = (gaussian_bump(0.3, 0.0, 0.5), hermite_function(1).scaled(0.2))
    vf = VectorTestFunction(comps)
    expect = math.sqrt(sum(f.triple_norm ** 2 for f in comps))
    assert abs(vf.norm - expect) < 1e-15
    assert vf.d == 2
    assert vf.support_radius == max(f.support_radius for f in comps)
    assert [f.label for f in vf] == [comps[0].label, comps[1].label]
    assert vf[1] is comps[1]
    half = vf.scaled(0.5)
    assert abs(half.norm - 0.5 * vf.norm) < 1e-15


def test_vector_bundle_requires_components():
    with pytest.raises(ConfigError):
        VectorTestFunction(())


def test_hermite_bundle_indices():
    hb = hermite_bundle((0, 2))
    assert hb.d == 2
    x = np.array([0.0])
    assert abs(hb[0](x)[0] - math.pi ** -0.25) < 1e-14
    np.testing.assert_allclose(hb[1](x), hermite_reference(2, x), rtol=1e-12)

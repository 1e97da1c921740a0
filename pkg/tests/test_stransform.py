import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.special import erf

from loctime.errors import AdmissibilityError, ConfigError
from loctime.fracops import PairingTable
from loctime.quadrature import triangle_power_moment
from loctime.stransform import (DeltaSpec, exp_truncated, is_admissible,
                                minimal_truncation_level, s_char_exp, s_delta,
                                s_delta_regularized, s_delta_truncated,
                                s_local_time, u_estimate_check)
from loctime.testfunctions import (VectorTestFunction, gaussian_bump,
                                   zero_bundle, zero_function)

TWO_PI = 2.0 * math.pi


def bump():
    return gaussian_bump(0.5, 0.45, 0.2)


class TestAdmissibility:
    def test_known_cases(self):
        assert is_admissible(0.5, 1, 0)
        assert not is_admissible(0.5, 2, 0)
        assert is_admissible(0.5, 2, 1)
        assert is_admissible(0.75, 1, 0)
        assert not is_admissible(0.75, 2, 0)
        assert not is_admissible(0.75, 2, 1)
        assert is_admissible(0.75, 2, 2)

    def test_minimal_levels(self):
        assert minimal_truncation_level(0.3, 1) == 0
        assert minimal_truncation_level(0.5, 1) == 0
        assert minimal_truncation_level(0.5, 2) == 1
        assert minimal_truncation_level(0.75, 2) == 2
        assert minimal_truncation_level(0.9, 3) == 9

    @pytest.mark.parametrize("h", [0.05, 0.2, 0.35, 0.5, 0.6, 0.75, 0.95])
    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_minimal_level_is_minimal(self, h, d):
        n = minimal_truncation_level(h, d)
        assert is_admissible(h, d, n)
        if n > 0:
            assert not is_admissible(h, d, n - 1)

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            DeltaSpec(0.5, 0)
        with pytest.raises(ConfigError):
            DeltaSpec(0.5, 1, -1)
        with pytest.raises(ConfigError):
            DeltaSpec(0.5, 1, 0, -0.1)
        with pytest.raises(ConfigError):
            DeltaSpec(1.2, 1)

    def test_singular_exponent(self):
        assert DeltaSpec(0.5, 1).singular_exponent == 0.5
        assert DeltaSpec(0.5, 2, 1).singular_exponent == 0.0
        spec = DeltaSpec(0.75, 2, 2)
        assert abs(spec.singular_exponent - 0.5) < 1e-15

    def test_require_admissible(self):
        with pytest.raises(AdmissibilityError) as exc:
            DeltaSpec(0.5, 2, 0).require_admissible()
        assert exc.value.minimal_n == 1
        # regularization lifts the requirement
        DeltaSpec(0.5, 2, 0, eps=0.1).require_admissible()


class TestExpTruncated:
    def test_order_zero_is_exp(self):
        x = np.linspace(-5.0, 5.0, 11)
        assert np.allclose(exp_truncated(x, 0), np.exp(x), rtol=1e-14)

    def test_order_one_is_expm1(self):
        x = np.linspace(-30.0, 30.0, 13)
        got = exp_truncated(x, 1)
        assert np.allclose(got, np.expm1(x), rtol=1e-11)

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_peeling_one_term(self, n):
        # exp_n(x) - exp_{n+1}(x) = x^n / n!, whatever the sign of x
        for x in (-40.0, -3.0, -0.01, 0.7, 25.0):
            a = exp_truncated(x, n)
            b = exp_truncated(x, n + 1)
            want = x ** n / math.factorial(n)
            # the achievable accuracy of the difference is set by the
            # size of the operands, not of the result
            scale = max(1.0, abs(want), abs(a), abs(b))
            assert abs((a - b) - want) < 1e-11 * scale

    def test_zero_argument(self):
        assert exp_truncated(0.0, 1) == 0.0
        assert exp_truncated(0.0, 4) == 0.0
        assert np.all(exp_truncated(np.zeros(3), 2) == 0.0)

    def test_sign_for_negative_argument(self):
        # exp_n(x) has the sign of x^n
        assert exp_truncated(-5.0, 2) > 0.0
        assert exp_truncated(-5.0, 3) < 0.0

    def test_small_argument_leading_term(self):
        # exp_n(-y) ~ (-y)^n / n! as y -> 0
        y = 1e-8
        for n in (1, 2, 3):
            ratio = exp_truncated(-y, n) * math.factorial(n) / (-y) ** n
            assert abs(ratio - 1.0) < 1e-6

    def test_negative_order_rejected(self):
        with pytest.raises(ConfigError):
            exp_truncated(1.0, -1)

    def test_scalar_in_float_out(self):
        assert isinstance(exp_truncated(0.3, 2), float)


class TestCharacteristicTransform:
    def test_brownian_zero_function(self):
        got = s_char_exp(0.5, [0.7], 0.2, 0.9, zero_bundle(1))
        want = math.exp(-0.5 * 0.49 * 0.7)
        assert abs(got - want) < 1e-12
        assert abs(got.imag) == 0.0

    def test_phase_at_half_is_plain_integral(self):
        f = bump()
        lam = 1.3
        s, t = 0.2, 0.9
        v, _ = quad(f.eval, s, t, epsabs=1e-13)
        mag = math.exp(-0.5 * lam * lam * (t - s))
        want = mag * complex(math.cos(lam * v), math.sin(lam * v))
        got = s_char_exp(0.5, [lam], s, t, f)
        assert abs(got - want) < 1e-10

    @pytest.mark.parametrize("h", [0.3, 0.5, 0.8])
    def test_modulus_bounded_by_one(self, h):
        f = bump()
        for lam in ([0.5], [2.0], [-3.0]):
            assert abs(s_char_exp(h, lam, 0.1, 0.6, f)) <= 1.0

    def test_time_reversal_conjugates(self):
        f = bump()
        fwd = s_char_exp(0.65, [1.1], 0.2, 0.8, f)
        bwd = s_char_exp(0.65, [1.1], 0.8, 0.2, f)
        assert abs(fwd - bwd.conjugate()) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            s_char_exp(0.5, [1.0, 2.0], 0.1, 0.5, bump())
        with pytest.raises(ConfigError):
            s_char_exp(0.5, [1.0], 0.5, 0.5, bump())


class TestPointwiseTransforms:
    def test_bare_delta_formula(self):
        f = bump()
        h, t1, t2 = 0.5, 0.3, 0.8
        tau = t2 - t1
        v, _ = quad(f.eval, t1, t2, epsabs=1e-13)
        want = ((TWO_PI) ** -0.5 * tau ** -0.5
                * math.exp(-0.5 * v * v / tau))
        got = s_delta(DeltaSpec(h, 1), t1, t2, f)
        assert abs(got - want) < 1e-10

    def test_degenerate_pair_rejected(self):
        with pytest.raises(ConfigError):
            s_delta(DeltaSpec(0.5, 1), 0.4, 0.4, bump())
        with pytest.raises(ConfigError):
            s_delta_truncated(DeltaSpec(0.5, 1, 1), 0.4, 0.4, bump())

    def test_truncation_removes_constant_term(self):
        # exp(-y) - exp_1(-y) = 1, so the bare and once-truncated
        # transforms differ by the deterministic (2 pi tau^{2H})^{-d/2}
        f = bump()
        spec0 = DeltaSpec(0.6, 1, 0)
        spec1 = DeltaSpec(0.6, 1, 1)
        t1, t2 = 0.25, 0.65
        tau = t2 - t1
        diff = (s_delta(spec0, t1, t2, f)
                - s_delta_truncated(spec1, t1, t2, f))
        want = TWO_PI ** -0.5 * tau ** (-0.6)
        assert abs(diff - want) < 1e-10

    def test_regularized_limits(self):
        f = bump()
        spec = DeltaSpec(0.5, 1, 0, eps=1e-12)
        bare = s_delta(DeltaSpec(0.5, 1), 0.3, 0.7, f)
        reg = s_delta_regularized(spec, 0.3, 0.7, f)
        assert abs(reg - bare) < 1e-9 * bare
        # eps = 0 falls through to the truncated form
        spec0 = DeltaSpec(0.5, 1, 0, eps=0.0)
        assert (s_delta_regularized(spec0, 0.3, 0.7, f)
                == s_delta_truncated(spec0, 0.3, 0.7, f))

    def test_regularized_coincident_times(self):
        f = bump()
        got = s_delta_regularized(DeltaSpec(0.5, 1, 0, eps=0.04), 0.4, 0.4, f)
        assert abs(got - (TWO_PI * 0.04) ** -0.5) < 1e-12
        # truncated at N >= 1: exp_N(0) = 0
        got1 = s_delta_regularized(DeltaSpec(0.5, 1, 1, eps=0.04), 0.4, 0.4, f)
        assert got1 == 0.0


class TestLocalTimeTransform:
    def test_inadmissible_raises(self):
        with pytest.raises(AdmissibilityError) as exc:
            s_local_time(DeltaSpec(0.5, 2, 0), zero_bundle(2))
        assert exc.value.minimal_n == 1

    def test_zero_function_closed_form(self):
        # f = 0 collapses to (2 pi)^{-d/2} int int tau^{-dH}
        for h, d in ((0.5, 1), (0.3, 1), (0.3, 3), (0.45, 2)):
            res = s_local_time(DeltaSpec(h, d), zero_bundle(d), tol=1e-11)
            want = TWO_PI ** (-0.5 * d) * triangle_power_moment(d * h)
            assert abs(res.value - want) < 1e-10
        assert s_local_time(DeltaSpec(0.5, 1), zero_bundle(1),
                            tol=1e-10).value == pytest.approx(
                                0.5319230405352436, abs=1e-12)

    def test_truncated_zero_function_vanishes(self):
        res = s_local_time(DeltaSpec(0.5, 2, 1), zero_bundle(2), tol=1e-10)
        assert res.value == 0.0

    def test_brownian_bump_against_dblquad(self):
        # independent oracle: tau = w^2 removes the singular factor, and
        # the pairing reduces to a difference of erf antiderivatives
        f = bump()
        amp, center, width = 0.5, 0.45, 0.2

        def F(x):
            return (amp * width * math.sqrt(math.pi / 2.0)
                    * erf((x - center) / (math.sqrt(2.0) * width)))

        def body(t1, w):
            dv = F(t1 + w * w) - F(t1)
            return (2.0 / math.sqrt(TWO_PI)
                    * math.exp(-0.5 * dv * dv / (w * w)) if w > 0.0
                    else 2.0 / math.sqrt(TWO_PI))

        want, err = dblquad(body, 0.0, 1.0, 0.0, lambda w: 1.0 - w * w,
                            epsabs=1e-11)
        got = s_local_time(DeltaSpec(0.5, 1), f, tol=1e-10)
        assert abs(got.value - want) < 1e-8 + 10.0 * err

    def test_regularized_zero_function_against_quad(self):
        frozen = {(0.5, 1, 0.1): 0.3445400149226766,
                  (0.5, 1, 0.01): 0.4596014210153303,
                  (0.5, 1, 0.001): 0.5074729784302722}
        for (h, d, eps), pinned in frozen.items():
            spec = DeltaSpec(h, d, 0, eps)
            res = s_local_time(spec, zero_bundle(d), tol=1e-11)
            want, err = quad(
                lambda tau: (1.0 - tau)
                * (TWO_PI * (eps + tau ** (2.0 * h))) ** (-0.5 * d),
                0.0, 1.0, epsabs=1e-12)
            assert abs(res.value - want) < 1e-9 + 10.0 * err
            assert res.value == pytest.approx(pinned, abs=1e-11)
        # a rough case with d = 2 against the same reduction
        spec = DeltaSpec(0.3, 2, 0, 0.05)
        res = s_local_time(spec, zero_bundle(2), tol=1e-11)
        want, err = quad(
            lambda tau: (1.0 - tau) / (TWO_PI * (0.05 + tau ** 0.6)),
            0.0, 1.0, epsabs=1e-12)
        assert abs(res.value - want) < 1e-9 + 10.0 * err

    def test_truncation_peels_deterministic_term(self):
        # SL_{N=0} - SL_{N=1} = (2 pi)^{-1/2} int int tau^{-H}, even for
        # a nonzero test function: the k = 0 chaos term is deterministic
        f = bump()
        sl0 = s_local_time(DeltaSpec(0.5, 1, 0), f, tol=1e-11).value
        sl1 = s_local_time(DeltaSpec(0.5, 1, 1), f, tol=1e-11).value
        want = TWO_PI ** -0.5 * triangle_power_moment(0.5)
        assert abs((sl0 - sl1) - want) < 1e-9

    def test_prebuilt_pairing_table_matches(self):
        f = bump()
        spec = DeltaSpec(0.6, 1, 0)
        table = PairingTable(spec.hurst, VectorTestFunction((f,)))
        a = s_local_time(spec, f, tol=1e-10)
        b = s_local_time(spec, f, tol=1e-10, pairing=table)
        assert a.value == b.value

    def test_error_estimate_within_tolerance(self):
        res = s_local_time(DeltaSpec(0.4, 1, 0), bump(), tol=1e-9)
        assert res.error_estimate <= 1e-9

    def test_bundle_dimension_checks(self):
        with pytest.raises(ConfigError):
            s_local_time(DeltaSpec(0.5, 2, 1), bump())
        with pytest.raises(ConfigError):
            s_local_time(DeltaSpec(0.5, 1, 0), zero_bundle(3))
        with pytest.raises(ConfigError):
            s_local_time(DeltaSpec(0.5, 1, 0), None)


class TestGrowthEnvelope:
    def test_envelope_holds_on_sample(self):
        rep = u_estimate_check(DeltaSpec(0.5, 1, 0), bump(),
                               [0.25, 0.5, 1.0, 2.0], tol=1e-9)
        assert rep.envelope_holds
        assert rep.violations == ()
        assert rep.k1 > 0.0 and rep.k2 > 0.0
        assert len(rep.s_values) == 4
        # the transform shrinks as z grows: exp of a negative quadratic
        assert rep.s_values[0] > rep.s_values[-1]

    def test_needs_two_samples(self):
        with pytest.raises(ConfigError):
            u_estimate_check(DeltaSpec(0.5, 1, 0), bump(), [1.0])

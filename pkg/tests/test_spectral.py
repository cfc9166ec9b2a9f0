import math
import time

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udw_battery.errors import (
    InvalidParameterError,
    InvalidRegulatorError,
    RegularizationError,
    UnsupportedBranchError,
)
from udw_battery.spectral import (
    PhysParams,
    fourier_response_numeric,
    lamb_shift,
    lamb_shift_regularized_sum,
    re_digamma_one_plus_iy,
    response,
    wightman,
)

# Frozen from 30-digit mpmath evaluations of the closed forms.
FROZEN = {
    (1.0, 1.0): dict(g_pos=0.15945271189978371, g_neg=2.9776880788837904e-4,
                     g_plus=0.15975048070767209, p2=1.8639618896250279e-3, k=-0.1361485138046369),
    (1.0, 2.0): dict(g_pos=0.31831099624321032, g_neg=1.1100594196460298e-6,
                     g_plus=0.31831210630262996, p2=3.4873301946946974e-6, k=-0.52354973017274209),
    (2.0, 1.0): dict(g_pos=0.16634328835875779, g_neg=7.1883452668624573e-3,
                     g_plus=0.17353163362562025, p2=4.1423832166362827e-2, k=-0.050322038772833516),
}

GRID3 = [(a, w) for a in (0.5, 1.0, 2.0) for w in (0.5, 1.0, 2.0)]

positive = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)


class TestPhysParams:
    def test_coerces_to_float(self):
        p = PhysParams(1, 2, 3)
        assert (p.a, p.omega, p.mu) == (1.0, 2.0, 3.0)
        assert all(type(v) is float for v in (p.a, p.omega, p.mu))

    @pytest.mark.parametrize("kwargs", [
        dict(a=1.0, omega=0.0), dict(a=1.0, omega=-1.0), dict(a=-0.1, omega=1.0),
        dict(a=1.0, omega=1.0, mu=-1.0), dict(a=math.nan, omega=1.0), dict(a=1.0, omega=math.inf),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidParameterError):
            PhysParams(**kwargs)

    def test_rejects_bool(self):
        with pytest.raises(InvalidParameterError):
            PhysParams(True, 1.0)


class TestWightman:
    def test_coincident_point_value(self):
        value = wightman(PhysParams(1.0, 1.0), 0.0, 0.1)
        expected = 1.0 / (16 * math.pi**2 * math.sin(0.1) ** 2)
        assert value.imag == pytest.approx(0.0, abs=1e-15)
        assert value.real == pytest.approx(expected, rel=1e-14)
        assert value.real == pytest.approx(0.6353724841836750, rel=1e-12)

    @given(s=st.floats(min_value=-50, max_value=50), eps=st.floats(min_value=1e-4, max_value=1.0))
    def test_conjugation_symmetry(self, s, eps):
        p = PhysParams(1.0, 1.0)
        assert wightman(p, -s, eps) == pytest.approx(np.conj(wightman(p, s, eps)), rel=1e-12, abs=1e-300)

    def test_against_high_precision(self):
        mp.mp.dps = 30
        ref = -mp.mpf(4) / (16 * mp.pi**2) / mp.sinh(mp.mpf(1) - mp.mpc(0, "1e-3")) ** 2
        value = wightman(PhysParams(2.0, 1.0), 1.0, 1e-3)
        assert abs(value - complex(ref)) / abs(complex(ref)) < 1e-12

    def test_array_input_and_far_tail(self):
        p = PhysParams(1.0, 1.0)
        s = np.array([0.0, 10.0, 200.0, 2000.0])
        w = wightman(p, s, 0.01)
        assert w.shape == (4,)
        assert np.all(np.isfinite(w))
        # Far tail decays like -a^2/(4 pi^2) e^{-a|s|}.
        assert w[2].real == pytest.approx(-math.exp(-200.0) / (4 * math.pi**2), rel=1e-6)

    @pytest.mark.parametrize("eps", [0.0, -1e-3])
    def test_rejects_non_positive_regulator(self, eps):
        with pytest.raises(InvalidRegulatorError):
            wightman(PhysParams(1.0, 1.0), 0.5, eps)

    def test_inertial_branch_unsupported(self):
        with pytest.raises(UnsupportedBranchError):
            wightman(PhysParams(0.0, 1.0), 0.5, 0.1)


class TestResponse:
    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen_values(self, key):
        s = response(PhysParams(*key))
        ref = FROZEN[key]
        assert s.g_pos == pytest.approx(ref["g_pos"], rel=1e-13)
        assert s.g_neg == pytest.approx(ref["g_neg"], rel=1e-13)
        assert s.g_plus == pytest.approx(ref["g_plus"], rel=1e-13)
        assert s.p2 == pytest.approx(ref["p2"], rel=1e-13)
        assert s.k_minus == pytest.approx(ref["k"], abs=1e-13)

    def test_rounded_reference_values(self):
        s = response(PhysParams(1.0, 1.0))
        assert s.g_pos == pytest.approx(0.15945272, abs=1e-8)
        assert s.g_neg == pytest.approx(2.9777e-4, abs=1e-8)
        assert s.g_plus == pytest.approx(0.15975049, abs=1e-8)
        assert s.p2 == pytest.approx(1.8640e-3, abs=1e-7)
        assert s.g_zero == pytest.approx(1 / (4 * math.pi**2), rel=1e-15)
        assert s.p_rod == s.g_plus

    def test_inertial_branch(self):
        s = response(PhysParams(0.0, 1.0))
        assert s.g_neg == 0.0 and s.g_zero == 0.0 and s.k_minus == 0.0
        assert s.g_plus == s.g_minus == pytest.approx(1 / (2 * math.pi), rel=1e-15)
        assert s.g_plus == pytest.approx(0.15915494, abs=1e-8)
        assert (s.p1, s.p2) == (1.0, 0.0)

    def test_extreme_ratio_does_not_overflow(self):
        s = response(PhysParams(1e-3, 10.0))
        assert s.g_neg == 0.0 and s.p2 == 0.0 and s.p1 == 1.0
        assert math.isfinite(s.k_minus)

    def test_rejects_non_params(self):
        with pytest.raises(InvalidParameterError):
            response((1.0, 1.0))

    @given(a=positive, w=positive)
    def test_identities(self, a, w):
        s = response(PhysParams(a, w))
        x = 2 * math.pi * w / a
        assert abs(s.g_plus - (s.g_pos + s.g_neg)) <= 1e-12 * s.g_plus
        assert abs(s.g_minus - w / (2 * math.pi)) <= 1e-12 * s.g_minus
        assert abs(s.p1 + s.p2 - 1) <= 1e-15
        assert abs(math.log(s.g_pos / s.g_neg) - x) <= 1e-10 * x
        assert s.g_plus == pytest.approx(w / (2 * math.pi) / math.tanh(math.pi * w / a), rel=1e-12)
        assert s.p2 == pytest.approx(s.g_neg / s.g_plus, rel=1e-12)

    @given(w=positive, a1=positive, a2=positive)
    def test_decay_rate_increases_with_acceleration(self, w, a1, a2):
        lo, hi = sorted((a1, a2))
        if hi - lo < 1e-6 * hi:
            return
        s_lo, s_hi = response(PhysParams(lo, w)), response(PhysParams(hi, w))
        assert s_hi.g_plus >= s_lo.g_plus
        assert s_hi.p2 >= s_lo.p2


class TestFourierOracle:
    @pytest.mark.parametrize("a,w", GRID3)
    def test_matches_closed_form(self, a, w):
        p = PhysParams(a, w)
        s = response(p)
        assert abs(fourier_response_numeric(p, +1) - s.g_pos) < 1e-4
        assert abs(fourier_response_numeric(p, -1) - s.g_neg) < 1e-4

    def test_accuracy_well_inside_budget(self):
        p = PhysParams(1.0, 1.0)
        s = response(p)
        assert abs(fourier_response_numeric(p, +1) - s.g_pos) < 1e-6
        assert abs(fourier_response_numeric(p, -1) - s.g_neg) < 1e-6
        assert abs(fourier_response_numeric(p, +1, return_complex=True).imag) < 1e-10

    def test_grid_runtime(self):
        start = time.perf_counter()
        for a, w in GRID3:
            p = PhysParams(a, w)
            fourier_response_numeric(p, +1)
            fourier_response_numeric(p, -1)
        assert time.perf_counter() - start < 10.0

    def test_finite_regulator_shift_without_extrapolation(self):
        # At finite eps the transform is G(+w) e^{-2 w eps / a}; the raw value exhibits that shift.
        p = PhysParams(1.0, 1.0)
        eps = 0.01
        raw = fourier_response_numeric(p, +1, eps=eps, extrapolate=False)
        assert raw == pytest.approx(response(p).g_pos * math.exp(-2 * eps), rel=1e-6)

    @pytest.mark.parametrize("kwargs,err", [
        (dict(eps=0.0), InvalidRegulatorError),
        (dict(eps=0.5), InvalidRegulatorError),
        (dict(cutoff=10.0), InvalidParameterError),
        (dict(sign=0), InvalidParameterError),
    ])
    def test_rejects_bad_arguments(self, kwargs, err):
        with pytest.raises(err):
            fourier_response_numeric(PhysParams(1.0, 1.0), **kwargs)

    def test_inertial_unsupported(self):
        with pytest.raises(UnsupportedBranchError):
            fourier_response_numeric(PhysParams(0.0, 1.0))


class TestDigamma:
    def test_zero(self):
        assert re_digamma_one_plus_iy(0.0) == pytest.approx(-0.57721566490153286, abs=1e-16)

    @pytest.mark.parametrize("y,ref", [(1.0, 0.094650320622476977), (10.0, 2.3034192636714125)])
    def test_frozen(self, y, ref):
        assert re_digamma_one_plus_iy(y) == pytest.approx(ref, abs=1e-14)

    def test_large_argument_asymptotics(self):
        y = 10.0
        asym = math.log(y) + 1 / (12 * y**2) + 1 / (120 * y**4) + 1 / (252 * y**6)
        assert re_digamma_one_plus_iy(y) == pytest.approx(asym, abs=1e-8)

    @pytest.mark.parametrize("y", [999.0, 1000.0, 1000.5, 1e6, 1e150, 1e300])
    def test_huge_arguments(self, y):
        ref = float(mp.re(mp.digamma(1 + 1j * mp.mpf(y))))
        assert re_digamma_one_plus_iy(y) == pytest.approx(ref, rel=1e-15, abs=1e-13)

    def test_near_inertial_acceleration(self):
        s = response(PhysParams(1e-237, 1.0))
        assert math.isfinite(s.k_minus) and s.k_minus < 0

    @settings(max_examples=50)
    @given(y=st.floats(min_value=0.0, max_value=1e3))
    def test_against_mpmath(self, y):
        ref = float(mp.re(mp.digamma(mp.mpc(1, y))))
        assert re_digamma_one_plus_iy(y) == pytest.approx(ref, abs=1e-12)

    def test_brute_partial_sum_with_tail_bound(self):
        y = 1.0
        n = np.arange(1, 1_000_001, dtype=float)
        partial = math.fsum(y * y / (n * (n * n + y * y)))
        # Remaining terms are bounded by y^2 / (2 N^2); 1e-15 covers rounding of a million terms.
        bound = y * y / (2 * 1e6**2) + 1e-15
        assert abs(partial - (re_digamma_one_plus_iy(y) + 0.57721566490153286)) <= bound

    def test_rejects_negative(self):
        with pytest.raises(InvalidParameterError):
            re_digamma_one_plus_iy(-1.0)


class TestLambShift:
    def test_reference_value(self):
        assert lamb_shift(PhysParams(1.0, 1.0)) == pytest.approx(-0.13615, abs=1e-5)

    def test_definition_at_second_point(self):
        p = PhysParams(1.0, 2.0)
        expected = -(4.0 / math.pi**2) * (re_digamma_one_plus_iy(2.0) + 0.57721566490153286)
        assert lamb_shift(p) == pytest.approx(expected, rel=1e-14)

    @given(a=positive, w=positive)
    def test_real_and_negative(self, a, w):
        assert lamb_shift(PhysParams(a, w)) < 0

    def test_inertial_unsupported(self):
        with pytest.raises(UnsupportedBranchError):
            lamb_shift(PhysParams(0.0, 1.0))


class TestRegularizedSum:
    @pytest.mark.parametrize("a,w", GRID3)
    def test_matches_closed_form(self, a, w):
        p = PhysParams(a, w)
        assert abs(lamb_shift_regularized_sum(p) - lamb_shift(p)) < 1e-5

    def test_reference_point(self):
        value, diag = lamb_shift_regularized_sum(PhysParams(1.0, 1.0), return_diagnostics=True)
        assert value == pytest.approx(-0.13615, abs=1e-5)
        assert diag["residual"] < 1e-6

    def test_raw_sum_diverges_logarithmically(self):
        _, diag = lamb_shift_regularized_sum(PhysParams(1.0, 1.0), return_diagnostics=True)
        finite = np.array(diag["finite_parts"])
        # With ln(1/eps) removed the remainder is bounded and settles.
        assert np.all(np.abs(finite) < 1.0)
        assert abs(finite[-1] - finite[-2]) < abs(finite[0] - finite[1])

    def test_small_ratio_limit(self):
        p = PhysParams(1e3, 1e-3)
        assert abs(lamb_shift_regularized_sum(p)) < 1e-9

    def test_inconsistent_grid_raises(self):
        with pytest.raises(RegularizationError):
            lamb_shift_regularized_sum(PhysParams(1.0, 1.0), eps_grid=(0.9, 0.5, 0.3), tol=1e-8)

    @pytest.mark.parametrize("grid", [(1e-3,), (1e-3, 1e-2), (0.0, 1e-3), (1e-2, 1e-2)])
    def test_rejects_bad_grid(self, grid):
        with pytest.raises(InvalidRegulatorError):
            lamb_shift_regularized_sum(PhysParams(1.0, 1.0), eps_grid=grid)

import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udw_battery import dynamics as dyn
from udw_battery import regression as reg
from udw_battery.errors import InvalidParameterError
from udw_battery.regression import CorrelatorKind, SystemOperator
from udw_battery.spectral import PhysParams, lamb_shift_regularized_sum, response

GRID3 = (0.5, 1.0, 2.0)
TIMES = (0.0, 1.0, 5.0, 10.0, 25.0)


@pytest.fixture(scope="module")
def canonical():
    p = PhysParams(1.0, 1.0, 1.0)
    s = response(p)
    return p, s, dyn.build_generator(p, s)


times = st.floats(0, 200)


class TestEvolutionSystem:
    def test_entries(self, canonical):
        p, s, _ = canonical
        es = reg.evolution_system(p, s)
        assert es.m11 == pytest.approx(complex(-0.0326339580437512, -1.98298143577442), abs=1e-12)
        assert es.m22 == np.conj(es.m11)
        assert es.m33 == pytest.approx(-s.g_plus / 4)
        assert es.c3 == pytest.approx(s.g_neg / 4)
        np.testing.assert_array_equal(es.steady, [0, 0, s.p2])

    def test_steady_vector_is_fixed_point(self, canonical):
        es = reg.evolution_system(*canonical[:2])
        assert np.max(np.abs(es.matrix @ es.steady + es.drift)) < 1e-17

    def test_matches_generator_block(self, canonical):
        p, s, gen = canonical
        es = reg.evolution_system(p, s)
        assert gen.matrix[1, 1] == pytest.approx(es.m11, abs=1e-15)
        assert gen.matrix[2, 2] == pytest.approx(es.m22, abs=1e-15)


class TestOperators:
    def test_ladder_algebra(self, canonical):
        r = SystemOperator.RAISE.matrix()
        lo = SystemOperator.LOWER.matrix()
        np.testing.assert_array_equal(r @ lo + lo @ r, np.eye(2))
        np.testing.assert_array_equal(SystemOperator.NUMBER.matrix() + SystemOperator.ANTI_NUMBER.matrix(), np.eye(2))
        np.testing.assert_array_equal(r @ r, np.zeros((2, 2)))

    def test_fluctuation_operators(self, canonical):
        _, s, _ = canonical
        rho_ss, _ = dyn.steady_state(*canonical[:2])
        for op in (SystemOperator.FLUCT_NUMBER, SystemOperator.FLUCT_ANTI_NUMBER):
            assert abs(rho_ss.expect(op.matrix(s))) < 1e-16
        with pytest.raises(InvalidParameterError):
            SystemOperator.FLUCT_NUMBER.matrix()

    def test_read_only(self):
        with pytest.raises(ValueError):
            SystemOperator.RAISE.matrix()[0, 0] = 1


class TestClosedForms:
    def test_initial_values(self, canonical):
        p, s, _ = canonical
        assert reg.corr_emission(p, s, 0.0, 0.0) == 1.0
        assert reg.corr_absorption(p, s, 0.0, 3.0) == 0.0
        assert reg.corr_number(p, s, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert reg.corr_hbt_swapped(p, s, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_absorption_steady_modulus(self, canonical):
        p, s, _ = canonical
        assert abs(reg.corr_absorption(p, s, math.inf, 1.0)) == pytest.approx(0.966088668859848, rel=1e-12)

    def test_absorption_prefactor_grows_with_earlier_time(self, canonical):
        p, s, _ = canonical
        amp = np.abs(reg.corr_absorption(p, s, np.linspace(0, 200, 101), 2.0))
        assert amp[0] == 0.0
        assert np.all(np.diff(amp) > 0)

    def test_emission_modulus_decays_at_coherence_rate(self, canonical):
        p, s, _ = canonical
        t = np.linspace(0, 30, 7)
        mod = np.abs(reg.corr_emission(p, s, 2.0, t))
        d1 = dyn.decay_constants(p, s).d1.real
        np.testing.assert_allclose(mod, mod[0] * np.exp(-d1 * t), rtol=1e-13)

    def test_vectorized_broadcast(self, canonical):
        p, s, _ = canonical
        out = reg.corr_number(p, s, np.array([[0.0], [1.0]]), np.array([0.0, 1.0, 2.0]))
        assert out.shape == (2, 3)
        assert out[1, 2] == reg.corr_number(p, s, 1.0, 2.0)

    @pytest.mark.parametrize("tp, t", [(-1.0, 0.0), (0.0, -1.0), (0.0, math.inf), (math.nan, 0.0)])
    def test_time_validation(self, canonical, tp, t):
        p, s, _ = canonical
        with pytest.raises(InvalidParameterError):
            reg.corr_hbt(p, s, tp, t)

    def test_steady_forms_are_limits(self, canonical):
        p, s, _ = canonical
        for kind, info in reg.KINDS.items():
            far = info.closed_form(p, s, 1e4, 3.0)
            inf = info.closed_form(p, s, math.inf, 3.0)
            assert abs(far - inf) < 1e-14, kind


class TestOracle:
    def test_nonzero_equivalence(self):
        worst = 0.0
        for a, w, mu in itertools.product(GRID3, repeat=3):
            p = PhysParams(a, w, mu)
            s = response(p)
            gen = dyn.build_generator(p, s)
            rho0 = dyn.DensityMatrix.excited()
            for tp, t in itertools.product(TIMES, repeat=2):
                for info in reg.KINDS.values():
                    worst = max(worst, abs(reg.qrt_oracle(gen, rho0, *info.operators, tp, t)
                                           - info.closed_form(p, s, tp, t)))
        assert worst < 1e-8

    def test_zero_catalogue(self, canonical):
        _, _, gen = canonical
        rho0 = dyn.DensityMatrix.excited()
        assert len(reg.ZERO_CATALOGUE) == 8
        for name, ops in reg.ZERO_CATALOGUE.items():
            for tp, t in itertools.product(TIMES, repeat=2):
                assert abs(reg.qrt_oracle(gen, rho0, *ops, tp, t)) < 1e-10, name
        assert reg.corr_zero(*canonical[:2], 1.0, np.array([1.0, 2.0])).tolist() == [0j, 0j]

    def test_fluctuation_correlator_decays(self, canonical):
        p, s, gen = canonical
        rho_ss, _ = dyn.steady_state(p, s)
        op = SystemOperator.FLUCT_NUMBER
        c0 = reg.qrt_oracle(gen, rho_ss, op, op, None, 0.0, 0.0)
        c1 = reg.qrt_oracle(gen, rho_ss, op, op, None, 0.0, 10.0)
        r = 0.25 * s.g_plus
        assert c0.real == pytest.approx(s.p1 * s.p2, rel=1e-12)
        assert c1.real == pytest.approx(s.p1 * s.p2 * math.exp(-r * 10.0), rel=1e-9)

    def test_bad_times(self, canonical):
        with pytest.raises(InvalidParameterError):
            reg.qrt_oracle(canonical[2], dyn.DensityMatrix.excited(), SystemOperator.RAISE,
                           SystemOperator.LOWER, None, math.inf, 0.0)


class TestSumRules:
    @settings(max_examples=60)
    @given(a=st.floats(0.1, 5), w=st.floats(0.1, 5), mu=st.floats(0.1, 5), tp=times, t=times)
    def test_residuals(self, a, w, mu, tp, t):
        p = PhysParams(a, w, mu)
        s = response(p)
        assert reg.number_sum_rule_residual(p, s, tp, t) < 1e-12
        assert reg.hbt_sum_rule_residual(p, s, tp, t) < 1e-12


class TestAntibunching:
    @given(a=st.floats(0.0, 10), w=st.floats(0.1, 5), mu=st.floats(0.1, 5), tp=times)
    def test_zero_delay_exact(self, a, w, mu, tp):
        p = PhysParams(a, w, mu)
        assert reg.corr_hbt(p, response(p), tp, 0.0) == 0.0

    def test_steady_monotone_with_asymptote(self, canonical):
        p, s, _ = canonical
        taus = np.linspace(0, 20 / (0.25 * s.g_plus), 300)
        pss = reg.hbt_steady(p, s, taus)
        assert np.all(np.diff(pss) > 0)
        assert pss[-1] == pytest.approx(reg.hbt_long_delay(s), rel=1e-8)
        assert reg.hbt_long_delay(s) == pytest.approx(s.p2**2)

    def test_increases_with_acceleration(self):
        vals = [reg.hbt_steady(PhysParams(a, 1.0, 1.0), response(PhysParams(a, 1.0, 1.0)), 5.0) for a in GRID3]
        assert vals[0] < vals[1] < vals[2]

    def test_long_delay_closed_form(self):
        for a, w in itertools.product(GRID3, repeat=2):
            s = response(PhysParams(a, w))
            assert reg.hbt_long_delay(s) == pytest.approx((1 + math.exp(2 * math.pi * w / a)) ** -2, rel=1e-13)


class TestPhase:
    def test_emission_winding_rate(self, canonical):
        p, s, _ = canonical
        k_ref = lamb_shift_regularized_sum(p)
        t = np.linspace(0, 3, 31)
        phase = np.unwrap(np.angle(reg.corr_emission(p, s, 1.0, t)))
        assert np.polyfit(t, phase, 1)[0] == pytest.approx(-(2 + k_ref / 8), abs=1e-8)

    def test_absorption_winds_oppositely(self, canonical):
        p, s, _ = canonical
        t = np.linspace(0, 3, 31)
        a = np.unwrap(np.angle(reg.corr_absorption(p, s, 1.0, t)))
        e = np.unwrap(np.angle(reg.corr_emission(p, s, 1.0, t)))
        np.testing.assert_allclose(a, -e, atol=1e-12)


class TestSeries:
    def test_csv(self, canonical):
        p, s, _ = canonical
        series = reg.correlator_series(CorrelatorKind.HBT, p, s, 0.0, [0.0, 1.0])
        buf = io.StringIO()
        series.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ",".join(reg.CSV_COLUMNS)
        assert lines[1] == "hbt,1,1,1,0,0,0,0"
        fields = lines[2].split(",")
        assert float(fields[6]) == reg.corr_hbt(p, s, 0.0, 1.0)

    def test_deterministic(self, canonical):
        p, s, _ = canonical
        out = []
        for _ in range(2):
            buf = io.StringIO()
            reg.correlator_series(CorrelatorKind.EMISSION, p, s, 1.5, np.linspace(0, 9, 10)).write_csv(buf)
            out.append(buf.getvalue())
        assert out[0] == out[1]

    def test_format_number(self):
        assert reg.format_number(-0.0) == "0"
        assert reg.format_number(0.1) == "0.10000000000000001"
        assert float(reg.format_number(math.pi)) == math.pi
        assert reg.format_number("hbt") == "hbt"

    def test_rejects_nonfinite(self, canonical):
        p, _, _ = canonical
        with pytest.raises(InvalidParameterError):
            reg.CorrelatorSeries(CorrelatorKind.HBT, p, 0.0, np.array([0.0]), np.array([math.nan]))

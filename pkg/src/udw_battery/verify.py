"""Invariant and oracle-equivalence suites behind ``udw-battery verify``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dynamics as dyn
from . import regression as reg
from . import spectrum as spc
from .spectral import (
    BathSpectrum,
    PhysParams,
    fourier_response_numeric,
    lamb_shift_regularized_sum,
    response,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} residual={self.residual:.3e} tolerance={self.tolerance:.1e}"


def check(name: str, residual: float, tolerance: float) -> CheckResult:
    residual = float(residual)
    return CheckResult(name, bool(residual < tolerance), residual, tolerance)


# A fault injector maps a freshly computed spectrum to a (possibly corrupted) one.
Fault = Callable[[BathSpectrum], BathSpectrum]

FAULTS: dict[str, Fault] = {
    "none": lambda s: s,
    "k-sign": lambda s: s.with_k_minus(-s.k_minus),
}

GRID3 = (0.5, 1.0, 2.0)


def _spectrum(params: PhysParams, fault: Fault) -> BathSpectrum:
    return fault(response(params))


def suite_spectral(base: PhysParams, fault: Fault) -> list[CheckResult]:
    worst = dict.fromkeys(("g_plus sum", "g_minus", "p1+p2", "kms ratio"), 0.0)
    for a, omega in itertools.product(np.linspace(0.1, 10, 10), repeat=2):
        s = _spectrum(PhysParams(a, omega, base.mu), fault)
        x = 2 * math.pi * omega / a
        worst["g_plus sum"] = max(worst["g_plus sum"], abs(s.g_plus - s.g_pos - s.g_neg) / s.g_plus)
        worst["g_minus"] = max(worst["g_minus"], abs(s.g_minus - omega / (2 * math.pi)) / s.g_minus)
        worst["p1+p2"] = max(worst["p1+p2"], abs(s.p1 + s.p2 - 1))
        worst["kms ratio"] = max(worst["kms ratio"], abs(math.log(s.g_pos / s.g_neg) - x) / x)
    out = [check(f"spectral.{k}", v, 1e-10) for k, v in worst.items()]

    f_err = k_err = 0.0
    for a, omega in itertools.product(GRID3, repeat=2):
        p = PhysParams(a, omega, base.mu)
        s = _spectrum(p, fault)
        f_err = max(f_err, abs(fourier_response_numeric(p, +1) - s.g_pos),
                    abs(fourier_response_numeric(p, -1) - s.g_neg))
        k_err = max(k_err, abs(lamb_shift_regularized_sum(p) - s.k_minus))
    out.append(check("spectral.fourier_oracle", f_err, 1e-4))
    out.append(check("spectral.lamb_shift_oracle", k_err, 1e-5))
    return out


def suite_dynamics(base: PhysParams, fault: Fault) -> list[CheckResult]:
    trace = herm = sx = num = 0.0
    psd = math.inf
    for a, omega, mu in itertools.product(GRID3, repeat=3):
        p = PhysParams(a, omega, mu)
        s = _spectrum(p, fault)
        gen = dyn.build_generator(p, s)
        taus = np.linspace(0, 10 / (0.25 * mu**2 * s.g_plus), 20)
        states = dyn.trajectory(gen, dyn.DensityMatrix.excited(), taus)
        for t, rho in zip(taus, states):
            m = rho.matrix
            trace = max(trace, abs(np.trace(m) - 1))
            herm = max(herm, abs(m[0, 1] - np.conj(m[1, 0])), abs(m[0, 0].imag), abs(m[1, 1].imag))
            psd = min(psd, rho.pp * rho.mm - abs(rho.pm) ** 2)
            sx = max(sx, abs(rho.expect(dyn.SIGMA_X) - dyn.expect_sigma_x(p, s, t)))
            num = max(num, abs(rho.pp - dyn.expect_number(p, s, t)))
    p = base
    s = _spectrum(p, fault)
    gen = dyn.build_generator(p, s)
    tau = 4 / (p.mu**2 * s.g_plus)
    pop = dyn.propagate(gen, dyn.DensityMatrix.excited(), tau).pp
    return [
        check("dynamics.trace_drift", trace, 1e-12),
        check("dynamics.hermiticity_drift", herm, 1e-12),
        check("dynamics.positivity", max(0.0, -psd), 1e-10),
        check("dynamics.sigma_x_vs_rk4", sx, 1e-8),
        check("dynamics.number_vs_rk4", num, 1e-8),
        check("dynamics.population_at_4_lifetimes", abs(pop - (s.p2 + s.p1 / math.e)), 1e-8),
    ]


def suite_regression(base: PhysParams, fault: Fault) -> list[CheckResult]:
    grid = (0.0, 1.0, 5.0, 10.0, 25.0)
    nonzero = zero = sums = 0.0
    for a, omega, mu in itertools.product(GRID3, repeat=3):
        p = PhysParams(a, omega, mu)
        s = _spectrum(p, fault)
        gen = dyn.build_generator(p, s)
        rho0 = dyn.DensityMatrix.excited()
        for tp, t in itertools.product(grid, repeat=2):
            for info in reg.KINDS.values():
                o = reg.qrt_oracle(gen, rho0, *info.operators, tp, t)
                nonzero = max(nonzero, abs(o - info.closed_form(p, s, tp, t)))
            for ops in reg.ZERO_CATALOGUE.values():
                zero = max(zero, abs(reg.qrt_oracle(gen, rho0, *ops, tp, t)))
            sums = max(sums, reg.number_sum_rule_residual(p, s, tp, t), reg.hbt_sum_rule_residual(p, s, tp, t))
    out = [
        check("regression.oracle_nonzero", nonzero, 1e-8),
        check("regression.oracle_zero", zero, 1e-10),
        check("regression.sum_rules", sums, 1e-12),
    ]

    s = _spectrum(base, fault)
    taus = np.linspace(0.0, 40.0 / (0.25 * base.mu**2 * s.g_plus), 401)
    pss = reg.hbt_steady(base, s, taus)
    out.append(check("regression.hbt_zero_delay", abs(reg.corr_hbt(base, s, 0.0, 0.0)), 1e-300))
    # Beyond ~35 lifetimes the rise saturates in double precision, so monotonicity is checked on the first half.
    out.append(check("regression.pss_monotone", 0.0 if np.all(np.diff(pss[:201]) > 0) else 1.0, 0.5))
    out.append(check("regression.pss_asymptote", abs(pss[-1] - reg.hbt_long_delay(s)) / s.p2**2, 1e-6))
    along_a = [reg.hbt_steady(PhysParams(a, 1.0, 1.0), _spectrum(PhysParams(a, 1.0, 1.0), fault), 5.0)
               for a in GRID3]
    out.append(check("regression.pss_increases_with_a", 0.0 if np.all(np.diff(along_a) > 0) else 1.0, 0.5))

    # The reference winding rate comes from the independent regularized Lamb-shift sum.
    k_ref = lamb_shift_regularized_sum(base)
    rate_ref = -(2 * base.omega + base.mu**2 * k_ref / 8)
    t = np.linspace(0.0, 3.0, 31)
    phase = np.unwrap(np.angle(reg.corr_emission(base, s, 1.0, t)))
    slope, intercept = np.polyfit(t, phase, 1)
    fit_resid = float(np.max(np.abs(phase - (slope * t + intercept))))
    out.append(check("regression.phase_rate", max(abs(slope - rate_ref), fit_resid), 1e-8))
    return out


def suite_spectrum(base: PhysParams, fault: Fault) -> list[CheckResult]:
    s = _spectrum(base, fault)
    sp = spc.spectrum_params(base, s)
    worst = 0.0
    for T in (10.0, 50.0):
        omegas = sp.centre + np.array([-1.0, -0.5, -0.1, 0.1, 0.5, 1.0])
        closed = spc.spectrum_finite_T(base, s, T, omegas).total
        for w, c in zip(omegas, closed):
            worst = max(worst, abs(spc.spectrum_numeric_oracle(base, s, T, w) - c) / abs(c))
    ref_centre = 2 * base.omega + base.mu**2 * lamb_shift_regularized_sum(base) / 8
    grid = np.linspace(ref_centre - 0.5, ref_centre + 0.5, 2001)
    branch1, branch2 = spc.lorentzian_limit(base, s, grid)
    cell = grid[1] - grid[0]
    peak = grid[int(np.argmax(branch1))]
    d = np.linspace(0.0, 0.3, 61)
    b1p, b2p = spc.lorentzian_limit(base, s, sp.centre + d)
    b1m, b2m = spc.lorentzian_limit(base, s, sp.centre - d)
    symmetry = max(np.max(np.abs(b1p - b1m)), np.max(np.abs(b2p - b2m)))
    return [
        check("spectrum.finite_T_vs_oracle", worst, 1e-4),
        check("spectrum.lorentzian_peak", abs(peak - ref_centre) / cell, 1.0),
        check("spectrum.lorentzian_symmetry", symmetry, 1e-12),
    ]


SUITES = {
    "spectral": suite_spectral,
    "dynamics": suite_dynamics,
    "regression": suite_regression,
    "spectrum": suite_spectrum,
}


def run_all(base: PhysParams | None = None, fault: str = "none") -> list[CheckResult]:
    base = base or PhysParams(1.0, 1.0, 1.0)
    inject = FAULTS[fault]
    results: list[CheckResult] = []
    for suite in SUITES.values():
        results.extend(suite(base, inject))
    return results

"""Two-time correlators of the battery via the quantum regression theorem.

Closed forms assume the canonical initial state ``|+><+|`` at ``tau' = 0``.
Passing ``tau_prime=math.inf`` gives the steady-state form, obtained by
dropping every ``exp(-r tau')`` term rather than by propagating.

The numerical oracle uses the ordering

    <A(t) B(t+tau)>      = Tr[B E_tau(rho(t) A)]
    <A(t) B(t+tau) C(t)> = Tr[B E_tau(C rho(t) A)]

with ``E_tau`` the GKSL propagator.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .dynamics import (
    IDENTITY,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    GkslGenerator,
    evolve_vector,
    expect_number,
    propagate,
)
from .errors import InvalidParameterError
from .spectral import BathSpectrum, PhysParams


@dataclass(frozen=True)
class EvolutionSystem:
    """Diagonal evolution matrix ``M``, drift ``C = (0, 0, c3)`` and the steady vector.

    Components are ordered ``(sigma_-, sigma_+, Sigma)``-like: ``m11`` governs
    ``rho_pm``, ``m22 = conj(m11)`` governs ``rho_mp``, ``m33`` the population.
    """

    m11: complex
    m22: complex
    m33: float
    c3: float
    steady: np.ndarray = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([self.m11, self.m22, self.m33]).astype(complex)

    @property
    def drift(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.c3], dtype=complex)


def evolution_system(params: PhysParams, spectrum: BathSpectrum) -> EvolutionSystem:
    mu2 = params.mu**2
    re = -0.5 * mu2 * (spectrum.g_zero + spectrum.g_plus / 4.0)
    im = 2.0 * params.omega + mu2 * spectrum.k_minus / 8.0
    return EvolutionSystem(
        m11=complex(re, -im),
        m22=complex(re, im),
        m33=-0.25 * mu2 * spectrum.g_plus,
        c3=0.25 * mu2 * spectrum.g_neg,
        steady=np.array([0.0, 0.0, spectrum.p2], dtype=complex),
    )


class SystemOperator(enum.Enum):
    RAISE = "raise"
    LOWER = "lower"
    NUMBER = "number"
    ANTI_NUMBER = "antinumber"
    FLUCT_NUMBER = "fluct-number"
    FLUCT_ANTI_NUMBER = "fluct-antinumber"
    SIGMA_X = "sigma-x"
    SIGMA_Y = "sigma-y"
    SIGMA_Z = "sigma-z"

    def matrix(self, spectrum: BathSpectrum | None = None) -> np.ndarray:
        """2x2 matrix in the ``|+>, |->`` basis; fluctuation operators need ``spectrum``."""
        if self in (SystemOperator.FLUCT_NUMBER, SystemOperator.FLUCT_ANTI_NUMBER):
            if spectrum is None:
                raise InvalidParameterError(f"{self.value} requires a bath spectrum")
            if self is SystemOperator.FLUCT_NUMBER:
                return _NUMBER - spectrum.p2 * IDENTITY
            return _ANTI_NUMBER - spectrum.p1 * IDENTITY
        return _FIXED[self]


_RAISE = np.array([[0, 1], [0, 0]], dtype=complex)
_LOWER = _RAISE.T.copy()
_NUMBER = _RAISE @ _LOWER
_ANTI_NUMBER = _LOWER @ _RAISE
_FIXED = {
    SystemOperator.RAISE: _RAISE,
    SystemOperator.LOWER: _LOWER,
    SystemOperator.NUMBER: _NUMBER,
    SystemOperator.ANTI_NUMBER: _ANTI_NUMBER,
    SystemOperator.SIGMA_X: SIGMA_X,
    SystemOperator.SIGMA_Y: SIGMA_Y,
    SystemOperator.SIGMA_Z: SIGMA_Z,
}
for _m in _FIXED.values():
    _m.setflags(write=False)


def _check_times(tau_prime, tau):
    tp = np.asarray(tau_prime, dtype=float)
    t = np.asarray(tau, dtype=float)
    if np.any(np.isnan(tp)) or np.any(tp < 0):
        raise InvalidParameterError("tau_prime must be >= 0")
    if np.any(np.isnan(t)) or np.any(t < 0) or np.any(np.isinf(t)):
        raise InvalidParameterError("tau must be finite and >= 0")
    return tp, t


def _decay(r: float, t: np.ndarray) -> np.ndarray:
    """``exp(-r t)`` with the steady-state convention ``exp(-r * inf) = 0``."""
    return np.where(np.isinf(t), 0.0, np.exp(-r * np.where(np.isinf(t), 0.0, t)))


def _rise(r: float, t: np.ndarray) -> np.ndarray:
    """``1 - exp(-r t)`` without cancellation at small ``r t``; 1 at ``t = inf``."""
    return np.where(np.isinf(t), 1.0, -np.expm1(-r * np.where(np.isinf(t), 0.0, t)))


def _population(spectrum: BathSpectrum, r: float, t: np.ndarray) -> np.ndarray:
    return spectrum.p2 + spectrum.p1 * _decay(r, t)


def _rate(params: PhysParams, spectrum: BathSpectrum) -> float:
    return 0.25 * params.mu**2 * spectrum.g_plus


def _scalar(x):
    return x.item() if np.ndim(x) == 0 else x


def corr_absorption(params, spectrum, tau_prime, tau):
    """``<sigma_-(tau') sigma_+(tau' + tau)>``."""
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    m22 = evolution_system(params, spectrum).m22
    return _scalar(spectrum.p1 * _rise(r, tp) * np.exp(m22 * t))


def corr_emission(params, spectrum, tau_prime, tau):
    """``<sigma_+(tau') sigma_-(tau' + tau)>``."""
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    m11 = evolution_system(params, spectrum).m11
    return _scalar(_population(spectrum, r, tp) * np.exp(m11 * t))


def corr_number(params, spectrum, tau_prime, tau):
    """``<Sigma(tau') Sigma(tau' + tau)>``."""
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    p1, p2 = spectrum.p1, spectrum.p2
    ep, e = _decay(r, tp), _decay(r, t)
    return _scalar(p1 * p2 * (e + ep) + p1**2 * ep * e + p2**2)


def corr_number_antinumber(params, spectrum, tau_prime, tau):
    """``<Sigma(tau') Delta(tau' + tau)>``."""
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    return _scalar(_population(spectrum, r, tp) * spectrum.p1 * _rise(r, t))


def corr_hbt(params, spectrum, tau_prime, tau):
    """``<sigma_+(tau') sigma_+(tau'+tau) sigma_-(tau'+tau) sigma_-(tau')>``; vanishes at zero delay."""
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    return _scalar(spectrum.p2 * _rise(r, t) * _population(spectrum, r, tp))


def corr_hbt_swapped(params, spectrum, tau_prime, tau):
    """``<sigma_+(tau') sigma_-(tau'+tau) sigma_+(tau'+tau) sigma_-(tau')>``.

    Together with :func:`corr_hbt` it sums to the excited population at ``tau'``.
    """
    tp, t = _check_times(tau_prime, tau)
    r = _rate(params, spectrum)
    return _scalar(_population(spectrum, r, tp) * (spectrum.p1 + spectrum.p2 * _decay(r, t)))


def hbt_steady(params, spectrum, tau):
    """Steady-state HBT correlator ``P2^2 (1 - exp(-r tau))``."""
    return corr_hbt(params, spectrum, math.inf, tau)


def hbt_long_delay(spectrum: BathSpectrum) -> float:
    """Infinite-delay steady-state HBT value ``P2^2``."""
    return spectrum.p2**2


def corr_zero(params, spectrum, tau_prime, tau):
    """Closed form shared by every entry of :data:`ZERO_CATALOGUE`."""
    tp, t = _check_times(tau_prime, tau)
    return _scalar(np.zeros(np.broadcast(tp, t).shape, dtype=complex))


O = SystemOperator
# (left, mid, right) triples whose correlator vanishes identically for the canonical state.
ZERO_CATALOGUE: dict[str, tuple[SystemOperator, SystemOperator, SystemOperator | None]] = {
    "lower-lower": (O.LOWER, O.LOWER, None),
    "lower-number": (O.LOWER, O.NUMBER, None),
    "raise-raise": (O.RAISE, O.RAISE, None),
    "raise-number": (O.RAISE, O.NUMBER, None),
    "number-lower": (O.NUMBER, O.LOWER, None),
    "number-raise": (O.NUMBER, O.RAISE, None),
    "antinumber-lower": (O.ANTI_NUMBER, O.LOWER, None),
    "antinumber-raise": (O.ANTI_NUMBER, O.RAISE, None),
}


class CorrelatorKind(enum.Enum):
    ABSORPTION = "absorption"
    EMISSION = "emission"
    NUMBER = "number-number"
    NUMBER_ANTINUMBER = "number-antinumber"
    HBT = "hbt"
    HBT_SWAPPED = "hbt-swapped"


@dataclass(frozen=True)
class _KindInfo:
    closed_form: Callable
    operators: tuple[SystemOperator, SystemOperator, SystemOperator | None]


KINDS: dict[CorrelatorKind, _KindInfo] = {
    CorrelatorKind.ABSORPTION: _KindInfo(corr_absorption, (O.LOWER, O.RAISE, None)),
    CorrelatorKind.EMISSION: _KindInfo(corr_emission, (O.RAISE, O.LOWER, None)),
    CorrelatorKind.NUMBER: _KindInfo(corr_number, (O.NUMBER, O.NUMBER, None)),
    CorrelatorKind.NUMBER_ANTINUMBER: _KindInfo(corr_number_antinumber, (O.NUMBER, O.ANTI_NUMBER, None)),
    CorrelatorKind.HBT: _KindInfo(corr_hbt, (O.RAISE, O.NUMBER, O.LOWER)),
    CorrelatorKind.HBT_SWAPPED: _KindInfo(corr_hbt_swapped, (O.RAISE, O.ANTI_NUMBER, O.LOWER)),
}
del O

CSV_COLUMNS = ("kind", "a", "omega", "mu", "tau_prime", "tau", "re", "im")


@dataclass(frozen=True)
class CorrelatorSeries:
    kind: CorrelatorKind
    params: PhysParams
    tau_prime: float
    taus: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError(f"{self.kind.value} series contains non-finite values")

    def rows(self):
        p = self.params
        for t, v in zip(self.taus, self.values):
            yield (self.kind.value, p.a, p.omega, p.mu, self.tau_prime, float(t),
                   float(np.real(v)), float(np.imag(v)))

    def write_csv(self, stream: TextIO, header: bool = True) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        if header:
            writer.writerow(CSV_COLUMNS)
        for row in self.rows():
            writer.writerow([format_number(x) for x in row])


def format_number(x) -> str:
    """Round-trip text for CSV output (17 significant digits for floats)."""
    if isinstance(x, str):
        return x
    # Adding 0.0 folds negative zero into zero.
    return format(float(x) + 0.0, ".17g")


def correlator_series(kind: CorrelatorKind, params: PhysParams, spectrum: BathSpectrum,
                      tau_prime: float, taus) -> CorrelatorSeries:
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(KINDS[kind].closed_form(params, spectrum, tau_prime, taus), dtype=complex)
    return CorrelatorSeries(kind, params, float(tau_prime), taus, np.broadcast_to(values, taus.shape))


def qrt_oracle(
    gen: GkslGenerator,
    rho0: DensityMatrix,
    left: SystemOperator,
    mid: SystemOperator,
    right: SystemOperator | None = None,
    tau_prime: float = 0.0,
    tau: float = 0.0,
    h: float | None = None,
) -> complex:
    """Two-time correlator by propagating ``rho0`` to ``tau'`` and then the operator ``X`` for ``tau``."""
    if not (tau_prime >= 0 and tau >= 0 and math.isfinite(tau_prime) and math.isfinite(tau)):
        raise InvalidParameterError("tau_prime and tau must be finite and >= 0")
    rho = propagate(gen, rho0, tau_prime, h).matrix
    x = rho @ left.matrix(gen.spectrum)
    if right is not None:
        x = right.matrix(gen.spectrum) @ x
    x_tau = evolve_vector(gen, x.reshape(4), tau, h).reshape(2, 2)
    return complex(np.trace(mid.matrix(gen.spectrum) @ x_tau))


def number_sum_rule_residual(params, spectrum, tau_prime, tau):
    """``|<Sigma Sigma> + <Sigma Delta> - <Sigma>(tau')|``."""
    total = corr_number(params, spectrum, tau_prime, tau) + corr_number_antinumber(params, spectrum, tau_prime, tau)
    return np.abs(total - expect_number(params, spectrum, tau_prime))


def hbt_sum_rule_residual(params, spectrum, tau_prime, tau):
    """``|HBT + swapped HBT - <Sigma>(tau')|``."""
    total = corr_hbt(params, spectrum, tau_prime, tau) + corr_hbt_swapped(params, spectrum, tau_prime, tau)
    return np.abs(total - expect_number(params, spectrum, tau_prime))

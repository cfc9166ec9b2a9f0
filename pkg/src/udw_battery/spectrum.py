"""Spontaneous-emission power spectrum of the battery.

With ``R`` and ``I`` the real and imaginary parts of ``m11`` and
``delta = omega + I`` the detuning from the shifted line centre, write
``z = R + i delta`` and ``w = (m33 - R) - i delta``.  The emission
correlator splits into a steady part weighted by ``P2`` and a transient
part weighted by ``P1``; integrating it against ``exp(i omega (t'' - t'))``
over the window ``[0, T]^2`` gives

    p1 = P2 (e^{zT} - 2 + e^{-zT}) / z^2
    p2 = P1 (e^{zT} - 1) (e^{wT} - 1) / (z w)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import InvalidParameterError, InvalidRegulatorError, PoleProximityError, ResolutionError
from .quadrature import composite_rule
from .regression import evolution_system, format_number
from .spectral import BathSpectrum, PhysParams

POLE_TOLERANCE = 1e-6
# Largest real exponent accepted before exp() would overflow.
_MAX_EXPONENT = 700.0
_MAX_PHASE_PER_PANEL = 0.5


@dataclass(frozen=True)
class SpectrumParams:
    """Line-shape coefficients derived from the evolution matrix."""

    R: float
    I: float
    m33mR: float
    m33: float
    mu2_g0: float

    @property
    def centre(self) -> float:
        """Shifted line centre ``2 omega + mu^2 K / 8``."""
        return -self.I


def spectrum_params(params: PhysParams, spectrum: BathSpectrum) -> SpectrumParams:
    ev = evolution_system(params, spectrum)
    R = ev.m11.real
    return SpectrumParams(
        R=R,
        I=ev.m11.imag,
        m33mR=0.5 * params.mu**2 * (spectrum.g_zero - spectrum.g_plus / 4.0),
        m33=ev.m33,
        mu2_g0=params.mu**2 * spectrum.g_zero,
    )


@dataclass(frozen=True)
class SpectrumResult:
    params: PhysParams
    T: float
    omega: np.ndarray = field(repr=False)
    p1: np.ndarray = field(repr=False)
    p2: np.ndarray = field(repr=False)
    total: np.ndarray = field(repr=False)
    peak_omega: float
    fwhm: float

    def write_csv(self, stream: TextIO) -> None:
        p = self.params
        stream.write(f"# a={format_number(p.a)}\n# omega={format_number(p.omega)}\n")
        stream.write(f"# mu={format_number(p.mu)}\n# T={format_number(self.T)}\n")
        stream.write("omega,re_p1,im_p1,re_p2,im_p2,re_total,im_total\n")
        for w, a, b, c in zip(self.omega, self.p1, self.p2, self.total):
            vals = (w, a.real, a.imag, b.real, b.imag, c.real, c.imag)
            stream.write(",".join(format_number(v) for v in vals) + "\n")


def peak_location(x: np.ndarray, y: np.ndarray) -> float:
    """Maximizer of sampled ``y`` refined by a three-point parabola; ties go to smaller ``x``."""
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        return float(x[k])
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(x[k])
    # Offset in units of the local spacing; assumes a locally uniform grid.
    shift = 0.5 * (y0 - y2) / denom
    h = 0.5 * (x[k + 1] - x[k - 1])
    return float(x[k] + shift * h)


def full_width_half_max(x: np.ndarray, y: np.ndarray) -> float:
    """Width between the half-maximum crossings closest to the sampled peak, ``nan`` if either is missing."""
    k = int(np.argmax(y))
    half = 0.5 * y[k]

    def crossing(indices) -> float | None:
        prev = k
        for j in indices:
            if y[j] < half:
                t = (y[prev] - half) / (y[prev] - y[j])
                return x[prev] + t * (x[j] - x[prev])
            prev = j
        return None

    lo = crossing(range(k - 1, -1, -1))
    hi = crossing(range(k + 1, len(y)))
    if lo is None or hi is None:
        return math.nan
    return float(hi - lo)


def _check_range(exponent: np.ndarray, T: float) -> None:
    worst = float(np.max(np.abs(np.real(exponent)))) * T
    if worst > _MAX_EXPONENT:
        raise InvalidParameterError(
            f"window T={T!r} makes the finite-window form overflow (|Re exponent| T = {worst:.1f});"
            " use lorentzian_limit for long windows"
        )


def spectrum_finite_T(params: PhysParams, spectrum: BathSpectrum, T: float, omega_grid) -> SpectrumResult:
    """Finite-window spectrum ``P(omega) = p1 + p2`` evaluated as closed forms.

    Both factorized exponentials are evaluated as they stand, growing terms
    included; windows long enough to overflow are rejected.
    """
    if not T > 0 or not math.isfinite(T):
        raise InvalidParameterError(f"T must be positive and finite, got {T!r}")
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    sp = spectrum_params(params, spectrum)
    detuning = omega + sp.I
    close = np.abs(detuning) < POLE_TOLERANCE
    if np.any(close):
        bad = float(omega[np.argmax(close)])
        raise PoleProximityError(bad, sp.centre)
    z = sp.R + 1j * detuning
    w = sp.m33mR - 1j * detuning
    _check_range(np.array([sp.R, sp.m33mR, sp.m33]), T)

    # Printed rational prefactors, kept in their expanded form.
    a_coef = sp.R**2
    b = detuning**2
    num1 = a_coef - b - 2j * sp.R * detuning
    den1 = (a_coef - b) ** 2 + 4 * a_coef * b
    ru = sp.R * sp.m33mR
    num2 = ru + b - 1j * sp.mu2_g0 * detuning
    den2 = (ru + b) ** 2 + sp.mu2_g0**2 * b

    p1 = spectrum.p2 * num1 / den1 * (np.exp(z * T) - 2.0 + np.exp(-z * T))
    p2 = spectrum.p1 * num2 / den2 * (1.0 - np.exp(z * T) + np.exp(sp.m33 * T) - np.exp(w * T))
    total = p1 + p2
    return SpectrumResult(
        params=params,
        T=float(T),
        omega=omega,
        p1=p1,
        p2=p2,
        total=total,
        peak_omega=peak_location(omega, total.real),
        fwhm=full_width_half_max(omega, total.real),
    )


def _emission_correlator(spectrum: BathSpectrum, sp: SpectrumParams, t1, t2):
    """Two-exponential decomposition of ``<sigma_+(t1) sigma_-(t2)>`` extended to all ``t1, t2``."""
    m = sp.R + 1j * sp.I
    return np.exp(m * t2) * (spectrum.p2 * np.exp(-m * t1) + spectrum.p1 * np.exp((sp.m33 - m) * t1))


def spectrum_numeric_oracle(
    params: PhysParams,
    spectrum: BathSpectrum,
    T: float,
    omega: float,
    *,
    domain: str = "square",
    conjugate: bool = False,
    panel_width: float | None = None,
    order: int = 6,
    max_evaluations: int = 10_000_000,
    chunk: int = 256,
) -> complex:
    """Tensor Gauss-Legendre quadrature of the windowed emission correlator.

    ``domain="square"`` integrates over ``[0, T]^2``; ``"triangle"`` keeps only
    ``t2 >= t1``.  Panels default to width ``0.5 / (|omega| + |I|)`` so every
    panel spans at most half a radian of phase; a coarser ``panel_width`` raises
    :class:`ResolutionError`.  With ``conjugate`` the correlator is conjugated
    before the transform, so ``oracle(-omega, conjugate=True)`` equals
    ``conj(oracle(omega))``.
    """
    if not T > 0 or not math.isfinite(T):
        raise InvalidParameterError(f"T must be positive and finite, got {T!r}")
    if domain not in ("square", "triangle"):
        raise InvalidParameterError(f"domain must be 'square' or 'triangle', got {domain!r}")
    sp = spectrum_params(params, spectrum)
    rate = abs(omega) + abs(sp.I)
    if panel_width is None:
        panel_width = _MAX_PHASE_PER_PANEL / rate if rate > 0 else T
    if panel_width * rate > _MAX_PHASE_PER_PANEL * (1 + 1e-12):
        raise ResolutionError(
            f"panel width {panel_width!r} spans {panel_width * rate:.3f} rad of phase (limit 0.5)"
        )
    panels = max(1, math.ceil(T / panel_width - 1e-9))
    n = panels * order
    if n * n > max_evaluations:
        raise ResolutionError(f"{n * n} integrand evaluations exceed the budget of {max_evaluations}")

    nodes, weights = composite_rule(np.linspace(0.0, T, panels + 1), order)
    if domain == "triangle":
        unit, unit_w = composite_rule(np.linspace(0.0, 1.0, panels + 1), order)
    total = 0j
    for start in range(0, n, chunk):
        t1 = nodes[start:start + chunk, None]
        w1 = weights[start:start + chunk, None]
        if domain == "square":
            t2 = nodes[None, :]
            w2 = weights[None, :]
        else:
            span = T - t1
            t2 = t1 + span * unit[None, :]
            w2 = span * unit_w[None, :]
        corr = _emission_correlator(spectrum, sp, t1, t2)
        if conjugate:
            corr = np.conj(corr)
        total += np.sum(w1 * w2 * corr * np.exp(1j * omega * (t2 - t1)))
    return complex(total)


def lorentzian_limit(params: PhysParams, spectrum: BathSpectrum, omega_grid) -> tuple[np.ndarray, np.ndarray]:
    """Long-window line shapes of both branches, scaled so the first peaks at exactly 1.

    The first branch is ``R^2 (R^2 - delta^2) / (R^2 + delta^2)^2``, which turns
    negative for ``|delta| > |R|``; the second carries the same ``R^2`` scale.
    """
    omega = np.asarray(omega_grid, dtype=float)
    sp = spectrum_params(params, spectrum)
    d2 = (omega + sp.I) ** 2
    r2 = sp.R**2
    branch1 = r2 * (r2 - d2) / ((r2 - d2) ** 2 + 4 * r2 * d2)
    ru = sp.R * sp.m33mR
    branch2 = r2 * (ru + d2) / ((ru + d2) ** 2 + sp.mu2_g0**2 * d2)
    return branch1, branch2


def lorentzian_half_width(params: PhysParams, spectrum: BathSpectrum) -> float:
    """Detuning where the first long-window branch falls to one half: ``|R| sqrt(sqrt(5) - 2)``."""
    return abs(spectrum_params(params, spectrum).R) * math.sqrt(math.sqrt(5.0) - 2.0)


@dataclass(frozen=True)
class OscillatoryTail:
    """``int_0^inf exp((i delta - eps) t) dt`` and its vanishing-regulator decomposition.

    ``delta_singular`` marks ``|delta|`` below tolerance, where the limit is
    carried by a delta-function weight ``pi``; otherwise the limit is the
    principal-value term ``i / delta``.  ``oscillating_limit`` is the
    distributional long-time limit of ``exp(i delta T)`` itself, which is 0
    away from ``delta = 0``.
    """

    value: complex
    delta_singular: bool
    principal_value: complex
    delta_weight: float
    oscillating_limit: float


def oscillatory_tail(delta: float, eps: float, *, tolerance: float = 1e-12) -> OscillatoryTail:
    if not eps > 0:
        raise InvalidRegulatorError(f"eps must be > 0, got {eps!r}")
    singular = abs(delta) < tolerance
    return OscillatoryTail(
        value=1.0 / complex(eps, -delta),
        delta_singular=singular,
        principal_value=0j if singular else 1j / delta,
        delta_weight=math.pi if singular else 0.0,
        oscillating_limit=0.0,
    )


def truncated_tail(delta: float, eps: float, t_max: float) -> complex:
    """``int_0^t_max exp((i delta - eps) t) dt`` in closed form."""
    if not eps > 0:
        raise InvalidRegulatorError(f"eps must be > 0, got {eps!r}")
    s = complex(-eps, delta)
    return complex(np.expm1(s * t_max) / s)

"""Bath response of a uniformly accelerated detector coupled to a massless scalar field.

Everything here is expressed in one natural inverse-time unit (hbar = c = 1):
the acceleration ``a``, the gap parameter ``omega`` and every rate share it.

Closed forms
    :func:`response` returns the Fourier-transformed Wightman function at
    ``+omega``, ``-omega`` and ``0`` together with their sums, ratios and the
    regularized Lamb-shift function.

Numerical oracles
    :func:`fourier_response_numeric` integrates the Wightman function directly,
    :func:`lamb_shift_regularized_sum` sums the exponentially damped divergent
    series and extrapolates the damping to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParameterError,
    InvalidRegulatorError,
    QuadratureError,
    RegularizationError,
    UnsupportedBranchError,
)
from .quadrature import composite_rule, uniform_breakpoints

EULER_GAMMA = 0.57721566490153286061

# Terms summed explicitly before the Euler-Maclaurin tail takes over; the
# remainder after the fifth-derivative correction is below 1/(120 N^7).
_DIGAMMA_SERIES_TERMS = 64
_DIGAMMA_ASYMPTOTIC_FROM = 1e3


@dataclass(frozen=True)
class PhysParams:
    """Acceleration ``a`` (>= 0), gap ``omega`` (> 0) and coupling ``mu`` (>= 0)."""

    a: float
    omega: float
    mu: float = 1.0

    def __post_init__(self):
        for name in ("a", "omega", "mu"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise InvalidParameterError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega <= 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega!r}")
        if self.a < 0:
            raise InvalidParameterError(f"a must be >= 0, got {self.a!r}")
        if self.mu < 0:
            raise InvalidParameterError(f"mu must be >= 0, got {self.mu!r}")

    @property
    def is_inertial(self) -> bool:
        return self.a == 0.0


@dataclass(frozen=True)
class BathSpectrum:
    """Cached response values for one :class:`PhysParams`.

    ``k_minus`` is the real Lamb-shift value; the complex function that enters
    the master equation is ``1j * k_minus``.
    """

    params: PhysParams
    g_pos: float
    g_neg: float
    g_zero: float
    g_plus: float
    g_minus: float
    p1: float
    p2: float
    k_minus: float

    @property
    def p_rod(self) -> float:
        """Rate-of-decay function, identical to ``g_plus``."""
        return self.g_plus

    def with_k_minus(self, k_minus: float) -> "BathSpectrum":
        """Copy with a replaced Lamb-shift value (used for fault injection)."""
        return BathSpectrum(
            self.params, self.g_pos, self.g_neg, self.g_zero, self.g_plus,
            self.g_minus, self.p1, self.p2, float(k_minus),
        )


def _inv_sinh_squared(z):
    # For |Re z| large the direct form overflows; use 4 e^{-2|z|} / (1 - e^{-2|z|})^2.
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z.real) < 20.0
    out[small] = 1.0 / np.sinh(z[small]) ** 2
    zl = np.where(z[~small].real > 0, z[~small], -z[~small])
    e = np.exp(-2.0 * zl)
    out[~small] = 4.0 * e / (1.0 - e) ** 2
    return out


def wightman(params: PhysParams, s, eps: float):
    """Vacuum Wightman function along the Rindler worldline at proper-time separation ``s``.

    Returns ``-a**2 / (16 pi**2) / sinh(a s / 2 - 1j eps)**2``; ``s`` may be an array.
    """
    if not eps > 0:
        raise InvalidRegulatorError(f"eps must be > 0, got {eps!r}")
    if params.a == 0:
        raise UnsupportedBranchError("the Rindler Wightman function needs a > 0")
    a = params.a
    z = 0.5 * a * np.asarray(s, dtype=float) - 1j * eps
    value = -(a * a) / (16.0 * math.pi**2) * _inv_sinh_squared(z)
    return value[()] if value.ndim == 0 else value


def _digamma_shifted(y: float) -> float:
    """Re psi(1 + iy) + gamma as a convergent series with an Euler-Maclaurin tail."""
    if y < 0:
        raise InvalidParameterError(f"y must be >= 0, got {y!r}")
    if y == 0:
        return 0.0
    y2 = y * y
    if y > _DIGAMMA_ASYMPTOTIC_FROM:
        # Stirling series; the first omitted term is below 1e-26 here.
        inv2 = 1.0 / y2
        return math.log(y) + EULER_GAMMA + inv2 * (1 / 12 + inv2 * (1 / 120 + inv2 / 252))
    N = _DIGAMMA_SERIES_TERMS
    head = math.fsum(y2 / (n * (n * n + y2)) for n in range(1, N))
    # Tail sum_{n >= N} f(n) with f(x) = 1/x - Re 1/(x + iy).
    z = complex(N, y)

    def deriv(k: int) -> float:
        c = (-1) ** k * math.factorial(k)
        return c / N ** (k + 1) - (c / z ** (k + 1)).real

    integral = 0.5 * math.log1p(y2 / (N * N))
    tail = integral + 0.5 * deriv(0) - deriv(1) / 12.0 + deriv(3) / 720.0 - deriv(5) / 30240.0
    return head + tail


def re_digamma_one_plus_iy(y: float) -> float:
    """Real part of the digamma function on the line ``1 + iy``, ``y >= 0``.

    Uses ``Re psi(1 + iy) + gamma = sum_n y^2 / (n (n^2 + y^2))``; absolute
    error is below ``1e-12``.
    """
    return _digamma_shifted(float(y)) - EULER_GAMMA


def lamb_shift(params: PhysParams) -> float:
    """Real Lamb-shift value ``K = -(2 omega / pi^2) [Re psi(1 + i omega / a) + gamma]``.

    Raises
    ------
    UnsupportedBranchError
        For ``a == 0``; :func:`response` handles that case by returning 0.
    """
    if params.a <= 0:
        raise UnsupportedBranchError(
            "lamb_shift needs a > 0; the inertial branch (a = 0) is K = 0, see response()"
        )
    return -(2.0 * params.omega / math.pi**2) * _digamma_shifted(params.omega / params.a)


def response(params: PhysParams) -> BathSpectrum:
    """Closed-form response functions for ``params``.

    For ``a > 0`` the emission/absorption weights follow detailed balance at
    temperature ``a / 2 pi``; for ``a == 0`` only spontaneous emission survives
    and the Lamb shift vanishes.
    """
    if not isinstance(params, PhysParams):
        raise InvalidParameterError("response() expects a PhysParams instance")
    w, a = params.omega, params.a
    base = w / (2.0 * math.pi)
    if a == 0:
        return BathSpectrum(params, base, 0.0, 0.0, base, base, 1.0, 0.0, 0.0)
    x = 2.0 * math.pi * w / a
    # expm1 keeps the Bose factor accurate for small x; large x underflows g_neg to 0 cleanly.
    if x > 700:
        bose = 0.0
        p2 = 0.0
    else:
        bose = 1.0 / math.expm1(x)
        p2 = 1.0 / (1.0 + math.exp(x))
    g_neg = base * bose
    g_pos = base + g_neg  # e^x / (e^x - 1) = 1 + 1 / (e^x - 1)
    p1 = 1.0 / (1.0 + math.exp(-x))
    return BathSpectrum(
        params=params,
        g_pos=g_pos,
        g_neg=g_neg,
        g_zero=a / (4.0 * math.pi**2),
        g_plus=g_pos + g_neg,
        g_minus=g_pos - g_neg,
        p1=p1,
        p2=p2,
        k_minus=lamb_shift(params),
    )


def _fourier_once(params: PhysParams, sign: int, eps: float, cutoff: float, order: int) -> complex:
    a, w = params.a, params.omega
    delta = 2.0 * eps / a  # distance of the nearest pole from the real axis
    # Geometric panels resolve the 1/(s - i delta)^2 spike; uniform panels the oscillation.
    inner_edge = min(4.0 / a, cutoff)
    geo = [0.0]
    x = 0.5 * delta
    while x < inner_edge:
        geo.append(x)
        x *= 2.0
    geo.append(inner_edge)
    outer = uniform_breakpoints(inner_edge, cutoff, 0.5 * min(1.0 / a, 1.0 / w))[1:] if cutoff > inner_edge else []
    half = np.concatenate([np.asarray(geo), np.asarray(outer, dtype=float)])
    half = np.unique(half)
    breaks = np.concatenate([-half[:0:-1], half])
    nodes, weights = composite_rule(breaks, order)
    integrand = np.exp(1j * sign * w * nodes) * wightman(params, nodes, eps)
    return complex(np.sum(weights * integrand))


def fourier_response_numeric(
    params: PhysParams,
    sign: int = 1,
    eps: float | None = None,
    cutoff: float | None = None,
    n: int = 16,
    *,
    extrapolate: bool = True,
    tol: float = 1e-6,
    max_order: int = 256,
    return_complex: bool = False,
):
    """Brute-force Fourier transform of the Wightman function at frequency ``sign * omega``.

    Integrates ``exp(i sign omega s) W(s)`` over ``[-cutoff, cutoff]`` with
    composite Gauss-Legendre panels (``n`` nodes per panel, doubled until the
    result moves by less than ``tol``).  The finite regulator shifts the
    result by a factor ``1 + O(eps)``; with ``extrapolate`` the integral is
    evaluated at ``eps`` and ``eps / 2`` and combined to cancel that term.

    Parameters
    ----------
    sign : {+1, -1}
    eps : float, optional
        iε regulator inside the sinh; must lie in ``(0, 0.1 / a]``.  Defaults
        to ``1e-3 * min(1 / a, a / omega)``.
    cutoff : float, optional
        Integration half-width, at least ``40 / a`` (default ``60 / a``).

    Returns
    -------
    float
        The real part, or the complex value when ``return_complex`` is set.

    Raises
    ------
    QuadratureError
        If doubling the panel order past ``max_order`` still changes the result by more than ``tol``.
    """
    if sign not in (1, -1):
        raise InvalidParameterError(f"sign must be +1 or -1, got {sign!r}")
    if params.a <= 0:
        raise UnsupportedBranchError("the numeric Fourier oracle needs a > 0")
    a = params.a
    if eps is None:
        eps = 1e-3 * min(1.0 / a, a / params.omega)
    if not (0 < eps <= 0.1 / a):
        raise InvalidRegulatorError(f"eps must lie in (0, 0.1/a] = (0, {0.1 / a!r}], got {eps!r}")
    if cutoff is None:
        cutoff = 60.0 / a
    if cutoff < 40.0 / a:
        raise InvalidParameterError(f"cutoff must be >= 40/a = {40.0 / a!r}, got {cutoff!r}")

    def converged(e: float) -> complex:
        order = n
        residual = float("inf")
        prev = _fourier_once(params, sign, e, cutoff, order)
        while True:
            order *= 2
            if order > max_order:
                raise QuadratureError("Fourier oracle did not converge under order doubling", residual)
            cur = _fourier_once(params, sign, e, cutoff, order)
            residual = abs(cur - prev)
            if residual < tol:
                return cur
            prev = cur

    value = converged(eps)
    if extrapolate:
        value = 2.0 * converged(0.5 * eps) - value
    return value if return_complex else value.real


def _damped_sum(y2: float, eps: float) -> float:
    # sum_{n>=1} n e^{-eps n} / (n^2 + y^2), truncated once e^{-eps n} < e^{-45}
    N = int(math.ceil(45.0 / eps))
    n = np.arange(1, N + 1, dtype=float)
    return float(np.sum(n * np.exp(-eps * n) / (n * n + y2)))


def lamb_shift_regularized_sum(
    params: PhysParams,
    eps_grid=(1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5),
    *,
    tol: float = 1e-5,
    return_diagnostics: bool = False,
):
    """Independent evaluation of the Lamb shift from the damped mode sum.

    For each damping ``eps`` the sum ``S(eps) = sum_n n e^{-eps n}/(n^2 + (omega/a)^2)``
    is computed term by term, its logarithmic divergence ``ln(1/eps)`` is
    removed, and the remainder (linear in ``eps``) is extrapolated to zero
    with two-point Richardson steps on consecutive grid entries.  The value
    returned uses the two smallest dampings, assembled as
    ``(omega / pi^2) * lim [2 S(eps) - 2 ln(1/eps)]``.

    Raises
    ------
    RegularizationError
        If the last two Richardson estimates disagree by more than ``tol``
        (after scaling to the Lamb shift).
    """
    if params.a <= 0:
        raise UnsupportedBranchError("the regularized sum needs a > 0")
    eps = [float(e) for e in eps_grid]
    if len(eps) < 2:
        raise InvalidRegulatorError("eps_grid needs at least two entries")
    if any(not (0 < e < 1) for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidRegulatorError("eps_grid must be strictly decreasing within (0, 1)")
    y2 = (params.omega / params.a) ** 2
    scale = 2.0 * params.omega / math.pi**2
    finite = [_damped_sum(y2, e) - math.log(1.0 / e) for e in eps]
    rich = tuple(
        scale * (e0 * f1 - e1 * f0) / (e0 - e1)
        for e0, e1, f0, f1 in zip(eps, eps[1:], finite, finite[1:])
    )
    value = rich[-1]
    residual = abs(rich[-1] - rich[-2]) if len(rich) > 1 else 0.0
    if residual > tol:
        raise RegularizationError("Richardson estimates of the Lamb shift disagree", residual, rich)
    if return_diagnostics:
        return value, {"eps": tuple(eps), "finite_parts": tuple(finite), "richardson": rich, "residual": residual}
    return value

"""Reduced-state dynamics of the battery under its GKSL master equation.

States live in the eigenbasis ``{|+>, |->}`` of the system Hamiltonian
(eigenvalues ``+omega`` and ``-omega``) and are vectorized row-major as
``(rho_pp, rho_pm, rho_mp, rho_mm)``.  In that basis

    sigma_x = diag(1, -1),  sigma_y = i(|+><-| - |-><+|),  sigma_z = |+><-| + |-><+|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstructionError,
    IntegrationError,
    InvalidParameterError,
    NoSteadyStateError,
)
from .spectral import BathSpectrum, PhysParams

SIGMA_X = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[0, 1], [1, 0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

_RESYMMETRIZE_THRESHOLD = 1e-12
_FAILURE_THRESHOLD = 1e-8
_PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive 2x2 state in the ``|+>, |->`` basis."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex).reshape(2, 2)
        if not np.allclose(m, m.conj().T, rtol=0, atol=1e-10):
            raise InvalidParameterError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-10:
            raise InvalidParameterError(f"density matrix trace is {np.trace(m)!r}, expected 1")
        det = (m[0, 0] * m[1, 1]).real - abs(m[0, 1]) ** 2
        if det < -_PSD_TOLERANCE or m[0, 0].real < -_PSD_TOLERANCE or m[1, 1].real < -_PSD_TOLERANCE:
            raise InvalidParameterError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def excited(cls) -> "DensityMatrix":
        """``|+><+|``, the initial state used throughout."""
        return cls(np.array([[1, 0], [0, 0]], dtype=complex))

    @classmethod
    def from_vector(cls, vec) -> "DensityMatrix":
        return cls(np.asarray(vec, dtype=complex).reshape(2, 2))

    @property
    def pp(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def mm(self) -> float:
        return float(self.matrix[1, 1].real)

    @property
    def pm(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def mp(self) -> complex:
        return complex(self.matrix[1, 0])

    def vector(self) -> np.ndarray:
        return self.matrix.reshape(4).copy()

    def expect(self, op) -> complex:
        return complex(np.trace(np.asarray(op) @ self.matrix))

    def __repr__(self):
        return f"DensityMatrix(pp={self.pp:.6g}, pm={self.pm:.6g}, mm={self.mm:.6g})"


def _super(left, right) -> np.ndarray:
    """Matrix of ``rho -> left @ rho @ right`` on row-major vectorization."""
    return np.kron(left, right.T)


@dataclass(frozen=True)
class GkslGenerator:
    """Liouvillian of the battery as a 4x4 matrix on the row-major vectorization.

    ``omega_eff`` is the Lamb-shifted prefactor of ``sigma_x`` in the
    effective Hamiltonian; ``rate_plus``, ``rate_minus`` and ``rate_zero``
    are ``mu^2 G_+ / 16``, ``mu^2 G_- / 16`` and ``mu^2 G(0) / 4``.
    """

    params: PhysParams
    spectrum: BathSpectrum
    matrix: np.ndarray = field(repr=False)
    omega_eff: float
    rate_plus: float
    rate_minus: float
    rate_zero: float

    def apply(self, rho) -> np.ndarray:
        """Time derivative of ``rho`` (a 2x2 array or length-4 vector), same shape back."""
        arr = np.asarray(rho, dtype=complex)
        return (self.matrix @ arr.reshape(4)).reshape(arr.shape)

    def max_step(self) -> float:
        """Largest admissible RK4 step: resolves both the phase and the population decay."""
        h = 0.01 / self.params.omega
        decay = self.params.mu**2 * self.spectrum.g_plus
        if decay > 0:
            h = min(h, 0.04 / decay)
        return h

    def default_step(self) -> float:
        return 0.1 * self.max_step()


def build_generator(params: PhysParams, spectrum: BathSpectrum) -> GkslGenerator:
    """Assemble the GKSL generator from the effective Hamiltonian and the Pauli-form dissipator."""
    if spectrum.params != params:
        raise ConstructionError(f"spectrum was computed for {spectrum.params}, not {params}")
    mu2 = params.mu**2
    omega_eff = params.omega + mu2 * spectrum.k_minus / 16.0
    h_eff = omega_eff * SIGMA_X
    I = IDENTITY
    L = -1j * (_super(h_eff, I) - _super(I, h_eff))

    def lindblad_pair(A, B):
        # 2 A rho B - B A rho - rho B A
        return 2 * _super(A, B) - _super(B @ A, I) - _super(I, B @ A)

    L = L + 0.5 * mu2 * (
        spectrum.g_plus / 16.0 * (lindblad_pair(SIGMA_Z, SIGMA_Z) + lindblad_pair(SIGMA_Y, SIGMA_Y))
        + 1j * spectrum.g_minus / 16.0 * (lindblad_pair(SIGMA_Y, SIGMA_Z) - lindblad_pair(SIGMA_Z, SIGMA_Y))
        + spectrum.g_zero / 4.0 * lindblad_pair(SIGMA_X, SIGMA_X)
    )
    L.setflags(write=False)
    return GkslGenerator(
        params=params,
        spectrum=spectrum,
        matrix=L,
        omega_eff=omega_eff,
        rate_plus=mu2 * spectrum.g_plus / 16.0,
        rate_minus=mu2 * spectrum.g_minus / 16.0,
        rate_zero=mu2 * spectrum.g_zero / 4.0,
    )


def rk4_step_matrix(gen: GkslGenerator, h: float) -> np.ndarray:
    """One classical RK4 step of the linear ODE ``x' = L x`` written as a matrix."""
    hL = h * gen.matrix
    I = np.eye(4, dtype=complex)
    return I + hL @ (I + hL @ (I / 2 + hL @ (I / 6 + hL / 24)))


@dataclass
class PropagationStats:
    steps: int = 0
    resymmetrizations: int = 0
    max_drift: float = 0.0


def _state_drift(vec: np.ndarray, trace0: complex) -> float:
    herm = abs(vec[1] - np.conj(vec[2]))
    diag_imag = max(abs(vec[0].imag), abs(vec[3].imag))
    return max(abs(vec[0] + vec[3] - trace0), herm, diag_imag)


def evolve_vector(
    gen: GkslGenerator,
    vec,
    tau: float,
    h: float | None = None,
    *,
    check_states: bool = False,
    check_every: int = 256,
    stats: PropagationStats | None = None,
) -> np.ndarray:
    """Apply ``ceil(tau / h)`` RK4 steps to an arbitrary vectorized operator.

    Steps are applied in blocks of ``check_every``; with ``check_states`` the
    density-matrix invariants are checked after every block, re-imposed when
    they drift by more than 1e-12, and a drift beyond 1e-8 raises
    :class:`IntegrationError`.
    """
    if tau < 0:
        raise InvalidParameterError(f"tau must be >= 0, got {tau!r}")
    if h is None:
        h = gen.default_step()
    if not h > 0:
        raise InvalidParameterError(f"step must be > 0, got {h!r}")
    if h > gen.max_step() * (1 + 1e-12):
        raise InvalidParameterError(f"step {h!r} exceeds the admissible maximum {gen.max_step()!r}")
    x = np.array(vec, dtype=complex).reshape(4)
    if tau == 0:
        return x
    n = int(math.ceil(tau / h - 1e-12))
    step = rk4_step_matrix(gen, tau / n)
    block = np.linalg.matrix_power(step, check_every) if n >= check_every else None
    # States are held to unit trace; other operators keep whatever trace they start with.
    trace0 = complex(1.0) if check_states else x[0] + x[3]
    done = 0
    while done < n:
        if n - done >= check_every:
            x = block @ x
            done += check_every
        else:
            x = np.linalg.matrix_power(step, n - done) @ x
            done = n
        if check_states:
            drift = _state_drift(x, trace0)
            if stats is not None:
                stats.max_drift = max(stats.max_drift, drift)
            if drift > _FAILURE_THRESHOLD:
                raise IntegrationError("density-matrix invariant violated", done, done * tau / n, drift)
            if drift > _RESYMMETRIZE_THRESHOLD:
                m = x.reshape(2, 2)
                m = 0.5 * (m + m.conj().T)
                m = m / np.trace(m).real * trace0.real
                x = m.reshape(4)
                if stats is not None:
                    stats.resymmetrizations += 1
    if stats is not None:
        stats.steps += n
    return x


def propagate(
    gen: GkslGenerator,
    rho0: DensityMatrix,
    tau: float,
    h: float | None = None,
    *,
    stats: PropagationStats | None = None,
) -> DensityMatrix:
    """Propagate ``rho0`` for a duration ``tau`` with fixed-step RK4.

    ``h`` defaults to a tenth of :meth:`GkslGenerator.max_step`; larger steps
    than the maximum are rejected.
    """
    vec = evolve_vector(gen, rho0.vector(), tau, h, check_states=True, stats=stats)
    try:
        return DensityMatrix.from_vector(vec)
    except InvalidParameterError as exc:
        raise IntegrationError(str(exc), -1, tau, float("nan")) from exc


def trajectory(gen: GkslGenerator, rho0: DensityMatrix, taus, h: float | None = None,
               *, stats: PropagationStats | None = None) -> list[DensityMatrix]:
    """States at each time of a non-decreasing grid starting from ``taus[0] >= 0``."""
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or np.any(np.diff(taus) < 0) or taus[0] < 0:
        raise InvalidParameterError("taus must be a non-decreasing grid of times >= 0")
    out = []
    state, now = rho0, 0.0
    for t in taus:
        state = propagate(gen, state, float(t - now), h, stats=stats)
        now = float(t)
        out.append(state)
    return out


@dataclass(frozen=True)
class DecayConstants:
    d1: complex
    d2: complex
    d3: complex
    d4: complex
    r_pop: float


def decay_constants(params: PhysParams, spectrum: BathSpectrum) -> DecayConstants:
    """Coherence decay rates and the population relaxation rate.

    ``rho_pm(tau) = rho_pm(0) exp(-d1 tau)``; ``d3`` and ``d4`` are the
    Pauli-picture rates, equal to ``d1`` and ``d2`` once the Lamb shift is
    written through its real value.
    """
    mu2 = params.mu**2
    re = 0.5 * mu2 * (spectrum.g_zero + spectrum.g_plus / 4.0)
    im = 2.0 * params.omega + mu2 * spectrum.k_minus / 8.0
    # Pauli picture: 2 omega - i (mu^2 / 8) * (i K) is the same real frequency.
    im_pauli = (2.0 * params.omega - 1j * mu2 / 8.0 * (1j * spectrum.k_minus)).real
    return DecayConstants(
        d1=complex(re, im),
        d2=complex(re, -im),
        d3=complex(re, im_pauli),
        d4=complex(re, -im_pauli),
        r_pop=mu2 * spectrum.g_plus / 4.0,
    )


def _relaxation(params: PhysParams, spectrum: BathSpectrum, tau):
    tau = np.asarray(tau, dtype=float)
    return np.exp(-0.25 * params.mu**2 * spectrum.g_plus * tau)


def expect_sigma_x(params: PhysParams, spectrum: BathSpectrum, tau):
    """``<sigma_x>(tau)`` starting from ``|+><+|``: ``[-G_- + 2 G(omega) e^{-r tau}] / G_+``."""
    e = _relaxation(params, spectrum, tau)
    return (-spectrum.g_minus + 2.0 * spectrum.g_pos * e) / spectrum.g_plus


def expect_number(params: PhysParams, spectrum: BathSpectrum, tau):
    """Excited-state population ``<sigma_+ sigma_->(tau)`` starting from ``|+><+|``."""
    e = _relaxation(params, spectrum, tau)
    return (spectrum.g_neg + spectrum.g_pos * e) / spectrum.g_plus


def expect_antinumber(params: PhysParams, spectrum: BathSpectrum, tau):
    """Ground-state population ``<sigma_- sigma_+>(tau)``; complements :func:`expect_number`."""
    e = _relaxation(params, spectrum, tau)
    return spectrum.g_pos / spectrum.g_plus * (1.0 - e)


def steady_state(params: PhysParams, spectrum: BathSpectrum) -> tuple[DensityMatrix, np.ndarray]:
    """Fixed point ``diag(P2, P1)`` and the steady vector ``(0, 0, G(-omega)/G_+)``.

    Raises :class:`NoSteadyStateError` for ``mu == 0``, where every state is stationary
    up to unitary rotation.
    """
    if params.mu == 0:
        raise NoSteadyStateError("mu = 0 leaves the populations frozen; no unique steady state")
    p2 = spectrum.g_neg / spectrum.g_plus
    rho = DensityMatrix(np.diag([p2, 1.0 - p2]).astype(complex))
    return rho, np.array([0.0, 0.0, p2], dtype=complex)

"""Exception types raised across the package."""

from __future__ import annotations


class InvalidParameterError(ValueError):
    """A physical parameter is outside its admissible range."""


class InvalidRegulatorError(ValueError):
    """A regulator (iε prescription or damping) is not strictly positive."""


class UnsupportedBranchError(ValueError):
    """The requested formula is not defined on this parameter branch (e.g. a = 0)."""


class ConstructionError(ValueError):
    """Inputs that must describe the same physical system do not."""


class NoSteadyStateError(ValueError):
    """The generator has no unique fixed point (zero coupling)."""


class PoleProximityError(ValueError):
    """A frequency grid point sits on the resonance of a closed-form spectrum."""

    def __init__(self, omega: float, resonance: float):
        super().__init__(
            f"omega={omega!r} lies within 1e-6 of the resonance {resonance!r}"
        )
        self.omega = omega
        self.resonance = resonance


class ResolutionError(ValueError):
    """A quadrature grid cannot resolve the oscillation of its integrand."""


class NumericalFailure(RuntimeError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class QuadratureError(NumericalFailure):
    """Quadrature did not converge under refinement."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class RegularizationError(NumericalFailure):
    """The ε → 0 extrapolation of a regularized sum is not self-consistent."""

    def __init__(self, message: str, residual: float, estimates: tuple[float, ...]):
        super().__init__(f"{message} (residual={residual:.3e}, estimates={estimates})")
        self.residual = residual
        self.estimates = estimates


class IntegrationError(NumericalFailure):
    """A propagated state violated a density-matrix invariant."""

    def __init__(self, message: str, step: int, time: float, drift: float):
        super().__init__(f"{message} at step {step} (tau={time:.6g}, drift={drift:.3e})")
        self.step = step
        self.time = time
        self.drift = drift

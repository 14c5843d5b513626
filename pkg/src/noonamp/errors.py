"""Exception types raised across the package."""


class NoonAmpError(Exception):
    """Base class for all package errors."""


class BasisMismatchError(NoonAmpError, ValueError):
    """Two objects use different polarization bases or mode sets."""


class LeakageError(NoonAmpError, RuntimeError):
    """Truncation discarded more probability weight than the configured budget."""

    def __init__(self, leakage: float, budget: float, cutoff: int):
        self.leakage = leakage
        self.budget = budget
        self.cutoff = cutoff
        super().__init__(
            f"truncation leakage {leakage:.3e} exceeds budget {budget:.1e} at cutoff {cutoff}"
        )


class IntegrationError(NoonAmpError, RuntimeError):
    """The fixed-step integrator drifted beyond its norm bound."""


class UndefinedVisibilityError(NoonAmpError, ArithmeticError):
    """max + min of a fringe is zero, so the contrast is undefined."""


class DivergentRatioError(NoonAmpError, ArithmeticError):
    """A ratio whose denominator vanishes identically."""


class FormulaDomainError(NoonAmpError, ValueError):
    """Parameters outside the validity range of a closed-form expression."""

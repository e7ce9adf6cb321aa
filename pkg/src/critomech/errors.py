"""Exception and warning types raised across the package."""


class CritomechError(Exception):
    """Base class for all package errors."""


class InvalidParams(CritomechError, ValueError):
    """A parameter set violates its invariants (e.g. a negative rate)."""


class NonConvergence(CritomechError, RuntimeError):
    """An iterative solver failed to reach its residual tolerance."""


class EigenFailure(CritomechError, RuntimeError):
    """The eigenvalue solver did not converge."""


class TraceLost(CritomechError, RuntimeError):
    """A boundary tracer could not locate the requested curve."""


class ContinuationStall(CritomechError, RuntimeError):
    """Pseudo-arclength continuation shrank its step below the floor."""


class StepUnderflow(CritomechError, RuntimeError):
    """The adaptive integrator step collapsed."""


class NoOscillation(CritomechError, ValueError):
    """Too few maxima survive the transient cut to call a limit cycle."""


class SingularTransfer(CritomechError, ZeroDivisionError):
    """A frequency-domain transfer function is singular (chi_b or chi_F)."""


class RegimeWarning(UserWarning):
    """An approximate formula is used outside its validity regime."""


class MarginalStabilityWarning(UserWarning):
    """A Hurwitz determinant is numerically zero; the verdict is marginal."""

"""Exception hierarchy for the duct-flow solver.

Every error the library raises derives from :class:`DuctFlowError`, and each
top-level class carries the process exit code the command-line driver maps it
to.  Library code raises the most specific class available; callers that only
care about "did it work" can catch the base class.
"""


class DuctFlowError(Exception):
    """Base class for all solver errors."""

    exit_code = 1


class ValidationError(DuctFlowError):
    """Invalid inputs: configuration, parameters, or physical state data."""

    exit_code = 2


class NumericalError(DuctFlowError):
    """A numerical process failed: integration blow-up, divergence, ill
    conditioning, or loss of the subsonic regime during a solve."""

    exit_code = 3


class SConditionError(DuctFlowError):
    """Mode-solvability failure: the boundary-value determinant of some
    Fourier mode is (numerically) zero, so the linear pressure problem is
    not uniquely solvable for this duct length and mass-addition rate."""

    exit_code = 4


class StateError(ValidationError):
    """Invalid thermodynamic state: stagnation, vacuum, or sonic/supersonic
    values where a strictly subsonic non-degenerate state is required."""

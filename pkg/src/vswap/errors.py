"""Exception hierarchy.

Validation problems (bad input, bad parameters) and numerical problems
(resonance, non-convergence, invalid simulations) are kept apart so the
command line can map them onto distinct exit codes.
"""

from __future__ import annotations


class VSwapError(Exception):
    """Base class for all package errors."""


class ValidationError(VSwapError):
    """Input or parameter problem; the caller asked for something invalid."""


class NumericalError(VSwapError):
    """The computation itself failed or could not be trusted."""


class DomainError(ValidationError):
    """A function was evaluated outside of where it is defined."""


class ModelValidationError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class FormatError(ValidationError):
    """Malformed input file."""


class ResonanceError(NumericalError):
    """A divisor built from eigenvalues is (numerically) zero."""


class ConvergenceError(NumericalError):
    pass


class RangeError(NumericalError):
    """Overflow while evaluating an exponential moment."""


class IndeterminateRatioError(NumericalError):
    pass


class SimulationError(NumericalError):
    """Monte Carlo run flagged invalid (thinning violations, box exits)."""

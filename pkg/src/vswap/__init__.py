"""Variance swaps on time-changed Markov processes.

Solvers for the European payoff ``G`` whose price equals the fair variance
swap strike, static replication from an option smile, a Monte Carlo engine
that checks the pricing identity path by path, and a closed-form
approximation of the variance-swap to log-contract ratio.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DomainError,
    FormatError,
    IndeterminateRatioError,
    ModelValidationError,
    NumericalError,
    ParameterError,
    RangeError,
    ResonanceError,
    SimulationError,
    ValidationError,
    VSwapError,
)
from .kernel import LevyKernelAtLocation, kernel_moment  # noqa: E402
from .model import ModelSpec, apply_generator, drift_b, qv_rate, validate_model  # noqa: E402
from .payoff import Payoff, shift_gauge, to_price_space  # noqa: E402
from .solvers import (  # noqa: E402
    check_mixture_condition,
    fraclin_solve,
    mixture_coefficients,
    solve_mixture,
    solve_proportional,
)

__all__ = [
    "ConvergenceError",
    "DomainError",
    "FormatError",
    "IndeterminateRatioError",
    "LevyKernelAtLocation",
    "ModelSpec",
    "ModelValidationError",
    "NumericalError",
    "ParameterError",
    "Payoff",
    "RangeError",
    "ResonanceError",
    "SimulationError",
    "VSwapError",
    "ValidationError",
    "apply_generator",
    "check_mixture_condition",
    "drift_b",
    "fraclin_solve",
    "kernel_moment",
    "mixture_coefficients",
    "qv_rate",
    "shift_gauge",
    "solve_mixture",
    "solve_proportional",
    "to_price_space",
    "validate_model",
]

"""Data behind the four payoff plots and the ratio curve.

Payoff plots: ``h(F_T) = G(log F_T) - G(log F0) + A (F_T - F0)`` with ``A``
chosen so that ``h'(F0) = -Q0/F0``, against ``±Q0 log(F_T/F0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernel import EMPTY, LevyKernelAtLocation
from .payoff import to_price_space
from .ratio import figure5_model, identity_laplace, qbar_curve
from .solvers import kernel_ratio, mixture_coefficients, slope_match_constant, solve_mixture


def _dirac(z):
    return LevyKernelAtLocation.from_atoms([(z, 1.0)])


# (alpha, beta, c, delta, nu0, nu1)
FIGURE_PARAMS = {
    1: (0.0, 1.0, 0.23, 0.22, _dirac(1.0), EMPTY),
    2: (0.0, 1.0, -0.21, 1.0, _dirac(-1.0), EMPTY),
    3: (1.0, 0.0, 0.39, 1.25, EMPTY, _dirac(-1.5)),
    4: (1.0, 0.0, -1.05, 1.0, EMPTY, _dirac(1.75)),
}
FIGURE_F0 = 10.0


@dataclass
class FigureData:
    columns: list[str]
    rows: list | np.ndarray
    meta: dict


def payoff_figure(which: int, points: int = 400, F0: float = FIGURE_F0, lo: float = 0.2, hi: float = 3.0, tail_tol: float = 1e-6):
    if which not in FIGURE_PARAMS:
        raise ParameterError(f"payoff figures are 1-4, got {which}")
    if points < 2:
        raise ParameterError("need at least 2 points")
    alpha, beta, c, delta, nu0, nu1 = FIGURE_PARAMS[which]
    coeffs = mixture_coefficients(alpha, beta, c, delta, nu0, nu1)
    F = np.linspace(lo * F0, hi * F0, points)
    G, N = solve_mixture(coeffs, tail_tol, interval=(math.log(F[0]), math.log(F[-1])))
    A = slope_match_constant(G, coeffs.Q0, F0)
    h = to_price_space(G, F0, A)
    logr = np.log(F / F0)
    rows = np.column_stack([F, h(F), coeffs.Q0 * logr, -coeffs.Q0 * logr])
    meta = {
        "figure": which,
        "alpha": alpha,
        "beta": beta,
        "c": c,
        "delta": delta,
        "F0": F0,
        "Q0": coeffs.Q0,
        "Q1": coeffs.Q1,
        "A": A,
        "N": N,
        "tail_tol": tail_tol,
        "h_at_F0": h(F0),
        "h_slope_at_F0": h.d1(F0),
    }
    return FigureData(["F_T", "h", "Q0_log", "minus_Q0_log"], rows, meta), h


def ratio_figure(points: int = 100, lo: float = 0.2, hi: float = 20.0, N: int = 35, T: float = 1.0):
    if points < 2:
        raise ParameterError("need at least 2 points")
    model = figure5_model(N)
    F0s = np.linspace(lo, hi, points)
    res = qbar_curve(model, identity_laplace, T, F0s)
    rows = [[r.F0, r.value, r.N, r.outer_terms, r.last_outer_term] for r in res]
    pure_jump = kernel_ratio(model.nu)
    meta = {
        "figure": 5,
        "omega": model.omega,
        "c": model.c,
        "delta": model.delta,
        "z0": -1.0,
        "T": T,
        "N": N,
        "reference_no_jumps": "y=2",
        "reference_pure_jump": f"y=e ({pure_jump!r})",
    }
    return FigureData(["F0", "Qbar", "N", "outer_terms", "last_outer_term"], rows, meta)

"""Payoffs ``G`` with ``A G = a² + ∫ z² μ`` for three model families.

* constant relative jump intensity: ``G(x) = -Q x``;
* fractional-linear relative intensity: C¹ piecewise quadratic ``G`` and an
  intensity ``c(x)`` built so that the equation holds identically;
* Lévy mixture with weights ``1`` and ``δ e^{cx}``: an exponential series
  ``G = -Q0 x + Σ_n Q1 δⁿ a_n e^{ncx}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, ModelValidationError, ParameterError, RangeError, ResonanceError
from .kernel import EMPTY, LevyKernelAtLocation, kernel_moment, levy_moments
from .model import ConstVol, ModelSpec, apply_generator, mixture_model, proportional_model, qv_rate, single_atom_model
from .payoff import Payoff, QuadraticPiece, avoid_knots

RESONANCE_TOL = 1e-12
DEFAULT_N_MAX = 64
CONDITION_N_MAX = 100_000


# --------------------------------------------------------------------------- #
# Constant relative jump intensity
# --------------------------------------------------------------------------- #


def solve_proportional(sigma: float, nu: LevyKernelAtLocation = EMPTY) -> tuple[float, Payoff]:
    """Return ``(Q, G)`` with ``G(x) = -Q x`` and ``Q = (σ² + m2) / (σ²/2 + e0)``.

    Valid for ``a² = γ² σ²`` and ``μ = γ² ν`` with any positive bounded ``γ``.
    """
    m2, e0 = levy_moments(nu)
    den = 0.5 * sigma * sigma + e0
    if not den > 0:
        raise ModelValidationError("degenerate model: sigma = 0 and no jumps (zero denominator)")
    Q = (sigma * sigma + m2) / den
    return Q, Payoff(linear=-Q)


# --------------------------------------------------------------------------- #
# Fractional-linear relative jump intensity
# --------------------------------------------------------------------------- #


def fraclin_beta_bound(z0: float) -> float:
    return 1.0 - 2.0 * (math.exp(z0) - z0 - 1.0) / (z0 * z0)


def fraclin_bounds(alpha: float, beta: float, z0: float) -> tuple[float, float]:
    """Admissible knot window ``(γ0, γ3)``; knots must satisfy ``γ0 < γ1 < γ2 < γ3``."""
    if not z0 < 0:
        raise ParameterError(f"z0 must be negative, got {z0}")
    bound = fraclin_beta_bound(z0)
    if not 0 < beta < bound:
        raise ParameterError(f"beta must lie in (0, {bound:.6g}) for z0={z0}, got {beta}")
    k = z0 * z0 / (2.0 * (math.exp(z0) - z0 - 1.0))
    gamma3 = -alpha / (2.0 * beta) - 1.0 / beta
    gamma0 = -alpha / (2.0 * beta) + k * (1.0 - 1.0 / beta)
    return gamma0, gamma3


def _fraclin_ratio(G: Payoff, z0: float, x) -> np.ndarray:
    """``c(x) / a²(x)``."""
    x = np.asarray(x, dtype=float)
    g1 = G.eval(x, 1)
    num = 0.5 * (G.eval(x, 2) - g1 - 2.0)
    den = G.eval(x, 0) - G.eval(x + z0, 0) + math.expm1(z0) * g1 + z0 * z0
    return num / den


def fraclin_solve(
    alpha: float, beta: float, z0: float, gamma1: float, gamma2: float, vol: Callable
) -> tuple[Payoff, Callable]:
    """Piecewise-quadratic ``G`` and the jump intensity ``c(x)`` that makes it exact.

    ``c(x) = a²(x)/2 · (G'' - G' - 2) / (G(x) - G(x+z0) + (e^{z0} - 1) G'(x) + z0²)``.
    """
    gamma0, gamma3 = fraclin_bounds(alpha, beta, z0)
    if not gamma0 < gamma1 < gamma2 < gamma3:
        raise ParameterError(
            f"knots must satisfy {gamma0:.6g} < gamma1 < gamma2 < {gamma3:.6g}, got gamma1={gamma1}, gamma2={gamma2}"
        )
    G = Payoff(pieces=(QuadraticPiece(alpha, beta, gamma1, gamma2),))

    def c(x):
        a = np.asarray(vol(x), dtype=float)
        out = a * a * _fraclin_ratio(G, z0, x)
        return float(out) if np.ndim(x) == 0 else out

    return G, c


def fraclin_model(
    alpha: float,
    beta: float,
    z0: float,
    gamma1: float,
    gamma2: float,
    vol=None,
    domain: tuple[float, float] | None = None,
) -> tuple[ModelSpec, Payoff]:
    """Model ``(a², c(x) δ_{z0})`` together with its pricing payoff."""
    vol = ConstVol(0.2) if vol is None else vol
    G, c = fraclin_solve(alpha, beta, z0, gamma1, gamma2, vol)
    if domain is None:
        domain = (gamma1 + z0 - 1.0, gamma2 - z0 + 1.0)
    # c/a² is constant outside [gamma1, gamma2 - z0]; a fine grid over that window bounds it
    window = np.linspace(gamma1 - 0.5, gamma2 - z0 + 0.5, 4001)
    ratio_sup = float(np.max(_fraclin_ratio(G, z0, np.concatenate([window, [gamma1, gamma2, gamma2 - z0]]))))
    vol_sup = vol.sup(*domain) if hasattr(vol, "sup") else float(np.max(np.abs(vol(np.linspace(*domain, 2001)))))
    model = single_atom_model(
        vol,
        z0,
        c,
        domain=domain,
        intensity_sup=vol_sup**2 * ratio_sup,
        name="fraclin",
        config={
            "vol": vol.to_dict() if hasattr(vol, "to_dict") else {"kind": "custom"},
            "kernel": {"kind": "fraclin", "alpha": alpha, "beta": beta, "z0": z0, "gamma1": gamma1, "gamma2": gamma2},
            "domain": list(domain),
        },
    )
    return model, G


# --------------------------------------------------------------------------- #
# Lévy mixture with state-dependent weights
# --------------------------------------------------------------------------- #


def _eigen(lam, coeff: float, nu: LevyKernelAtLocation):
    lam_arr = np.asarray(lam)
    scalar = lam_arr.ndim == 0
    lam_arr = np.atleast_1d(lam_arr)
    z, w = nu.nodes_and_weights()
    with np.errstate(over="ignore", invalid="ignore"):
        jump = (np.exp(np.multiply.outer(lam_arr, z)) - 1.0 + np.multiply.outer(lam_arr, -np.expm1(z))) * w
        out = coeff * (lam_arr * lam_arr - lam_arr) + jump.sum(axis=-1)
    return out[0] if scalar else out


def eigen_phi(lam, alpha: float, nu0: LevyKernelAtLocation = EMPTY):
    """``φ_λ = α(λ² - λ) + ∫ (e^{λz} - 1 + (1 - e^z) λ) ν0(dz)``, the eigenvalue of ``A0`` on ``e^{λx}``.

    Raises:
        RangeError: if ``e^{λz}`` overflows for some atom.
    """
    return _checked_eigen(lam, alpha, nu0)


def eigen_chi(lam, beta: float, nu1: LevyKernelAtLocation = EMPTY):
    """``χ_λ``: same form as :func:`eigen_phi` with ``(β, ν1)``."""
    return _checked_eigen(lam, beta, nu1)


def _checked_eigen(lam, coeff, nu):
    z, w = nu.nodes_and_weights()
    for zi, wi in zip(z, w):
        if wi == 0:
            continue
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.exp(np.asarray(lam) * zi)
        if not np.all(np.isfinite(vals)):
            bad = np.atleast_1d(np.asarray(lam))[~np.isfinite(np.atleast_1d(vals))][0]
            raise RangeError(f"exp(lambda*z) overflows at lambda={bad}, z={zi}")
    return _eigen(lam, coeff, nu)


def _eigen_scale(lam, coeff, nu) -> np.ndarray:
    """Magnitude used to decide whether an eigenvalue is numerically zero."""
    lam = np.asarray(lam, dtype=float)
    z, w = nu.nodes_and_weights()
    with np.errstate(over="ignore"):
        jump = ((np.abs(np.expm1(np.multiply.outer(lam, z))) + np.abs(np.multiply.outer(lam, np.expm1(z)))) * w).sum(-1)
    return abs(coeff) * (lam * lam + np.abs(lam)) + jump


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients of ``G = -Q0 x + Q1 Σ_{n≥1} a_n (δ e^{cx})ⁿ``.

    ``phi_table[k-1]``, ``chi_table[k-1]`` hold ``φ_{kc}``, ``χ_{kc}`` for
    ``k = 1..N``; ``a_n[n-1]`` holds ``a_n``.
    """

    Q0: float
    Q1: float
    c: float
    delta: float
    a_n: np.ndarray
    N: int
    phi_table: np.ndarray
    chi_table: np.ndarray
    jump_support: tuple[float, float] = (0.0, 0.0)
    params: dict = field(default_factory=dict, compare=False)

    @property
    def b_n(self) -> np.ndarray:
        """``Q1 δⁿ a_n``: coefficient of ``e^{ncx}`` in ``G``."""
        n = np.arange(1, self.N + 1)
        return self.Q1 * self.delta**n * self.a_n

    def rows(self) -> list[tuple[int, float, float, float]]:
        return [(k + 1, float(self.a_n[k]), float(self.phi_table[k]), float(self.chi_table[k])) for k in range(self.N)]


def mixture_coefficients(
    alpha: float,
    beta: float,
    c: float,
    delta: float,
    nu0: LevyKernelAtLocation = EMPTY,
    nu1: LevyKernelAtLocation = EMPTY,
    N: int = DEFAULT_N_MAX + 1,
) -> SeriesCoefficients:
    """``Q0``, ``Q1`` and ``a_n = (1/φ_{nc}) Π_{k<n} (-χ_{kc}/φ_{kc})`` for ``n = 1..N``.

    Raises:
        ResonanceError: if some ``φ_{kc}`` vanishes (relative tolerance 1e-12).
        ModelValidationError: if the denominator of ``Q0`` is not positive.
    """
    m2_0, e_0 = levy_moments(nu0)
    m2_1, e_1 = levy_moments(nu1)
    den = alpha + e_0
    if not den > 0:
        raise ModelValidationError("Q0 denominator alpha + ∫(e^z - 1 - z) nu0 must be positive")
    Q0 = (2.0 * alpha + m2_0) / den
    Q1 = 2.0 * beta + m2_1 - Q0 * (beta + e_1)

    lams = c * np.arange(1, N + 1)
    phi = np.asarray(eigen_phi(lams, alpha, nu0), dtype=float)
    chi = np.asarray(eigen_chi(lams, beta, nu1), dtype=float)
    scale = _eigen_scale(lams, alpha, nu0)
    small = np.abs(phi) <= RESONANCE_TOL * np.maximum(scale, 1e-300)
    if np.any(small):
        k = int(np.argmax(small)) + 1
        raise ResonanceError(f"phi_(k c) vanishes at k={k} (c={c}); the series is not defined")
    a = np.empty(N)
    prod = 1.0
    for n in range(1, N + 1):
        a[n - 1] = prod / phi[n - 1]
        prod *= -chi[n - 1] / phi[n - 1]
    lo0, hi0 = nu0.support
    lo1, hi1 = nu1.support
    return SeriesCoefficients(
        Q0=Q0,
        Q1=Q1,
        c=c,
        delta=delta,
        a_n=a,
        N=N,
        phi_table=phi,
        chi_table=chi,
        jump_support=(min(lo0, lo1), max(hi0, hi1)),
        params={"alpha": alpha, "beta": beta, "nu0": nu0, "nu1": nu1},
    )


def series_terms(coeffs: SeriesCoefficients, n_max: int | None = None) -> list[Payoff]:
    """``[G_0, G_1, ...]`` without the ``δⁿ`` factors."""
    n_max = coeffs.N if n_max is None else n_max
    out = [Payoff(linear=-coeffs.Q0)]
    for n in range(1, n_max + 1):
        out.append(Payoff(exps=((coeffs.Q1 * coeffs.a_n[n - 1], n * coeffs.c),)))
    return out


@dataclass
class ConditionReport:
    r: np.ndarray
    n: np.ndarray
    decay_exponent: float
    threshold: float
    passed: bool

    @property
    def last(self) -> float:
        return float(self.r[-1])

    def to_dict(self) -> dict:
        return {
            "r_last": self.last,
            "n_max": int(self.n[-1]),
            "decay_exponent": self.decay_exponent,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def check_mixture_condition(
    alpha: float,
    beta: float,
    c: float,
    nu0: LevyKernelAtLocation = EMPTY,
    nu1: LevyKernelAtLocation = EMPTY,
    n_max: int = CONDITION_N_MAX,
    threshold: float = 1e-3,
) -> ConditionReport:
    """Ratio test ``r_n = |χ_{nc} / φ_{(n+1)c}|`` for the series coefficients.

    Passes when ``r_{n_max} < threshold``.  ``decay_exponent`` is the slope of
    ``log r_n`` against ``log n`` over the upper half of the finite, positive
    values (``-1`` means ``r_n ~ 1/n``).  Overflowing eigenvalues yield
    ``r_n = inf`` (numerator) or ``0`` (denominator).
    """
    if n_max < 2:
        raise ParameterError("n_max must be >= 2")
    n = np.arange(1, n_max + 1)
    chi = _eigen(c * n, beta, nu1)
    phi = _eigen(c * (n + 1), alpha, nu0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(chi / phi)
    r = np.where(np.isinf(phi) & np.isfinite(chi), 0.0, r)
    ok = np.isfinite(r) & (r > 0)
    half = ok & (n >= n_max // 2)
    slope = float("nan")
    if half.sum() >= 2:
        slope = float(np.polyfit(np.log(n[half]), np.log(r[half]), 1)[0])
    passed = bool(np.isfinite(r[-1]) and r[-1] < threshold)
    return ConditionReport(r=r, n=n, decay_exponent=slope, threshold=threshold, passed=passed)


def _term_sup(coeffs: SeriesCoefficients, n: int, lo: float, hi: float) -> float:
    """Sup over ``[lo, hi]`` of ``|T| + |T'| + |T''|`` for ``T = b_n e^{ncx}``."""
    b = coeffs.Q1 * coeffs.delta**n * coeffs.a_n[n - 1]
    if b == 0.0:
        return 0.0
    lam = n * coeffs.c
    edge = hi if lam >= 0 else lo
    return float(abs(b) * math.exp(min(lam * edge, 700.0)) * (1.0 + abs(lam) + lam * lam))


def solve_mixture(
    coeffs: SeriesCoefficients,
    tail_tol: float = 1e-6,
    interval: tuple[float, float] = (math.log(2.0), math.log(30.0)),
    n_max: int | None = None,
) -> tuple[Payoff, int]:
    """Truncate the series at the first order whose successor is below ``tail_tol``.

    A term is measured by the sup of ``|T| + |T'| + |T''|`` over ``interval``
    widened by the jump support of ``ν0`` and ``ν1`` (the generator evaluates
    ``G(x + z)`` and the first two derivatives), so the generator residual of
    the truncated series is bounded by a model constant times ``tail_tol``.

    Raises:
        ConvergenceError: if no order ``<= n_max`` (default: all available
            coefficients minus one) meets the tolerance.
    """
    if coeffs.delta == 0.0 or coeffs.Q1 == 0.0:
        return Payoff(linear=-coeffs.Q0), 0
    n_max = coeffs.N - 1 if n_max is None else min(n_max, coeffs.N - 1)
    lo = interval[0] + coeffs.jump_support[0]
    hi = interval[1] + coeffs.jump_support[1]
    for N in range(0, n_max + 1):
        if _term_sup(coeffs, N + 1, lo, hi) < tail_tol:
            b = coeffs.b_n[:N]
            exps = tuple((float(b[n - 1]), n * coeffs.c) for n in range(1, N + 1))
            return Payoff(linear=-coeffs.Q0, exps=exps), N
    achieved = _term_sup(coeffs, n_max + 1, lo, hi)
    raise ConvergenceError(f"series tail {achieved:.3g} still above {tail_tol:.3g} after {n_max} terms")


def slope_match_constant(G: Payoff, Q0: float, F0: float) -> float:
    """``A = -(1/F0) Σ_{n≥1} δⁿ G_n'(log F0)`` for ``G = -Q0 x + Σ δⁿ G_n``."""
    if not F0 > 0:
        raise DomainError("F0 must be positive")
    return -(G.eval(math.log(F0), 1) + Q0) / F0


def mixture_model_from_coefficients(
    coeffs: SeriesCoefficients, sigma0_sq: float = 2.0, domain: tuple[float, float] = (-3.0, 3.0)
) -> ModelSpec:
    p = coeffs.params
    return mixture_model(p["alpha"], p["beta"], coeffs.delta, coeffs.c, p["nu0"], p["nu1"], sigma0_sq, domain)


def sub_generators(alpha: float, beta: float, nu0=EMPTY, nu1=EMPTY) -> tuple[ModelSpec, ModelSpec]:
    """Models whose generators are ``A0 = α(∂² - ∂) + ∫ν0`` and ``A1 = β(∂² - ∂) + ∫ν1``."""
    return proportional_model(math.sqrt(2.0 * alpha), nu0), proportional_model(math.sqrt(2.0 * beta), nu1)


def generator_residual(model: ModelSpec, G: Payoff, x) -> np.ndarray:
    """``A G(x) - qv_rate(x)`` on a grid, with grid points nudged off payoff knots."""
    x = avoid_knots(G, x)
    return np.asarray(apply_generator(model, G, x)) - np.asarray(qv_rate(model, x))


def kernel_ratio(nu: LevyKernelAtLocation) -> float:
    """``m2 / e0`` computed directly from the measure (pure-jump limit of ``Q``)."""
    m2 = kernel_moment(nu, lambda z: z * z)
    e0 = kernel_moment(nu, lambda z: np.exp(z) - 1.0 - z)
    return m2 / e0

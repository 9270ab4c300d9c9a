"""N-th order approximation of European values and of the VS/log-contract ratio.

Model: log-price ``Y`` with generator ``ω²(∂² - ∂) + δ e^{cx} ω² ∫(…) ν(dz)``
(Lévy mixture with ``α = 1``, ``β = 0``, ``σ0² = 2ω²`` and downward jumps
``ν``), run on a clock independent of ``Y`` with known Laplace transform
``L(t, λ) = E e^{λ τ_t}``.

Writing ``p_k = ω² φ_{(m+k)c}`` with ``φ_λ = λ² - λ``, the expansion of
``E e^{mcY_t}`` in powers of ``δ`` is

    v̄_N = Σ_{n≤N} δⁿ L[p_0, …, p_n] e^{(m+n)cx} Π_{k<n} ω² χ_{(m+k)c}

where ``L[…]`` is the divided difference of ``p ↦ L(t, p)``.  Divided
differences cancel heavily in double precision, so they are formed with
mpmath.  ``E Y_t`` is the derivative in ``s`` at ``s = 0`` of the same sum
over the shifted family ``s + kc`` (evaluated by a complex step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath as mp
import numpy as np

from .errors import IndeterminateRatioError, ModelValidationError, ParameterError, ResonanceError
from .kernel import EMPTY, LevyKernelAtLocation
from .model import ModelSpec, mixture_model
from .solvers import check_mixture_condition, mixture_coefficients

RESONANCE_TOL = 1e-9
DPS = 80
COMPLEX_STEP = 1e-20
OUTER_REL_TOL = 1e-12

ClockLaplace = Callable[[object, object], object]


def identity_laplace(t, lam):
    """``L(t, λ) = e^{tλ}`` (no time change)."""
    return mp.exp(t * lam)


CLOCK_LAPLACE: dict[str, ClockLaplace] = {"identity": identity_laplace}


@dataclass(frozen=True)
class RatioModel:
    omega: float
    c: float
    delta: float
    nu: LevyKernelAtLocation
    N: int = 35
    check_condition: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.omega > 0:
            raise ModelValidationError("omega must be positive")
        if not self.c > 0:
            raise ModelValidationError("c must be positive")
        if not self.delta >= 0:
            raise ModelValidationError("delta must be >= 0")
        if self.N < 0:
            raise ParameterError("N must be >= 0")
        if self.nu.support[1] > 0:
            raise ModelValidationError("jumps must be downward: nu must vanish on (0, inf)")
        if self.check_condition:
            rep = check_mixture_condition(1.0, 0.0, self.c, EMPTY, self.nu)
            if not rep.passed:
                raise ModelValidationError(f"series condition fails: r_n = {rep.last:.3g} at n = {int(rep.n[-1])}")

    @property
    def sigma0_sq(self) -> float:
        return 2.0 * self.omega**2

    def as_model_spec(self, domain=(-3.0, 3.0)) -> ModelSpec:
        return mixture_model(1.0, 0.0, self.delta, self.c, EMPTY, self.nu, self.sigma0_sq, domain)

    def _atoms(self):
        z, w = self.nu.nodes_and_weights()
        return [(mp.mpf(float(zi)), mp.mpf(float(wi))) for zi, wi in zip(z, w) if wi != 0]

    def phi(self, lam):
        return lam * lam - lam

    def chi(self, lam, atoms=None):
        atoms = self._atoms() if atoms is None else atoms
        return mp.fsum(w * (mp.exp(lam * z) - 1 + (1 - mp.exp(z)) * lam) for z, w in atoms)


def divided_differences(f: Callable, nodes) -> list:
    """``[f[p0], f[p0, p1], …, f[p0, …, pn]]`` by the Newton recurrence."""
    p = list(nodes)
    d = [f(pk) for pk in p]
    out = [d[0]]
    for j in range(1, len(p)):
        for i in range(len(p) - 1, j - 1, -1):
            d[i] = (d[i] - d[i - 1]) / (p[i] - p[i - j])
        out.append(d[j])
    return out


def _check_resonance(lams, tol=RESONANCE_TOL):
    phis = [float(mp.re(lam * lam - lam)) for lam in lams]
    scale = max(1.0, max(abs(v) for v in phis))
    for k in range(len(phis)):
        for j in range(k):
            if abs(phis[k] - phis[j]) <= tol * scale:
                raise ResonanceError(
                    f"eigenvalues phi at orders k={k} and j={j} coincide (gap {abs(phis[k] - phis[j]):.3g}); "
                    "perturb c by about 1e-6"
                )


def _coefficients(model: RatioModel, L: ClockLaplace, t, lams):
    """``C_n = δⁿ L[p_0..p_n] Π_{k<n} ω² χ_{λ_k}`` for the exponent family ``lams``."""
    w2 = mp.mpf(model.omega) ** 2
    nodes = [w2 * model.phi(lam) for lam in lams]
    dd = divided_differences(lambda p: L(t, p), nodes)
    atoms = model._atoms()
    delta = mp.mpf(model.delta)
    out, prod = [], mp.mpf(1)
    for n, lam in enumerate(lams):
        out.append(delta**n * dd[n] * prod)
        prod *= w2 * model.chi(lam, atoms)
    return out


def _exp_family(model: RatioModel, m, N, shift=0):
    c = mp.mpf(model.c)
    return [shift + (m + k) * c for k in range(N + 1)]


@dataclass
class VbarTerms:
    """Per-order terms of ``v̄_N`` at one point; ``value`` is their sum."""

    terms: list

    @property
    def value(self) -> float:
        return float(mp.re(mp.fsum(self.terms)))

    def partial(self, n: int) -> float:
        return float(mp.re(mp.fsum(self.terms[: n + 1])))


def vbar_exp_terms(model: RatioModel, L: ClockLaplace, t: float, x: float, m: int, N: int | None = None) -> VbarTerms:
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise ParameterError(f"m must be a positive integer, got {m}")
    N = model.N if N is None else N
    with mp.workdps(DPS):
        lams = _exp_family(model, m, N)
        _check_resonance(lams)
        C = _coefficients(model, L, mp.mpf(t), lams)
        xm = mp.mpf(x)
        terms = [C[n] * mp.exp(lams[n] * xm) for n in range(N + 1)]
        for term in terms:
            if abs(mp.im(term)) > 1e-10 * max(1, abs(mp.re(term))):
                raise ParameterError("clock Laplace transform returned a non-real value on the real axis")
        return VbarTerms([+mp.re(term) for term in terms])


def vbar_exp(model: RatioModel, L: ClockLaplace, t: float, x: float, m: int, N: int | None = None) -> float:
    """Order-``N`` approximation of ``E e^{mcY_t}`` given ``Y_0 = x``.

    Raises:
        ResonanceError: two of the eigenvalues ``φ_{(m+k)c}`` coincide.
    """
    return vbar_exp_terms(model, L, t, x, m, N).value


def vbar_id_terms(model: RatioModel, L: ClockLaplace, t: float, x: float, N: int | None = None) -> VbarTerms:
    N = model.N if N is None else N
    with mp.workdps(DPS):
        _check_resonance(_exp_family(model, 0, N))
        h = mp.mpf(COMPLEX_STEP)
        lams = _exp_family(model, 0, N, shift=mp.mpc(0, h))
        C = _coefficients(model, L, mp.mpf(t), lams)
        xm = mp.mpf(x)
        # d/ds at s = 0 of an analytic function real on the real axis = Im f(ih) / h
        return VbarTerms([mp.im(C[n] * mp.exp(lams[n] * xm)) / h for n in range(N + 1)])


def vbar_id(model: RatioModel, L: ClockLaplace, t: float, x: float, N: int | None = None) -> float:
    """Order-``N`` approximation of ``E Y_t`` given ``Y_0 = x``."""
    return vbar_id_terms(model, L, t, x, N).value


@dataclass
class QbarResult:
    F0: float
    value: float
    N: int
    outer_terms: int
    last_outer_term: float
    last_inner_term: float
    denominator: float

    def to_dict(self) -> dict:
        return vars(self).copy()


class RatioApproximation:
    """Caches the ``x``-independent coefficients so a curve over ``F0`` is cheap."""

    def __init__(self, model: RatioModel, L: ClockLaplace = identity_laplace, T: float = 1.0, outer_max: int = 64):
        self.model, self.L, self.T = model, L, float(T)
        N = model.N
        coeffs = mixture_coefficients(1.0, 0.0, model.c, model.delta, EMPTY, model.nu, N=outer_max)
        self.Q0 = coeffs.Q0
        self.b = [mp.mpf(float(v)) for v in coeffs.b_n]
        with mp.workdps(DPS):
            lams = _exp_family(model, 0, N)
            _check_resonance(lams)
            h = mp.mpf(COMPLEX_STEP)
            self._id_lams = _exp_family(model, 0, N, shift=mp.mpc(0, h))
            self._id_C = _coefficients(model, L, mp.mpf(self.T), self._id_lams)
            self._h = h
        self._exp_C: dict[int, tuple[list, list]] = {}

    def _exp_coeffs(self, m: int):
        if m not in self._exp_C:
            with mp.workdps(DPS):
                lams = _exp_family(self.model, m, self.model.N)
                _check_resonance(lams)
                self._exp_C[m] = (lams, _coefficients(self.model, self.L, mp.mpf(self.T), lams))
        return self._exp_C[m]

    def qbar(self, F0: float) -> QbarResult:
        """``Q̄_N(T, F0)``; the outer sum stops once terms fall below 1e-12 relative.

        Raises:
            IndeterminateRatioError: the log-contract approximation is not positive.
        """
        if not F0 > 0:
            raise ParameterError(f"F0 must be positive, got {F0}")
        with mp.workdps(DPS):
            x0 = mp.log(mp.mpf(F0))
            id_terms = [mp.im(C * mp.exp(lam * x0)) / self._h for C, lam in zip(self._id_C, self._id_lams)]
            den = x0 - mp.fsum(id_terms)
            # positive beyond the working precision's cancellation floor
            if not den > mp.mpf(10) ** (-DPS // 2) * max(1, abs(x0)):
                raise IndeterminateRatioError(f"log-contract approximation {float(den):.3g} is not positive at F0={F0}")
            num = mp.mpf(0)
            last, used, small_run = mp.mpf(0), 0, 0
            last_inner = abs(id_terms[-1])
            for m in range(1, len(self.b) + 1):
                lams, C = self._exp_coeffs(m)
                terms = [mp.re(Cn * mp.exp(lam * x0)) for Cn, lam in zip(C, lams)]
                last_inner = max(last_inner, abs(terms[-1]))
                term = self.b[m - 1] * (mp.fsum(terms) - mp.exp(m * mp.mpf(self.model.c) * x0))
                num += term
                last, used = term, m
                if abs(term) <= OUTER_REL_TOL * max(abs(num), mp.mpf(self.Q0) * den):
                    small_run += 1
                    if small_run >= 2:
                        break
                else:
                    small_run = 0
            value = self.Q0 + num / den
            return QbarResult(float(F0), float(value), self.model.N, used, float(abs(last)), float(last_inner), float(den))


def qbar(model: RatioModel, L: ClockLaplace, T: float, F0: float) -> float:
    """Order-``N`` approximation of the VS/log-contract ratio at ``(T, F0)``."""
    return RatioApproximation(model, L, T).qbar(F0).value


def qbar_curve(model: RatioModel, L: ClockLaplace, T: float, F0s) -> list[QbarResult]:
    approx = RatioApproximation(model, L, T)
    return [approx.qbar(float(f)) for f in F0s]


def figure5_model(N: int = 35) -> RatioModel:
    return RatioModel(omega=0.3, c=0.395, delta=1.0, nu=LevyKernelAtLocation.from_atoms([(-1.0, 1.0)]), N=N)


FIGURE5_T = 1.0
PURE_JUMP_LIMIT = math.e

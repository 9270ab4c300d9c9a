"""Candidate payoffs ``G`` with exact derivatives.

A payoff is a finite sum of

* a constant and a linear term ``c + l x``,
* exponentials ``Σ coef · exp(rate · x)``,
* C¹ piecewise-quadratic blocks (quadratic ``α x + β x²`` on ``[γ1, γ2]``
  continued linearly outside with matching value and slope).

Second derivatives of the piecewise blocks jump at the knots; at a knot the
left limit is returned.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, ParameterError


@dataclass(frozen=True)
class QuadraticPiece:
    alpha: float
    beta: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not self.gamma1 < self.gamma2:
            raise ParameterError(f"knots must satisfy gamma1 < gamma2, got {self.gamma1}, {self.gamma2}")

    def eval(self, x: np.ndarray, order: int) -> np.ndarray:
        a, b, g1, g2 = self.alpha, self.beta, self.gamma1, self.gamma2
        if order == 0:
            xc = np.clip(x, g1, g2)
            return a * xc + b * xc * xc + (x - xc) * (a + 2.0 * b * xc)
        if order == 1:
            return a + 2.0 * b * np.clip(x, g1, g2)
        return np.where((x > g1) & (x <= g2), 2.0 * b, 0.0)

    def scaled(self, k: float) -> QuadraticPiece:
        return QuadraticPiece(k * self.alpha, k * self.beta, self.gamma1, self.gamma2)


@dataclass(frozen=True)
class Payoff:
    """``G(x) = constant + linear·x + Σ coef·e^{rate·x} + Σ pieces(x)``."""

    constant: float = 0.0
    linear: float = 0.0
    exps: tuple[tuple[float, float], ...] = ()
    pieces: tuple[QuadraticPiece, ...] = ()
    # cached arrays for the exponential series; not part of equality
    _coef: np.ndarray = field(init=False, repr=False, compare=False)
    _rate: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        exps = tuple((float(c), float(r)) for c, r in self.exps if c != 0.0)
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "_coef", np.array([c for c, _ in exps], dtype=float))
        object.__setattr__(self, "_rate", np.array([r for _, r in exps], dtype=float))

    # -- construction -------------------------------------------------------

    @classmethod
    def linear_payoff(cls, slope: float, constant: float = 0.0) -> Payoff:
        return cls(constant=constant, linear=slope)

    @classmethod
    def exponential(cls, coef: float, rate: float) -> Payoff:
        return cls(exps=((coef, rate),))

    def __add__(self, other: Payoff) -> Payoff:
        if not isinstance(other, Payoff):
            return NotImplemented
        return Payoff(
            self.constant + other.constant,
            self.linear + other.linear,
            self.exps + other.exps,
            self.pieces + other.pieces,
        )

    def __mul__(self, k: float) -> Payoff:
        k = float(k)
        return Payoff(
            k * self.constant,
            k * self.linear,
            tuple((k * c, r) for c, r in self.exps),
            tuple(p.scaled(k) for p in self.pieces),
        )

    __rmul__ = __mul__

    def __neg__(self) -> Payoff:
        return self * -1.0

    def __sub__(self, other: Payoff) -> Payoff:
        return self + (-other)

    # -- evaluation ---------------------------------------------------------

    @property
    def knots(self) -> tuple[float, ...]:
        return tuple(sorted({k for p in self.pieces for k in (p.gamma1, p.gamma2)}))

    def eval(self, x, order: int = 0):
        """Value (``order=0``) or exact derivative (``1``, ``2``) at ``x``."""
        if order not in (0, 1, 2):
            raise ParameterError(f"order must be 0, 1 or 2, got {order}")
        xa = np.asarray(x, dtype=float)
        if order == 0:
            out = self.constant + self.linear * xa
        elif order == 1:
            out = np.full(xa.shape, self.linear)
        else:
            out = np.zeros(xa.shape)
        if self.exps:
            out = out + self._exp_sum(xa, order)
        for p in self.pieces:
            out = out + p.eval(xa, order)
        return float(out) if np.ndim(x) == 0 else out

    def _exp_sum(self, x: np.ndarray, order: int) -> np.ndarray:
        # sign * exp(log|coef| + rate x): coefficients of long series are tiny
        # while exp(rate x) alone may overflow
        coef = self._coef * self._rate**order
        nz = coef != 0.0
        if not nz.any():
            return np.zeros(x.shape)
        coef, rate = coef[nz], self._rate[nz]
        logc = np.log(np.abs(coef))
        with np.errstate(over="ignore"):
            terms = np.sign(coef) * np.exp(logc + np.multiply.outer(x, rate))
        return terms.sum(axis=-1)

    def __call__(self, x):
        return self.eval(x, 0)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "linear": self.linear,
            "exps": [[c, r] for c, r in self.exps],
            "pieces": [
                {"alpha": p.alpha, "beta": p.beta, "gamma1": p.gamma1, "gamma2": p.gamma2} for p in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Payoff:
        try:
            return cls(
                float(d.get("constant", 0.0)),
                float(d.get("linear", 0.0)),
                tuple((float(c), float(r)) for c, r in d.get("exps", [])),
                tuple(QuadraticPiece(**{k: float(v) for k, v in p.items()}) for p in d.get("pieces", [])),
            )
        except (TypeError, ValueError, KeyError) as exc:
            raise FormatError(f"malformed payoff description: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Payoff:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"payoff file is not valid JSON: {exc}") from exc


def table_csv(p: Payoff, x) -> str:
    """CSV text with columns ``x, G, G1, G2``."""
    x = np.asarray(x, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "G", "G1", "G2"])
    for xi, g0, g1, g2 in zip(x, p.eval(x, 0), p.eval(x, 1), p.eval(x, 2)):
        w.writerow([repr(float(xi)), repr(float(g0)), repr(float(g1)), repr(float(g2))])
    return buf.getvalue()


def avoid_knots(p: Payoff, x, eps: float = 1e-9) -> np.ndarray:
    """Nudge grid points that coincide with a knot by ``eps`` to the right."""
    x = np.array(x, dtype=float, copy=True)
    for k in p.knots:
        x[x == k] += eps
    return x


def shift_gauge(p: Payoff, c0: float, c1: float) -> Payoff:
    """``p + c0 + c1·e^x``; the generator annihilates both added terms."""
    return p + Payoff(constant=c0, exps=((c1, 1.0),))


@dataclass(frozen=True)
class PriceSpacePayoff:
    """``h(F) = G(log F) - G(log F0) + A (F - F0)`` with exact ``h'``, ``h''``."""

    payoff: Payoff
    F0: float
    A: float = 0.0

    def _x(self, F):
        F = np.asarray(F, dtype=float)
        if np.any(F <= 0):
            raise DomainError("price-space payoffs are defined for F > 0 only")
        return F, np.log(F)

    def __call__(self, F):
        Fa, x = self._x(F)
        out = self.payoff.eval(x, 0) - self.payoff.eval(np.log(self.F0), 0) + self.A * (Fa - self.F0)
        return float(out) if np.ndim(F) == 0 else out

    def d1(self, F):
        Fa, x = self._x(F)
        out = self.payoff.eval(x, 1) / Fa + self.A
        return float(out) if np.ndim(F) == 0 else out

    def d2(self, F):
        Fa, x = self._x(F)
        out = (self.payoff.eval(x, 2) - self.payoff.eval(x, 1)) / (Fa * Fa)
        return float(out) if np.ndim(F) == 0 else out


def to_price_space(p: Payoff, F0: float, slope_match: float | None = None) -> PriceSpacePayoff:
    """Map ``G`` to the price-space payoff ``h``; ``slope_match`` is the constant ``A``."""
    if not F0 > 0:
        raise DomainError(f"F0 must be positive, got {F0}")
    return PriceSpacePayoff(p, float(F0), 0.0 if slope_match is None else float(slope_match))

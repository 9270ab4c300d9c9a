"""Static replication of European payoffs from a strip of calls and puts.

For any ``κ > 0`` and a difference of convex functions ``h``::

    E h(F_T) = h(κ) + h'(κ) (C(κ) - P(κ))
               + ∫_0^κ h''(K) P(K) dK + ∫_κ^∞ h''(K) C(K) dK

The integrals are approximated by the trapezoid rule on the quoted strikes
(plus ``κ`` itself); strikes outside the quoted range are dropped and a bound
on the dropped mass is reported.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.stats import norm

from .errors import FormatError, ParameterError
from .payoff import Payoff, to_price_space

MIN_ROWS = 8


class PriceSpaceFunction(Protocol):
    def __call__(self, F): ...

    def d1(self, F): ...

    def d2(self, F): ...


@dataclass(frozen=True)
class SmileGrid:
    """Forward ``F0``, expiry ``T`` and strictly increasing strikes with call/put prices."""

    F0: float
    T: float
    strikes: np.ndarray
    calls: np.ndarray
    puts: np.ndarray
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        k = np.asarray(self.strikes, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise FormatError("a smile needs at least two strikes")
        if np.any(np.diff(k) <= 0):
            raise FormatError("strikes must be strictly increasing")
        if not self.F0 > 0:
            raise FormatError(f"F0 must be positive, got {self.F0}")

    @property
    def parity_residual(self) -> np.ndarray:
        return self.calls - self.puts - (self.F0 - self.strikes)

    def interpolate(self, kappa: float) -> tuple[float, float]:
        """Linearly interpolated ``(C(κ), P(κ))``."""
        return (
            float(np.interp(kappa, self.strikes, self.calls)),
            float(np.interp(kappa, self.strikes, self.puts)),
        )


def _shape_warnings(strikes, calls, puts, tol: float) -> list[str]:
    out = []
    dc, dp = np.diff(calls) / np.diff(strikes), np.diff(puts) / np.diff(strikes)
    if np.any(dc > tol):
        out.append("call prices are not decreasing in strike")
    if np.any(dp < -tol):
        out.append("put prices are not increasing in strike")
    if np.any(np.diff(dc) < -tol) or np.any(np.diff(dp) < -tol):
        out.append("prices are not convex in strike")
    return out


def make_smile(F0: float, T: float, strikes, calls, puts, noise_tol: float = 1e-10) -> SmileGrid:
    strikes = np.asarray(strikes, dtype=float)
    calls = np.asarray(calls, dtype=float)
    puts = np.asarray(puts, dtype=float)
    return SmileGrid(F0, T, strikes, calls, puts, tuple(_shape_warnings(strikes, calls, puts, noise_tol)))


def parse_smile(path, F0: float | None = None, T: float | None = None) -> SmileGrid:
    """Read a ``strike,call,put`` CSV.

    ``# key=value`` comment lines may carry ``F0`` and ``T``; explicit
    arguments win.  Without either, ``F0`` is inferred from put-call parity
    (median of ``K + C - P``).

    Raises:
        FormatError: fewer than 8 rows, bad header, unsorted or duplicate
            strikes, negative or non-numeric prices; the message names the row.
    """
    text = Path(path).read_text()
    meta: dict[str, float] = {}
    rows: list[tuple[int, list[str]]] = []
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                try:
                    meta[key.strip()] = float(val)
                except ValueError:
                    pass
            continue
        cells = [c.strip() for c in next(csv.reader([s]))]
        if header is None:
            header = [c.lower() for c in cells]
            if header != ["strike", "call", "put"]:
                raise FormatError(f"line {lineno}: expected header 'strike,call,put', got {s!r}")
            continue
        rows.append((lineno, cells))
    if header is None:
        raise FormatError("smile file is empty")
    if len(rows) < MIN_ROWS:
        raise FormatError(f"smile needs at least {MIN_ROWS} rows, got {len(rows)}")

    data = np.empty((len(rows), 3))
    for i, (lineno, cells) in enumerate(rows):
        if len(cells) != 3:
            raise FormatError(f"line {lineno}: expected 3 columns, got {len(cells)}")
        try:
            data[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: non-numeric value ({exc})") from exc
        if not np.all(np.isfinite(data[i])):
            raise FormatError(f"line {lineno}: non-finite value")
        if data[i, 0] <= 0:
            raise FormatError(f"line {lineno}: strike must be positive")
        if data[i, 1] < 0 or data[i, 2] < 0:
            raise FormatError(f"line {lineno}: negative option price")
        if i > 0:
            if data[i, 0] == data[i - 1, 0]:
                raise FormatError(f"line {lineno}: duplicate strike {data[i, 0]}")
            if data[i, 0] < data[i - 1, 0]:
                raise FormatError(f"line {lineno}: strikes are not sorted ({data[i, 0]} after {data[i - 1, 0]})")

    strikes, calls, puts = data.T
    if F0 is None:
        F0 = meta.get("F0")
    if F0 is None:
        F0 = float(np.median(strikes + calls - puts))
    if T is None:
        T = meta.get("T", float("nan"))
    return make_smile(float(F0), float(T), strikes, calls, puts)


def black_scholes_smile(
    F0: float, sigma: float, T: float, strikes=None, n: int = 400, lo: float = 0.2, hi: float = 5.0, spacing: str = "log"
) -> SmileGrid:
    """Undiscounted Black-Scholes calls and puts on the forward.

    The out-of-the-money option is priced by formula and the other one by
    parity, so ``C - P - (F0 - K)`` vanishes up to one rounding.
    """
    if strikes is None:
        if spacing == "log":
            strikes = F0 * np.exp(np.linspace(math.log(lo), math.log(hi), n))
        elif spacing == "linear":
            strikes = np.linspace(lo * F0, hi * F0, n)
        else:
            raise ParameterError(f"unknown spacing {spacing!r}")
    K = np.asarray(strikes, dtype=float)
    sd = sigma * math.sqrt(T)
    d1 = (np.log(F0 / K) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    call_f = F0 * norm.cdf(d1) - K * norm.cdf(d2)
    put_f = K * norm.cdf(-d2) - F0 * norm.cdf(-d1)
    otm_put = K < F0
    puts = np.where(otm_put, put_f, call_f - (F0 - K))
    calls = np.where(otm_put, puts + (F0 - K), call_f)
    puts = np.maximum(puts, 0.0)
    calls = np.maximum(calls, 0.0)
    return make_smile(F0, T, K, calls, puts)


def smile_csv(smile: SmileGrid) -> str:
    buf = io.StringIO()
    buf.write(f"# F0={smile.F0!r}\n# T={smile.T!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strike", "call", "put"])
    for k, c, p in zip(smile.strikes, smile.calls, smile.puts):
        w.writerow([repr(float(k)), repr(float(c)), repr(float(p))])
    return buf.getvalue()


@dataclass
class Replication:
    value: float
    kappa: float
    tail_bound: float
    parity_residual_max: float

    def to_dict(self) -> dict:
        return vars(self).copy()


def _trapezoid(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def replicate(h: PriceSpaceFunction, smile: SmileGrid, kappa: float | None = None) -> Replication:
    """Value of ``h(F_T)`` from the smile; see :func:`replicate_european`."""
    K = smile.strikes
    kappa = smile.F0 if kappa is None else float(kappa)
    if not K[0] <= kappa <= K[-1]:
        raise ParameterError(f"kappa={kappa} lies outside the strike range [{K[0]}, {K[-1]}]")
    c_k, p_k = smile.interpolate(kappa)
    below = K < kappa
    above = K > kappa
    kp = np.concatenate([K[below], [kappa]])
    vp = np.concatenate([smile.puts[below], [p_k]])
    kc = np.concatenate([[kappa], K[above]])
    vc = np.concatenate([[c_k], smile.calls[above]])
    value = (
        float(h(kappa))
        + float(h.d1(kappa)) * (c_k - p_k)
        + _trapezoid(kp, np.asarray(h.d2(kp)) * vp)
        + _trapezoid(kc, np.asarray(h.d2(kc)) * vc)
    )
    tail = abs(float(h.d2(K[0]))) * smile.puts[0] * K[0] + abs(float(h.d2(K[-1]))) * smile.calls[-1] * K[-1]
    parity = float(np.max(np.abs(smile.parity_residual)))
    return Replication(value, kappa, float(tail), parity)


def replicate_european(h: PriceSpaceFunction, smile: SmileGrid, kappa: float | None = None) -> float:
    """``E h(F_T)`` from calls and puts; ``h`` must expose ``d1`` and ``d2``.

    ``C(κ)``, ``P(κ)`` are linearly interpolated; ``κ`` defaults to ``F0``.
    """
    return replicate(h, smile, kappa).value


def vs_strike_from_smile(G: Payoff, smile: SmileGrid, kappa: float | None = None) -> float:
    """Fair variance-swap strike ``E G(log F_T) - G(log F0)``."""
    return vs_strike_report(G, smile, kappa).value


def vs_strike_report(G: Payoff, smile: SmileGrid, kappa: float | None = None) -> Replication:
    # h(F) = G(log F) - G(log F0), so replicating h gives the strike directly
    return replicate(to_price_space(G, smile.F0), smile, kappa)

"""Local characteristics of the driving Markov process.

A :class:`ModelSpec` bundles the local volatility ``a(x)`` and the Lévy
kernel ``μ(x, dz)``.  All registry families share one structure: jump sizes
(atoms) that do not move with ``x`` and intensities that do, plus optional
smooth densities multiplied by a state-dependent scale.  That keeps the
generator generic and lets the simulator vectorize over paths.

The generator is always applied in its truncation-free form

    A g(x) = a²(x)/2 (g'' - g') + ∫ (g(x+z) - g(x) + (1 - e^z) g'(x)) μ(x, dz),

so the truncation function of the semimartingale characteristics never
enters the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import ModelValidationError, ParameterError
from .kernel import EMPTY, Density, LevyKernelAtLocation, kernel_moment

if TYPE_CHECKING:
    from .payoff import Payoff

DEFAULT_GRID_POINTS = 201


# --------------------------------------------------------------------------- #
# Registries for a(x) and gamma(x)
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ConstVol:
    sigma: float

    def __call__(self, x):
        return np.full(np.shape(x), float(self.sigma)) if np.ndim(x) else float(self.sigma)

    def sup(self, lo=-np.inf, hi=np.inf) -> float:
        return abs(self.sigma)

    def to_dict(self) -> dict:
        return {"kind": "const", "sigma": self.sigma}


@dataclass(frozen=True)
class ExpVol:
    """``a(x) = sigma * exp(kappa * x)``; unbounded, so only usable on a bounded domain."""

    sigma: float
    kappa: float

    def __call__(self, x):
        return self.sigma * np.exp(self.kappa * np.asarray(x, dtype=float))

    def sup(self, lo=-np.inf, hi=np.inf) -> float:
        return float(max(abs(self(lo)), abs(self(hi))))

    def to_dict(self) -> dict:
        return {"kind": "exp", "sigma": self.sigma, "kappa": self.kappa}


@dataclass(frozen=True)
class PiecewiseVol:
    """Piecewise-constant ``a``; ``values[i]`` applies on ``[knots[i-1], knots[i])``."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.knots) + 1:
            raise ModelValidationError("piecewise vol needs len(values) == len(knots) + 1")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ModelValidationError("piecewise vol knots must be strictly increasing")
        object.__setattr__(self, "knots", tuple(map(float, self.knots)))
        object.__setattr__(self, "values", tuple(map(float, self.values)))

    def __call__(self, x):
        idx = np.searchsorted(self.knots, x, side="right")
        out = np.asarray(self.values)[idx]
        return out if np.ndim(x) else float(out)

    def sup(self, lo=-np.inf, hi=np.inf) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {"kind": "piecewise", "knots": list(self.knots), "values": list(self.values)}


@dataclass(frozen=True)
class ConstGamma:
    value: float = 1.0

    def __call__(self, x):
        return np.full(np.shape(x), float(self.value)) if np.ndim(x) else float(self.value)

    def sup(self) -> float:
        return abs(self.value)

    def to_dict(self) -> dict:
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class LogisticGamma:
    """Smooth positive bounded ``γ(x) = lo + (hi - lo) / (1 + exp(-(x - center)/width))``."""

    lo: float
    hi: float
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.lo <= 0 or self.hi <= 0 or self.width <= 0:
            raise ModelValidationError("logistic gamma needs lo, hi, width > 0")

    def __call__(self, x):
        s = 0.5 * (1.0 + np.tanh(0.5 * (np.asarray(x, dtype=float) - self.center) / self.width))
        out = self.lo + (self.hi - self.lo) * s
        return out if np.ndim(x) else float(out)

    def sup(self) -> float:
        return max(self.lo, self.hi)

    def to_dict(self) -> dict:
        return {"kind": "logistic", "lo": self.lo, "hi": self.hi, "center": self.center, "width": self.width}


def vol_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "const":
        return ConstVol(float(d["sigma"]))
    if kind == "exp":
        return ExpVol(float(d["sigma"]), float(d["kappa"]))
    if kind == "piecewise":
        return PiecewiseVol(tuple(d["knots"]), tuple(d["values"]))
    raise ModelValidationError(f"unknown vol kind {kind!r}")


def gamma_from_dict(d: dict | None):
    if d is None:
        return ConstGamma(1.0)
    kind = d.get("kind")
    try:
        if kind == "const":
            return ConstGamma(float(d["value"]))
        if kind == "logistic":
            return LogisticGamma(float(d["lo"]), float(d["hi"]), float(d.get("center", 0.0)), float(d.get("width", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelValidationError(f"bad {kind} gamma: {exc!r}") from exc
    raise ModelValidationError(f"unknown gamma kind {kind!r}")


# --------------------------------------------------------------------------- #
# ModelSpec
# --------------------------------------------------------------------------- #


def _no_weights(x):
    return np.zeros(np.shape(x) + (0,))


@dataclass(frozen=True)
class ModelSpec:
    """Local volatility and Lévy kernel of the driving Markov process.

    Attributes:
        vol: vectorized ``x -> a(x) >= 0``.
        jump_sizes: atom locations, shared by every ``x``.
        jump_weights: vectorized ``x -> intensities``, shape ``x.shape + (len(jump_sizes),)``.
        densities: pairs ``(density, scale)`` contributing ``scale(x) * density(dz)``.
        domain_hint: interval used to build validation / residual grids.
        intensity_bound: optional ``(lo, hi) -> upper bound of total atom
            intensity over [lo, hi]``; vectorized in ``lo``/``hi``.  Used by the
            simulator for thinning.
        config: serializable description (model-file form).
    """

    vol: Callable
    jump_sizes: tuple[float, ...] = ()
    jump_weights: Callable = _no_weights
    densities: tuple[tuple[Density, Callable], ...] = ()
    domain_hint: tuple[float, float] = (-3.0, 3.0)
    intensity_bound: Callable | None = None
    name: str = "custom"
    config: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "jump_sizes", tuple(float(z) for z in self.jump_sizes))
        if any(z == 0.0 for z in self.jump_sizes):
            raise ModelValidationError("jump size 0 is not allowed")
        lo, hi = self.domain_hint
        if not hi > lo:
            raise ModelValidationError(f"empty domain hint {self.domain_hint}")

    @property
    def finite_activity(self) -> bool:
        return not self.densities

    def kernel(self, x: float) -> LevyKernelAtLocation:
        """``μ(x, ·)`` as an explicit measure."""
        x = float(x)
        w = np.asarray(self.jump_weights(np.array([x])), dtype=float)[0] if self.jump_sizes else ()
        atoms = tuple((z, float(wi)) for z, wi in zip(self.jump_sizes, w) if wi != 0.0)
        dens = tuple(d.scaled(float(np.asarray(s(x)))) for d, s in self.densities)
        return LevyKernelAtLocation(atoms, dens)

    def total_intensity(self, x) -> np.ndarray:
        """Total atom intensity at each ``x`` (densities excluded)."""
        if not self.jump_sizes:
            return np.zeros(np.shape(x))
        return np.asarray(self.jump_weights(np.asarray(x, dtype=float))).sum(axis=-1)

    def grid(self, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
        return np.linspace(*self.domain_hint, n)

    def with_domain(self, lo: float, hi: float) -> ModelSpec:
        cfg = dict(self.config)
        if cfg:
            cfg["domain"] = [lo, hi]
        return replace(self, domain_hint=(float(lo), float(hi)), config=cfg)


# --------------------------------------------------------------------------- #
# Registry constructors
# --------------------------------------------------------------------------- #


def _atom_arrays(nu: LevyKernelAtLocation) -> tuple[tuple[float, ...], np.ndarray]:
    sizes = tuple(z for z, _ in nu.atoms)
    return sizes, np.array([w for _, w in nu.atoms], dtype=float)


def proportional_model(
    sigma: float,
    nu: LevyKernelAtLocation = EMPTY,
    gamma=None,
    domain: tuple[float, float] = (-3.0, 3.0),
) -> ModelSpec:
    """``a² = γ²(x) σ²`` and ``μ(x, dz) = γ²(x) ν(dz)`` (constant relative jump intensity)."""
    if sigma < 0:
        raise ModelValidationError("sigma must be >= 0")
    gamma = ConstGamma(1.0) if gamma is None else gamma
    sizes, w = _atom_arrays(nu)
    g2sup = gamma.sup() ** 2
    total = float(w.sum())

    def vol(x):
        return gamma(x) * sigma

    def weights(x):
        g2 = np.asarray(gamma(x), dtype=float) ** 2
        return g2[..., None] * w

    def bound(lo, hi):
        return np.full(np.broadcast(np.asarray(lo), np.asarray(hi)).shape, g2sup * total)

    def g2(x):
        return np.asarray(gamma(x), dtype=float) ** 2

    return ModelSpec(
        vol=vol,
        jump_sizes=sizes,
        jump_weights=weights,
        densities=tuple((d, g2) for d in nu.densities),
        domain_hint=tuple(domain),
        intensity_bound=bound,
        name="proportional",
        config={
            "vol": {"kind": "const", "sigma": sigma},
            "kernel": {"kind": "proportional", "gamma": gamma.to_dict(), **nu.to_dict()},
            "domain": list(domain),
        },
    )


def single_atom_model(
    vol,
    z0: float,
    intensity: Callable,
    domain: tuple[float, float],
    intensity_sup: float | None = None,
    name: str = "single_atom",
    config: dict | None = None,
) -> ModelSpec:
    """``μ(x, ·) = c(x) δ_{z0}`` with a user intensity ``c``."""

    def weights(x):
        return np.asarray(intensity(np.asarray(x, dtype=float)), dtype=float)[..., None]

    bound = None
    if intensity_sup is not None:

        def bound(lo, hi):
            return np.full(np.broadcast(np.asarray(lo), np.asarray(hi)).shape, float(intensity_sup))

    return ModelSpec(
        vol=vol,
        jump_sizes=(z0,),
        jump_weights=weights,
        domain_hint=tuple(domain),
        intensity_bound=bound,
        name=name,
        config=config or {},
    )


def mixture_model(
    alpha: float,
    beta: float,
    delta: float,
    c: float,
    nu0: LevyKernelAtLocation = EMPTY,
    nu1: LevyKernelAtLocation = EMPTY,
    sigma0_sq: float = 2.0,
    domain: tuple[float, float] = (-3.0, 3.0),
) -> ModelSpec:
    """Lévy mixture with state-dependent weights.

    With ``σ0²`` constant and ``σ1²(x) = σ0² e^{cx}``::

        a²(x)    = α σ0² + δ β σ1²(x)
        μ(x, dz) = σ0²/2 ν0(dz) + δ σ1²(x)/2 ν1(dz)
    """
    if min(alpha, beta, delta) < 0:
        raise ModelValidationError("alpha, beta, delta must be >= 0")
    if sigma0_sq <= 0:
        raise ModelValidationError("sigma0_sq must be > 0")
    s0, w0 = _atom_arrays(nu0)
    s1, w1 = _atom_arrays(nu1)
    half = 0.5 * sigma0_sq

    def vol(x):
        return np.sqrt(alpha * sigma0_sq + delta * beta * sigma0_sq * np.exp(c * np.asarray(x, dtype=float)))

    def weights(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(c * x)[..., None]
        part0 = np.broadcast_to(half * w0, x.shape + (len(s0),))
        part1 = delta * half * e * w1
        return np.concatenate([part0, part1], axis=-1)

    tot0, tot1 = float(w0.sum()), float(w1.sum())

    def bound(lo, hi):
        e = np.maximum(np.exp(c * np.asarray(lo, dtype=float)), np.exp(c * np.asarray(hi, dtype=float)))
        return half * tot0 + delta * half * tot1 * e

    def one(x):
        return np.full(np.shape(x), half) if np.ndim(x) else half

    def scale1(x):
        return delta * half * np.exp(c * np.asarray(x, dtype=float))

    dens = tuple((d, one) for d in nu0.densities) + tuple((d, scale1) for d in nu1.densities)
    return ModelSpec(
        vol=vol,
        jump_sizes=s0 + s1,
        jump_weights=weights,
        densities=dens,
        domain_hint=tuple(domain),
        intensity_bound=bound,
        name="mixture",
        config={
            "kernel": {
                "kind": "mixture",
                "alpha": alpha,
                "beta": beta,
                "delta": delta,
                "c": c,
                "sigma0_sq": sigma0_sq,
                "nu0": nu0.to_dict(),
                "nu1": nu1.to_dict(),
            },
            "domain": list(domain),
        },
    )


# --------------------------------------------------------------------------- #
# Operations
# --------------------------------------------------------------------------- #


def _scalar_or_array(fn, x):
    if np.ndim(x) == 0:
        return fn(float(x))
    x = np.asarray(x, dtype=float)
    return np.array([fn(float(xi)) for xi in x.ravel()]).reshape(x.shape)


def drift_b(model: ModelSpec, x):
    """Martingale drift ``-a²/2 - ∫ (e^z - 1 - z) μ(x, dz)`` (truncation-free form)."""

    def one(xi):
        a = float(model.vol(xi))
        try:
            e = kernel_moment(model.kernel(xi), lambda z: np.expm1(z) - z)
        except Exception as exc:  # noqa: BLE001 - re-raised with model context
            raise ModelValidationError(f"exponential moment of the kernel at x={xi} is not finite") from exc
        return -0.5 * a * a - e

    return _scalar_or_array(one, x)


def qv_rate(model: ModelSpec, x):
    """Quadratic-variation rate ``a²(x) + ∫ z² μ(x, dz)``."""

    def one(xi):
        a = float(model.vol(xi))
        return a * a + kernel_moment(model.kernel(xi), lambda z: z * z)

    return _scalar_or_array(one, x)


def apply_generator(model: ModelSpec, g: Payoff, x):
    """``A g(x)`` using the payoff's exact first and second derivatives."""

    def one(xi):
        a = float(model.vol(xi))
        g1 = float(g.eval(xi, 1))
        out = 0.5 * a * a * (float(g.eval(xi, 2)) - g1)
        kern = model.kernel(xi)
        if kern.is_empty:
            return out
        g0 = float(g.eval(xi, 0))
        return out + kernel_moment(kern, lambda z: g.eval(xi + z, 0) - g0 - np.expm1(z) * g1)

    return _scalar_or_array(one, x)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    witness: float
    note: str = ""


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_model`; failures are entries, not exceptions."""

    checks: list[CheckResult]
    warnings: list[str]
    max_exponential_p: float
    intensity_growth_rate: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [vars(c) for c in self.checks],
            "warnings": list(self.warnings),
            "max_exponential_p": self.max_exponential_p,
            "intensity_growth_rate": self.intensity_growth_rate,
        }


def validate_model(
    model: ModelSpec,
    grid: Sequence[float] | None = None,
    cap: float = 1e6,
    p_max: float = 20.0,
    p_step: float = 0.25,
) -> ValidationReport:
    """Grid-based check of the boundedness conditions on ``a`` and ``μ``.

    Reports the suprema of ``a²``, ``∫ z² μ`` and ``∫ (e^z - 1 - z) μ`` with
    the grid point where each is attained, and the largest ``p`` in
    ``[0, p_max]`` (step ``p_step``) for which ``sup_x ∫ (e^{pz} - 1 - pz) μ``
    stays below ``cap``.  A jump intensity that grows exponentially towards a
    grid edge is reported as a warning.
    """
    x = np.asarray(model.grid() if grid is None else grid, dtype=float)
    if x.size == 0:
        raise ParameterError("validation grid is empty")

    checks: list[CheckResult] = []
    warnings: list[str] = []

    def sup_check(name, fn):
        vals = np.empty_like(x)
        for i, xi in enumerate(x):
            try:
                vals[i] = fn(xi)
            except Exception:  # noqa: BLE001 - non-finite moments are report entries
                vals[i] = np.inf
        finite = np.isfinite(vals)
        i = int(np.argmax(np.where(finite, vals, np.inf)))
        checks.append(CheckResult(name, bool(finite.all()), float(vals[i]), float(x[i])))
        return vals

    sup_check("a2", lambda xi: float(model.vol(xi)) ** 2)
    sup_check("second_moment", lambda xi: kernel_moment(model.kernel(xi), lambda z: z * z))
    sup_check("exp_moment", lambda xi: kernel_moment(model.kernel(xi), lambda z: np.expm1(z) - z))
    vol_ok = np.all(np.asarray(model.vol(x)) >= 0)
    checks.append(CheckResult("vol_nonnegative", bool(vol_ok), float(np.min(model.vol(x))), float(x[int(np.argmin(model.vol(x)))])))

    kernels = [model.kernel(xi) for xi in x]
    best_p = 0.0
    for p in np.arange(p_step, p_max + 0.5 * p_step, p_step):
        try:
            worst = max(kernel_moment(k, lambda z, p=p: np.expm1(p * z) - p * z) for k in kernels)
        except Exception:  # noqa: BLE001 - overflow means this p is out
            break
        if not (np.isfinite(worst) and worst <= cap):
            break
        best_p = float(p)

    rate = 0.0
    lam = np.array([k.total_mass for k in kernels])
    if x.size >= 4 and np.all(lam > 0):
        upper = x >= np.median(x)
        rate = float(np.polyfit(x[upper], np.log(lam[upper]), 1)[0])
        lower = ~upper
        rate_lo = float(np.polyfit(x[lower], np.log(lam[lower]), 1)[0]) if lower.sum() >= 2 else 0.0
        if lam.max() / lam.min() > 1e3:
            growth = rate if abs(rate) >= abs(rate_lo) else rate_lo
            warnings.append(
                f"jump intensity grows like exp({growth:.4g} x) across the grid "
                f"(max {lam.max():.4g} at x={x[int(np.argmax(lam))]:.4g})"
            )
            rate = growth
    return ValidationReport(checks, warnings, best_p, rate)


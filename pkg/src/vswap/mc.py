"""Euler simulation of time-changed jump diffusions with QV accounting.

Paths are advanced in calendar time with business-time increments
``Δτ = v Δt`` where ``v`` is the clock's activity rate (``v ≡ 1`` for the
identity clock).  Between jumps the log-price moves with the martingale drift
``-a²/2 - ∫(e^z - 1) μ`` and diffusion ``a √Δτ ξ``; jumps come from thinning a
Poisson stream at a local upper bound of the total intensity.

Random numbers are drawn per block of paths from a Philox stream keyed by
``(seed, block index)``.  Blocks have a fixed size, so the output does not
depend on how many worker threads run them.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import IndeterminateRatioError, ModelValidationError, ParameterError, SimulationError
from .model import ModelSpec
from .payoff import Payoff

BLOCK_SIZE = 8192
WORKERS_ENV = "VSWAP_WORKERS"


@dataclass(frozen=True)
class ClockSpec:
    """Identity clock, or square-root activity rate ``dv = κ(θ - v)dt + η √v dW``.

    ``rho`` correlates ``dW`` with the Brownian driver of the log-price.
    """

    kind: str = "identity"
    v0: float = 1.0
    kappa: float = 0.0
    theta: float = 1.0
    eta: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "activity"):
            raise ParameterError(f"unknown clock kind {self.kind!r}")
        if self.kind == "activity":
            if self.v0 <= 0 or self.theta < 0 or self.kappa < 0 or self.eta < 0:
                raise ParameterError("activity clock needs v0 > 0 and kappa, theta, eta >= 0")
            if not -1.0 <= self.rho <= 1.0:
                raise ParameterError(f"rho must lie in [-1, 1], got {self.rho}")

    @classmethod
    def identity(cls) -> ClockSpec:
        return cls()

    @classmethod
    def activity(cls, v0=1.2, kappa=2.0, theta=1.0, eta=0.5, rho=0.0) -> ClockSpec:
        return cls("activity", v0, kappa, theta, eta, rho)

    def mean_tau(self, T: float) -> float:
        """``E τ_T`` of the continuous-time clock."""
        if self.kind == "identity":
            return T
        if self.kappa == 0.0:
            return self.v0 * T
        return self.theta * T + (self.v0 - self.theta) * (-math.expm1(-self.kappa * T)) / self.kappa

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        return {
            "kind": "activity",
            "v0": self.v0,
            "kappa": self.kappa,
            "theta": self.theta,
            "eta": self.eta,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ClockSpec:
        d = dict(d)
        kind = d.pop("kind", "identity")
        if kind == "identity":
            return cls()
        if kind != "activity":
            raise ParameterError(f"unknown clock kind {kind!r}")
        try:
            return cls("activity", **{k: float(v) for k, v in d.items()})
        except TypeError as exc:
            raise ParameterError(f"bad clock description: {exc}") from exc


@dataclass(frozen=True)
class SimConfig:
    paths: int
    steps: int = 1000
    T: float = 1.0
    seed: int = 0
    safety: float = 1.5
    box: float = 15.0

    def __post_init__(self):
        if self.paths < 1 or self.steps < 1:
            raise ParameterError("paths and steps must be >= 1")
        if not self.T > 0:
            raise ParameterError("T must be positive")
        if not self.safety > 1.0:
            raise ParameterError("thinning safety factor must exceed 1")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(round(self.steps * self.T, 9)))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("paths", "steps", "T", "seed", "safety", "box")}


class PathRecord(NamedTuple):
    X_T: float
    QV: float
    tau_T: float
    jumps: int
    violations: int
    exited: bool


@dataclass
class PathRecords:
    """Struct-of-arrays view of all simulated paths."""

    X_T: np.ndarray
    QV: np.ndarray
    tau_T: np.ndarray
    jumps: np.ndarray
    violations: np.ndarray
    exited: np.ndarray
    x0: float
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.X_T.size

    def __getitem__(self, i: int) -> PathRecord:
        return PathRecord(
            float(self.X_T[i]),
            float(self.QV[i]),
            float(self.tau_T[i]),
            int(self.jumps[i]),
            int(self.violations[i]),
            bool(self.exited[i]),
        )

    @property
    def total_violations(self) -> int:
        return int(self.violations.sum())

    @property
    def total_exits(self) -> int:
        return int(self.exited.sum())

    @property
    def valid(self) -> bool:
        return self.total_violations == 0 and self.total_exits == 0

    def check(self) -> None:
        if not self.valid:
            raise SimulationError(
                f"invalid run: {self.total_violations} thinning-bound violations, "
                f"{self.total_exits} paths left the simulation box"
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "X_T", "QV", "tau_T", "jumps"])
        for i in range(len(self)):
            w.writerow([i, repr(float(self.X_T[i])), repr(float(self.QV[i])), repr(float(self.tau_T[i])), int(self.jumps[i])])
        return buf.getvalue()


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    paths: int

    def within(self, target: float = 0.0, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se

    @property
    def passes(self) -> bool:
        """The 3-SE test ``|mean| <= 3 SE``."""
        return self.within(0.0, 3.0)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "paths": self.paths}


# --------------------------------------------------------------------------- #
# Simulation
# --------------------------------------------------------------------------- #


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


class _Kernel:
    """Vectorized access to the atoms of a model."""

    def __init__(self, model: ModelSpec):
        if not model.finite_activity:
            raise ModelValidationError("simulation needs a finite-activity kernel (atoms only)")
        self.model = model
        self.sizes = np.asarray(model.jump_sizes, dtype=float)
        self.has_jumps = self.sizes.size > 0
        self.em1 = np.expm1(self.sizes)
        self.zlo = min(0.0, float(self.sizes.min())) if self.has_jumps else 0.0
        self.zhi = max(0.0, float(self.sizes.max())) if self.has_jumps else 0.0

    def vol(self, x):
        return np.broadcast_to(np.asarray(self.model.vol(x), dtype=float), x.shape)

    def weights(self, x):
        return np.asarray(self.model.jump_weights(x), dtype=float).reshape(x.shape + (self.sizes.size,))

    def bound(self, lo, hi):
        if self.model.intensity_bound is not None:
            return np.asarray(self.model.intensity_bound(lo, hi), dtype=float)
        # no analytic bound: sample the window; any shortfall shows up as a violation
        pts = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, 9)
        return self.weights(pts).sum(axis=-1).max(axis=-1)


def _poisson(rng: np.random.Generator, rate: np.ndarray) -> np.ndarray:
    """Poisson counts by CDF inversion of one uniform each (rates are small)."""
    u = rng.random(rate.shape)
    p = np.exp(-rate)
    n = np.zeros(rate.shape, dtype=np.int64)
    idx = np.flatnonzero(u >= p)
    if idx.size:
        u, p, r, cdf = u[idx], p[idx], rate[idx], p[idx].copy()
        k = np.zeros(idx.size, dtype=np.int64)
        more = u >= cdf
        while more.any():
            k[more] += 1
            p = np.where(more, p * r / np.maximum(k, 1), p)
            cdf = np.where(more, cdf + p, cdf)
            more &= (u >= cdf) & (p > 0)
        n[idx] = k
    return n


def _simulate_block(kern: _Kernel, clock: ClockSpec, x0: float, cfg: SimConfig, n: int, block: int):
    rng = _block_rng(cfg.seed, block)
    dt, sqdt = cfg.dt, math.sqrt(cfg.dt)
    lo_box, hi_box = x0 - cfg.box, x0 + cfg.box
    x = np.full(n, float(x0))
    qv = np.zeros(n)
    tau = np.zeros(n)
    jumps = np.zeros(n, dtype=np.int64)
    viol = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    all_alive = True
    active_clock = clock.kind == "activity"
    v = np.full(n, clock.v0) if active_clock else None
    rho_c = math.sqrt(max(0.0, 1.0 - clock.rho**2))

    for _ in range(cfg.n_steps):
        xi = rng.standard_normal(n)
        if active_clock:
            vp = np.maximum(v, 0.0)
            zv = rng.standard_normal(n)
            dtau = vp * dt
            v = v + clock.kappa * (clock.theta - vp) * dt + clock.eta * np.sqrt(vp) * sqdt * zv
            xi = clock.rho * zv + rho_c * xi
        else:
            dtau = dt
        a = kern.vol(x)
        a2 = a * a
        drift = -0.5 * a2
        if kern.has_jumps:
            w = kern.weights(x)
            drift = drift - w @ kern.em1
        cont = drift * dtau + a * np.sqrt(dtau) * xi
        step_qv = a2 * dtau
        jump_sum = np.zeros(n)

        if kern.has_jumps:
            half = 5.0 * a * np.sqrt(dtau) + np.abs(drift) * dtau
            bound = cfg.safety * kern.bound(x - half + kern.zlo, x + half + kern.zhi)
            ncand = _poisson(rng, bound * dtau)
            idx = np.flatnonzero((ncand > 0) & alive)
            if idx.size:
                k_max = int(ncand[idx].max())
                u = rng.random((idx.size, k_max))
                u[np.arange(k_max)[None, :] >= ncand[idx][:, None]] = np.inf
                u.sort(axis=1)
                acc_u = rng.random((idx.size, k_max))
                pick_u = rng.random((idx.size, k_max))
                js = np.zeros(idx.size)
                for k in range(k_max):
                    sel = np.flatnonzero(np.isfinite(u[:, k]))
                    p = idx[sel]
                    y = x[p] + u[sel, k] * cont[p] + js[sel]
                    wy = kern.weights(y)
                    lam = wy.sum(axis=-1)
                    viol[p] += lam > bound[p]
                    hit = acc_u[sel, k] * bound[p] < lam
                    if not hit.any():
                        continue
                    cum = np.cumsum(wy[hit], axis=-1)
                    atom = (cum < (pick_u[sel, k][hit] * lam[hit])[:, None]).sum(axis=-1)
                    z = kern.sizes[np.minimum(atom, kern.sizes.size - 1)]
                    js[sel[hit]] += z
                    step_qv[p[hit]] += z * z
                    jumps[p[hit]] += 1
                jump_sum[idx] = js

        x_new = x + cont + jump_sum
        out = (x_new < lo_box) | (x_new > hi_box) | ~np.isfinite(x_new)
        if all_alive and not out.any():
            x = x_new
            qv += step_qv
            tau += dtau
            continue
        step = alive & ~out
        x = np.where(step, x_new, x)
        qv = np.where(step, qv + step_qv, qv)
        tau = np.where(step, tau + dtau, tau)
        alive &= ~out
        all_alive = False

    return x, qv, tau, jumps, viol, ~alive


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def simulate_paths(
    model: ModelSpec,
    clock: ClockSpec,
    x0: float,
    cfg: SimConfig,
    workers: int | None = None,
    strict: bool = True,
) -> PathRecords:
    """Simulate ``cfg.paths`` independent paths from ``x0``.

    Raises:
        ModelValidationError: the kernel has a density part.
        SimulationError: (``strict`` only) any thinning-bound violation or box
            exit; with ``strict=False`` the flags are returned for inspection.
    """
    kern = _Kernel(model)
    sizes = [min(BLOCK_SIZE, cfg.paths - s) for s in range(0, cfg.paths, BLOCK_SIZE)]
    workers = worker_count() if workers is None else max(1, int(workers))

    def run(b):
        return _simulate_block(kern, clock, float(x0), cfg, sizes[b], b)

    if workers == 1 or len(sizes) == 1:
        parts = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    cols = [np.concatenate([p[i] for p in parts]) for i in range(6)]
    rec = PathRecords(*cols, x0=float(x0), config={"sim": cfg.to_dict(), "clock": clock.to_dict()})
    if strict:
        rec.check()
    return rec


# --------------------------------------------------------------------------- #
# Estimators
# --------------------------------------------------------------------------- #


def _estimate(sample: np.ndarray) -> McEstimate:
    n = sample.size
    se = float(sample.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return McEstimate(float(sample.mean()), se, n)


def mean_estimate(sample) -> McEstimate:
    return _estimate(np.asarray(sample, dtype=float))


def identity_gap(records: PathRecords, G: Payoff, x0: float | None = None) -> McEstimate:
    """Per-path ``QV - (G(X_T) - G(x0))``; its mean vanishes when ``G`` prices the swap."""
    x0 = records.x0 if x0 is None else float(x0)
    return _estimate(records.QV - (np.asarray(G(records.X_T)) - G(x0)))


def mc_ratio(records: PathRecords, x0: float | None = None) -> McEstimate:
    """``mean(QV) / mean(x0 - X_T)`` with a delta-method standard error.

    Raises:
        IndeterminateRatioError: the denominator is within 5 SE of zero.
    """
    x0 = records.x0 if x0 is None else float(x0)
    num = records.QV
    den = x0 - records.X_T
    n = num.size
    if n < 2:
        raise IndeterminateRatioError("need at least two paths")
    mn, md = num.mean(), den.mean()
    sd = den.std(ddof=1) / math.sqrt(n)
    if not abs(md) > 5.0 * sd:
        raise IndeterminateRatioError(f"log-contract estimate {md:.3g} is within 5 SE ({sd:.3g}) of zero")
    r = mn / md
    cov = np.cov(num, den, ddof=1)
    var = (cov[0, 0] - 2.0 * r * cov[0, 1] + r * r * cov[1, 1]) / (n * md * md)
    return McEstimate(float(r), float(math.sqrt(max(var, 0.0))), n)

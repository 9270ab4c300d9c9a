"""Lévy measures at a fixed location: finite atom lists plus smooth densities.

Every integral of the form ``∫ f(z) μ(x, dz)`` in the package goes through
:func:`kernel_moment`.  Atoms are summed exactly, densities are integrated by
Gauss-Legendre quadrature on their compact support.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ModelValidationError

DEFAULT_NODES = 128


@lru_cache(maxsize=32)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class Density:
    """Rate density ``z -> fn(z)`` on ``[lo, hi]``, multiplied by ``scale``.

    ``kind``/``params`` are only carried for serialization of the named
    families built by :func:`named_density`.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    nodes: int = DEFAULT_NODES
    scale: float = 1.0
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ModelValidationError(f"density support [{self.lo}, {self.hi}] is empty")
        if self.nodes < 2:
            raise ModelValidationError("density needs at least 2 quadrature nodes")

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights (density and scale folded into the weights)."""
        t, w = _gauss_legendre(self.nodes)
        half = 0.5 * (self.hi - self.lo)
        z = self.lo + half * (t + 1.0)
        dens = np.asarray(self.fn(z), dtype=float)
        if np.any(~np.isfinite(dens)) or np.any(dens < 0):
            raise ModelValidationError(f"density of kind {self.kind!r} is negative or non-finite on its support")
        return z, w * half * dens * self.scale

    def scaled(self, factor: float) -> Density:
        return replace(self, scale=self.scale * factor)

    def with_nodes(self, nodes: int) -> Density:
        return replace(self, nodes=nodes)


def named_density(kind: str, nodes: int = DEFAULT_NODES, **params) -> Density:
    """Densities that can be written in a model file.

    ``gaussian``: ``rate * N(mean, std)`` truncated to ``mean ± 10 std``.
    ``exponential``: ``rate * eta * exp(-eta |z|)`` on one side of zero
    (``side = -1`` or ``+1``), truncated at ``40 / eta``.
    """
    required = {"gaussian": ("rate", "mean", "std"), "exponential": ("rate", "eta")}.get(kind, ())
    missing = [k for k in required if k not in params]
    if missing:
        raise ModelValidationError(f"{kind} density is missing {', '.join(missing)}")
    if kind == "gaussian":
        rate, mean, std = float(params["rate"]), float(params["mean"]), float(params["std"])
        if rate < 0 or std <= 0:
            raise ModelValidationError("gaussian density needs rate >= 0 and std > 0")
        norm = rate / (std * np.sqrt(2.0 * np.pi))

        def fn(z):
            return norm * np.exp(-0.5 * ((z - mean) / std) ** 2)

        lo, hi = mean - 10.0 * std, mean + 10.0 * std
    elif kind == "exponential":
        rate, eta, side = float(params["rate"]), float(params["eta"]), int(params.get("side", -1))
        if rate < 0 or eta <= 0 or side not in (-1, 1):
            raise ModelValidationError("exponential density needs rate >= 0, eta > 0, side in {-1, 1}")

        def fn(z):
            return rate * eta * np.exp(-eta * np.abs(z))

        lo, hi = (-40.0 / eta, 0.0) if side < 0 else (0.0, 40.0 / eta)
    else:
        raise ModelValidationError(f"unknown density kind {kind!r}")
    return Density(fn, lo, hi, nodes=nodes, kind=kind, params=dict(params))


@dataclass(frozen=True)
class LevyKernelAtLocation:
    """The measure ``μ(x, ·)`` at one location ``x``.

    ``atoms`` is a tuple of ``(jump size, intensity)`` pairs.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    densities: tuple[Density, ...] = ()

    def __post_init__(self):
        atoms = tuple((float(z), float(w)) for z, w in self.atoms)
        for z, w in atoms:
            if z == 0.0:
                raise ModelValidationError("a Lévy measure cannot carry an atom at z = 0")
            if not (w >= 0.0 and np.isfinite(w)):
                raise ModelValidationError(f"atom at z={z} has invalid intensity {w}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "densities", tuple(self.densities))

    @classmethod
    def from_atoms(cls, atoms: Sequence[Sequence[float]]) -> LevyKernelAtLocation:
        return cls(tuple((z, w) for z, w in atoms))

    @property
    def is_empty(self) -> bool:
        return not self.densities and all(w == 0.0 for _, w in self.atoms)

    @property
    def finite_activity(self) -> bool:
        return not self.densities

    @property
    def total_mass(self) -> float:
        mass = sum(w for _, w in self.atoms)
        for d in self.densities:
            _, wts = d.quadrature()
            mass += float(wts.sum())
        return mass

    @property
    def support(self) -> tuple[float, float]:
        """Smallest interval containing every atom and density support (``(0, 0)`` if empty)."""
        lo = hi = 0.0
        for z, w in self.atoms:
            if w > 0:
                lo, hi = min(lo, z), max(hi, z)
        for d in self.densities:
            lo, hi = min(lo, d.lo), max(hi, d.hi)
        return lo, hi

    def scaled(self, factor: float) -> LevyKernelAtLocation:
        return LevyKernelAtLocation(
            tuple((z, w * factor) for z, w in self.atoms),
            tuple(d.scaled(factor) for d in self.densities),
        )

    def __add__(self, other: LevyKernelAtLocation) -> LevyKernelAtLocation:
        return LevyKernelAtLocation(self.atoms + other.atoms, self.densities + other.densities)

    def with_nodes(self, nodes: int) -> LevyKernelAtLocation:
        return LevyKernelAtLocation(self.atoms, tuple(d.with_nodes(nodes) for d in self.densities))

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        zs = [np.array([z for z, _ in self.atoms], dtype=float)]
        ws = [np.array([w for _, w in self.atoms], dtype=float)]
        for d in self.densities:
            z, w = d.quadrature()
            zs.append(z)
            ws.append(w)
        return np.concatenate(zs), np.concatenate(ws)

    def to_dict(self) -> dict:
        out: dict = {"atoms": [[z, w] for z, w in self.atoms]}
        if self.densities:
            dens = []
            for d in self.densities:
                if d.kind == "custom":
                    raise ModelValidationError("custom densities cannot be serialized")
                dens.append({"kind": d.kind, "nodes": d.nodes, "scale": d.scale, **d.params})
            out["densities"] = dens
        return out

    @classmethod
    def from_dict(cls, d: dict | None) -> LevyKernelAtLocation:
        if not d:
            return cls()
        dens = []
        for spec in d.get("densities", []):
            spec = dict(spec)
            kind = spec.pop("kind", None)
            nodes = int(spec.pop("nodes", DEFAULT_NODES))
            scale = float(spec.pop("scale", 1.0))
            dens.append(named_density(kind, nodes=nodes, **spec).scaled(scale))
        return cls(tuple(tuple(a) for a in d.get("atoms", [])), tuple(dens))


EMPTY = LevyKernelAtLocation()


def kernel_moment(kernel: LevyKernelAtLocation, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    """``∫ integrand(z) kernel(dz)``: exact on atoms, Gauss-Legendre on densities.

    Raises:
        DomainError: if the integrand is not finite at some node carrying mass.
    """
    z, w = kernel.nodes_and_weights()
    if z.size == 0:
        return 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(integrand(z))
    vals = np.broadcast_to(vals, z.shape)
    bad = ~np.isfinite(vals) & (w != 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DomainError(f"integrand is not finite at node z={float(z[i])!r}")
    vals = np.where(w != 0, vals, 0.0)
    total = (vals * w).sum()
    return complex(total) if np.iscomplexobj(total) else float(total)


def levy_moments(nu: LevyKernelAtLocation) -> tuple[float, float]:
    """Return ``(m2, e0) = (∫ z² ν, ∫ (e^z - 1 - z) ν)``."""
    m2 = float(kernel_moment(nu, lambda z: z * z))
    e0 = float(kernel_moment(nu, lambda z: np.expm1(z) - z))
    return m2, e0

"""JSON model files and the solver dispatch used by the command line.

A model file looks like::

    {"vol": {"kind": "const", "sigma": 0.2},
     "kernel": {"kind": "proportional", "atoms": [[-0.3, 0.5]],
                "gamma": {"kind": "logistic", "lo": 0.5, "hi": 1.5}},
     "domain": [-1, 5], "x0": 2.302585}

Kernel kinds: ``none``, ``proportional`` (``atoms``, ``densities``,
``gamma``), ``fraclin`` (``alpha``, ``beta``, ``z0``, ``gamma1``,
``gamma2``) and ``mixture`` (``alpha``, ``beta``, ``delta``, ``c``,
``sigma0_sq``, ``nu0``, ``nu1``).  The mixture family carries its own
volatility, so ``vol`` is ignored there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, ModelValidationError, ValidationError
from .kernel import LevyKernelAtLocation
from .model import ConstVol, ModelSpec, gamma_from_dict, mixture_model, proportional_model, vol_from_dict
from .payoff import Payoff
from .solvers import fraclin_model, mixture_coefficients, solve_mixture, solve_proportional

DEFAULT_DOMAIN = (math.log(2.0), math.log(30.0))


@dataclass
class ModelFile:
    config: dict
    model: ModelSpec
    kind: str
    x0: float | None = None


@dataclass
class Solution:
    kind: str
    G: Payoff
    Q: float
    info: dict = field(default_factory=dict)


def _require(d: dict, *keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise FormatError(f"model file is missing {', '.join(missing)}")
    try:
        return [float(d[k]) for k in keys]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"non-numeric model parameter: {exc}") from exc


def model_from_dict(cfg: dict) -> ModelFile:
    """Build a :class:`ModelSpec` from a parsed model file.

    Raises:
        FormatError: unknown keys or kinds, missing or non-numeric fields.
        ModelValidationError: parameters outside the family's admissible range.
    """
    if not isinstance(cfg, dict):
        raise FormatError("model file must hold a JSON object")
    try:
        domain = tuple(float(v) for v in cfg.get("domain", DEFAULT_DOMAIN))
        if len(domain) != 2:
            raise FormatError("domain must have two entries")
        kern = dict(cfg.get("kernel", {"kind": "none"}))
        kind = kern.pop("kind", "none")
        vol = vol_from_dict(cfg.get("vol", {"kind": "const", "sigma": 0.2}))
        x0 = float(cfg["x0"]) if "x0" in cfg else None
    except (TypeError, ValueError, KeyError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc

    if kind == "none":
        model = ModelSpec(vol=vol, domain_hint=domain, name="diffusion", config=cfg)
    elif kind == "proportional":
        if not isinstance(vol, ConstVol):
            raise ModelValidationError("the proportional family needs a constant vol")
        gamma = gamma_from_dict(kern.pop("gamma", None))
        nu = LevyKernelAtLocation.from_dict(kern)
        model = proportional_model(vol.sigma, nu, gamma, domain)
    elif kind == "fraclin":
        alpha, beta, z0, g1, g2 = _require(kern, "alpha", "beta", "z0", "gamma1", "gamma2")
        model, _ = fraclin_model(alpha, beta, z0, g1, g2, vol, domain)
    elif kind == "mixture":
        alpha, beta, delta, c = _require(kern, "alpha", "beta", "delta", "c")
        s0 = float(kern.get("sigma0_sq", 2.0))
        nu0 = LevyKernelAtLocation.from_dict(kern.get("nu0"))
        nu1 = LevyKernelAtLocation.from_dict(kern.get("nu1"))
        model = mixture_model(alpha, beta, delta, c, nu0, nu1, s0, domain)
    else:
        raise FormatError(f"unknown kernel kind {kind!r}")
    return ModelFile(cfg, model, kind, x0)


def load_model(path) -> ModelFile:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return model_from_dict(cfg)


def solve_model(mf: ModelFile, tail_tol: float = 1e-6, N: int | None = None, interval=None) -> Solution:
    """Pricing payoff ``G`` for a loaded model, with ``Q`` (``Q0`` for mixtures).

    ``interval`` is where a truncated mixture series must meet ``tail_tol``;
    it defaults to the model's domain.
    """
    kern = dict(mf.config.get("kernel", {"kind": "none"}))
    kind = kern.pop("kind", "none")
    if kind == "none":
        return Solution(kind, Payoff(linear=-2.0), 2.0)
    if kind == "proportional":
        kern.pop("gamma", None)
        sigma = float(mf.model.config["vol"]["sigma"])
        Q, G = solve_proportional(sigma, LevyKernelAtLocation.from_dict(kern))
        return Solution(kind, G, Q)
    if kind == "fraclin":
        alpha, beta, z0, g1, g2 = _require(kern, "alpha", "beta", "z0", "gamma1", "gamma2")
        _, G = fraclin_model(alpha, beta, z0, g1, g2, vol_from_dict(mf.config.get("vol", {"kind": "const", "sigma": 0.2})))
        return Solution(kind, G, float("nan"), {"knots": list(G.knots)})
    if kind == "mixture":
        alpha, beta, delta, c = _require(kern, "alpha", "beta", "delta", "c")
        nu0 = LevyKernelAtLocation.from_dict(kern.get("nu0"))
        nu1 = LevyKernelAtLocation.from_dict(kern.get("nu1"))
        coeffs = mixture_coefficients(alpha, beta, c, delta, nu0, nu1)
        G, used = solve_mixture(coeffs, tail_tol, interval=interval or mf.model.domain_hint, n_max=N)
        return Solution(kind, G, coeffs.Q0, {"Q1": coeffs.Q1, "N": used, "coefficients": coeffs})
    raise ValidationError(f"unknown kernel kind {kind!r}")

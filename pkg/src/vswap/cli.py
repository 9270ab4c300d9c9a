"""Command-line front end.

Every file written with ``--out PATH`` gets a ``PATH.manifest.json`` next to
it recording the subcommand, resolved configuration, input digests, seed and
version.  Nothing time-dependent goes into outputs, so equal manifests mean
byte-identical files.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .figures import payoff_figure, ratio_figure
from .kernel import LevyKernelAtLocation
from .mc import ClockSpec, SimConfig, identity_gap, mc_ratio, mean_estimate, simulate_paths
from .modelfile import load_model, solve_model
from .payoff import Payoff, table_csv
from .ratio import RatioModel, identity_laplace, qbar_curve
from .replication import black_scholes_smile, parse_smile, smile_csv, vs_strike_report
from .solvers import kernel_ratio

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k}={_fmt(v)}\n" for k, v in meta.items())


def _csv_text(columns, rows, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class _Run:
    """Collects outputs and writes them with their manifests."""

    def __init__(self, args, inputs=()):
        self.args = args
        self.inputs = {str(p): _sha256(p) for p in inputs if p}
        self.outputs: list[tuple[Path, str]] = []

    def emit(self, text: str, path=None):
        path = path or self.args.out
        if path is None:
            sys.stdout.write(text)
        else:
            self.outputs.append((Path(path), text))

    def finish(self):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "out")}
        for path, text in self.outputs:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        for path, _ in self.outputs:
            manifest = {
                "subcommand": self.args.command,
                "config": config,
                "inputs": self.inputs,
                "seed": getattr(self.args, "seed", None),
                "version": __version__,
                "outputs": {str(p): hashlib.sha256(t.encode()).hexdigest() for p, t in self.outputs},
            }
            Path(f"{path}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------- #
# Subcommands
# --------------------------------------------------------------------------- #


def cmd_solve(args) -> int:
    mf = load_model(args.model)
    sol = solve_model(mf, tail_tol=args.tol, N=args.N)
    run = _Run(args, [args.model])
    meta = {"kind": sol.kind, "Q" if sol.kind != "mixture" else "Q0": sol.Q}
    print(f"kind: {sol.kind}")
    if sol.kind == "mixture":
        print(f"Q0={sol.Q:.12g}")
        print(f"Q1={sol.info['Q1']:.12g}")
        print(f"N={sol.info['N']}")
        meta.update(Q1=sol.info["Q1"], N=sol.info["N"])
    elif sol.kind != "fraclin":
        print(f"Q={sol.Q:.12g}")
    else:
        print(f"knots: {sol.info['knots']}")
    x = np.linspace(*mf.model.domain_hint, args.points)
    run.emit(_meta_lines(meta) + table_csv(sol.G, x))
    if args.out:
        run.emit(sol.G.to_json() + "\n", Path(args.out).with_suffix(".payoff.json"))
    run.finish()
    return EXIT_OK


def _load_payoff(args) -> Payoff:
    if args.payoff:
        try:
            return Payoff.from_json(Path(args.payoff).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read {args.payoff}: {exc}") from exc
    if args.model:
        return solve_model(load_model(args.model), tail_tol=args.tol).G
    return Payoff(linear=-2.0)


def cmd_replicate(args) -> int:
    smile = parse_smile(args.smile, F0=args.F0)
    G = _load_payoff(args)
    rep = vs_strike_report(G, smile, args.kappa)
    run = _Run(args, [args.smile, args.payoff, args.model])
    for w in smile.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"vs_strike={rep.value:.12g}")
    print(f"kappa={rep.kappa:.12g}")
    print(f"parity_residual_max={rep.parity_residual_max:.3g}")
    print(f"tail_bound={rep.tail_bound:.3g}")
    if args.out:
        rows = [[k, v] for k, v in rep.to_dict().items()]
        run.emit(_csv_text(["quantity", "value"], rows, {"F0": smile.F0, "T": smile.T}))
    run.finish()
    return EXIT_OK


def _clock(args) -> ClockSpec:
    spec = args.clock
    if spec == "identity":
        return ClockSpec.identity()
    if spec.startswith("activity"):
        params = {}
        _, _, rest = spec.partition(":")
        try:
            for item in filter(None, rest.split(",")):
                k, _, v = item.partition("=")
                params[k.strip()] = float(v)
            return ClockSpec.activity(**params)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad clock parameters: {exc}") from exc
    p = Path(spec)
    if p.exists():
        try:
            return ClockSpec.from_dict(json.loads(p.read_text()))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ValidationError(f"{spec}: not a clock description ({exc})") from exc
    raise ValidationError(f"unknown clock {spec!r}; use identity, activity[:k=v,...] or a JSON file")


def cmd_simulate(args) -> int:
    mf = load_model(args.model)
    clock = _clock(args)
    x0 = args.x0 if args.x0 is not None else (mf.x0 if mf.x0 is not None else math.log(10.0))
    cfg = SimConfig(paths=args.paths, steps=args.steps, T=args.T, seed=args.seed)
    rec = simulate_paths(mf.model, clock, x0, cfg)
    sol = solve_model(mf, args.tol, interval=(float(rec.X_T.min()), float(rec.X_T.max())))
    gap = identity_gap(rec, sol.G, x0)
    qv = mean_estimate(rec.QV)
    print(f"paths={len(rec)} steps={cfg.n_steps} seed={cfg.seed}")
    print(f"mean_QV={qv.mean:.10g} se={qv.se:.3g}")
    print(f"identity_gap={gap.mean:.6g} se={gap.se:.3g} {'PASS' if gap.passes else 'FAIL'} (3 SE)")
    try:
        r = mc_ratio(rec, x0)
        print(f"mc_ratio={r.mean:.10g} se={r.se:.3g}")
    except NumericalError as exc:
        print(f"mc_ratio: {exc}")
    run = _Run(args, [args.model] + ([args.clock] if Path(args.clock).exists() else []))
    meta = {"x0": x0, "identity_gap": gap.mean, "identity_gap_se": gap.se, "mean_QV": qv.mean, "mean_QV_se": qv.se}
    if args.out:
        run.emit(_meta_lines(meta) + rec.to_csv())
    run.finish()
    return EXIT_OK


def cmd_ratio(args) -> int:
    nu = LevyKernelAtLocation.from_atoms([(args.z0, 1.0)])
    model = RatioModel(args.omega, args.c, args.delta, nu, N=args.N)
    F0s = np.linspace(args.F0_min, args.F0_max, args.points)
    res = qbar_curve(model, identity_laplace, args.T, F0s)
    rows = [[r.F0, r.value, r.N, r.outer_terms, r.last_outer_term] for r in res]
    meta = {
        "omega": args.omega,
        "c": args.c,
        "delta": args.delta,
        "z0": args.z0,
        "T": args.T,
        "N": args.N,
        "reference_no_jumps": "y=2",
        "reference_pure_jump": f"y={kernel_ratio(nu)!r}",
    }
    run = _Run(args)
    run.emit(_csv_text(["F0", "Qbar", "N", "outer_terms", "last_outer_term"], rows, meta))
    run.finish()
    return EXIT_OK


def cmd_figures(args) -> int:
    if args.which == 5:
        data = ratio_figure(points=args.points or 100, N=args.N or 35)
    else:
        data, _ = payoff_figure(args.which, points=args.points or 400, tail_tol=args.tol)
    run = _Run(args)
    run.emit(_csv_text(data.columns, data.rows, data.meta))
    run.finish()
    return EXIT_OK


def cmd_synth_smile(args) -> int:
    smile = black_scholes_smile(args.F0, args.sigma, args.T, n=args.n, lo=args.lo, hi=args.hi, spacing=args.spacing)
    run = _Run(args)
    run.emit(smile_csv(smile))
    run.finish()
    return EXIT_OK


# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vswap", description="Variance swaps on time-changed Markov processes.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve for the pricing payoff G of a model file")
    s.add_argument("--model", required=True)
    s.add_argument("--tol", type=float, default=1e-6, help="series tail tolerance (mixture models)")
    s.add_argument("--N", type=int, default=None, help="maximum series order (mixture models)")
    s.add_argument("--points", type=int, default=201)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("replicate", help="VS strike from a smile CSV")
    s.add_argument("--smile", required=True)
    s.add_argument("--payoff", help="payoff JSON; default G = -2x")
    s.add_argument("--model", help="solve this model file for G instead of --payoff")
    s.add_argument("--kappa", type=float, default=None)
    s.add_argument("--F0", type=float, default=None)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--out")
    s.set_defaults(func=cmd_replicate)

    s = sub.add_parser("simulate", help="Monte Carlo check of the pricing identity")
    s.add_argument("--model", required=True)
    s.add_argument("--clock", default="identity", help="identity | activity[:v0=..,kappa=..,theta=..,eta=..,rho=..] | JSON file")
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--steps", type=int, default=1000, help="steps per unit time")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--x0", type=float, default=None)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ratio", help="approximate VS / log-contract ratio curve")
    s.add_argument("--omega", type=float, default=0.3)
    s.add_argument("--c", type=float, default=0.395)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--z0", type=float, default=-1.0)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--N", type=int, default=35)
    s.add_argument("--F0-min", dest="F0_min", type=float, default=0.2)
    s.add_argument("--F0-max", dest="F0_max", type=float, default=20.0)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ratio)

    s = sub.add_parser("figures", help="data for the payoff plots (1-4) and the ratio curve (5)")
    s.add_argument("--which", type=int, required=True, choices=[1, 2, 3, 4, 5])
    s.add_argument("--points", type=int, default=None)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--out")
    s.set_defaults(func=cmd_figures)

    s = sub.add_parser("synth-smile", help="parity-exact Black-Scholes smile")
    s.add_argument("--F0", type=float, default=10.0)
    s.add_argument("--sigma", type=float, default=0.25)
    s.add_argument("--T", type=float, default=0.5)
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--lo", type=float, default=0.2)
    s.add_argument("--hi", type=float, default=5.0)
    s.add_argument("--spacing", choices=["log", "linear"], default="log")
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth_smile)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())

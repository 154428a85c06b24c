"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 integration-failure threshold
exceeded, 3 analysis input error. The worker pool size can also be set with
the ROTORANNEAL_THREADS environment variable (a --threads flag wins).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import (
    DegenerateRatioError,
    FormatVersionError,
    InsufficientDataError,
    InsufficientOverlapError,
    InsufficientSamplesError,
    IntegrationFailureError,
    InvalidParameterError,
    UnsupportedConfigurationError,
)
from .harness import equilibrium_scan, run_ensemble, sweep
from . import recipes

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTEGRATION = 2
EXIT_ANALYSIS = 3

_CONFIG_ERRORS = (InvalidParameterError, UnsupportedConfigurationError,
                  json.JSONDecodeError, FileNotFoundError, KeyError, TypeError, ValueError)
_ANALYSIS_ERRORS = (FormatVersionError, InsufficientDataError, InsufficientSamplesError,
                    InsufficientOverlapError, DegenerateRatioError)


def _load_config(path: str, seed: int | None) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(path)
    if seed is not None:
        cfg = cfg.with_overrides({"ensemble": {"base_seed": seed}})
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.seed)
    result = run_ensemble(cfg, args.out, threads=args.threads)
    print(f"wrote {result.rc.n_trajectories} trajectories to {args.out} "
          f"({result.n_failed} failed)")
    for s in result.summaries:
        print(f"  {s.observable:>6}: kappa1 = {s.kappa1:.6g} +- {s.se_kappa1:.2g}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if "base" not in spec or "deltas" not in spec:
        raise InvalidParameterError("sweep config must contain 'base' and 'deltas'")
    base = ExperimentConfig.from_dict(spec["base"])
    if args.seed is not None:
        base = base.with_overrides({"ensemble": {"base_seed": args.seed}})
    report = sweep(base, spec["deltas"], args.out, threads=args.threads, force=args.force)
    for cell in report.cells:
        print(f"  [{cell['state']:>7}] {cell['cell']}")
    if report.n_errors:
        raise IntegrationFailureError(f"{report.n_errors} sweep cells failed", -1, -1)
    print(f"sweep summary: {Path(args.out) / 'sweep_summary.csv'}")
    return EXIT_OK


def _cmd_equilibrium(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args.seed)
    if args.epsilons:
        eps = tuple(float(x) for x in args.epsilons.split(","))
        cfg = cfg.with_overrides({"outputs": {"correlator_eps": eps}})
    report = equilibrium_scan(cfg, args.out, threads=args.threads, auto_slow=not args.no_auto_slow)
    print(f"equilibrium scan at tau_q = {report.tau_q:g} -> {args.out}")
    for info in report.profiles:
        xi = f"{info['xi']:.4g}" if info["xi"] is not None else "n/a"
        print(f"  eps/2r = {info['eps_over_2r']:g}: xi = {xi}")
    for w in report.warnings:
        print(f"  warning: {w}", file=sys.stderr)
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    out = Path(args.out)
    figures = not args.no_figures
    recipe = args.recipe.lower()
    if recipe == "kzfit":
        report = recipes.kzfit_recipe(args.input, observable=args.observable,
                                      z_nu=args.z_nu, tau0=args.tau0,
                                      out_dir=out, figures=figures)
    elif recipe == "expfit":
        report = recipes.expfit_recipe(args.input, observable=args.observable,
                                       r_power=args.r_power, out_dir=out, figures=figures,
                                       min_kappa1=args.min_kappa1)
    elif recipe == "collapse":
        if args.mode == "series":
            report = recipes.collapse_series_recipe(
                args.input, x_mode=args.x_mode, z_nu=args.z_nu or 1.0,
                tau0=args.tau0 or 1.0, out_dir=out, figures=figures)
        else:
            report = recipes.collapse_scaling_recipe(
                args.input, observable=args.observable, r_exponent=args.r_exponent,
                out_dir=out, figures=figures)
    elif recipe == "cumulantratios":
        report = recipes.cumulant_ratio_recipe(args.input, observable=args.observable,
                                               scale=args.scale, out_dir=out, figures=figures)
    else:
        raise InvalidParameterError(f"unknown recipe {args.recipe!r}; choose from {recipes.RECIPES}")
    print(report.text, end="")
    return EXIT_OK


def _cmd_predict(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out else None
    report = recipes.predict_recipe(args.z_nu, args.nu, args.r, args.n, args.tau_q,
                                    tau0=args.tau0 or 1.0, xi0=args.xi0 or 1.0,
                                    out_dir=out)
    print(report.text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotoranneal",
                                 description="Langevin annealing of rotor rings: run, sweep, analyze.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        if needs_config:
            p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--threads", type=int, default=None, help="worker pool size")
        p.add_argument("--force", action="store_true", help="recompute completed outputs")

    p_run = sub.add_parser("run", help="run one ensemble")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid of ensembles")
    add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_eq = sub.add_parser("equilibrium", help="adiabatic correlation-length scan")
    add_common(p_eq)
    p_eq.add_argument("--epsilons", default="", help="comma-separated eps/(2r) values")
    p_eq.add_argument("--no-auto-slow", action="store_true", help="keep the configured tau_q")
    p_eq.set_defaults(func=_cmd_equilibrium)

    p_an = sub.add_parser("analyze", help="fit / collapse / ratio reports over run outputs")
    p_an.add_argument("--recipe", required=True, help=f"one of {recipes.RECIPES}")
    p_an.add_argument("--input", nargs="+", required=True, help="summary CSVs or run dirs")
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--observable", default="n1", choices=["n1", "n2", "rho_e", "mz"])
    p_an.add_argument("--z-nu", dest="z_nu", type=float, default=None)
    p_an.add_argument("--tau0", type=float, default=None)
    p_an.add_argument("--r-power", dest="r_power", type=float, default=0.5)
    p_an.add_argument("--r-exponent", dest="r_exponent", type=float, default=5.0)
    p_an.add_argument("--min-kappa1", dest="min_kappa1", type=float, default=0.0)
    p_an.add_argument("--mode", default="scaling", choices=["scaling", "series"])
    p_an.add_argument("--x-mode", dest="x_mode", default="t_hat", choices=["t_hat", "tau_q"])
    p_an.add_argument("--scale", default="counts", choices=["counts", "density"])
    p_an.add_argument("--no-figures", action="store_true")
    p_an.set_defaults(func=_cmd_analyze)

    p_pr = sub.add_parser("predict", help="freeze-out / threshold scale calculator")
    p_pr.add_argument("--z-nu", dest="z_nu", type=float, required=True)
    p_pr.add_argument("--nu", type=float, required=True)
    p_pr.add_argument("--r", type=int, required=True)
    p_pr.add_argument("--n", type=int, required=True)
    p_pr.add_argument("--tau-q", dest="tau_q", type=float, required=True)
    p_pr.add_argument("--tau0", type=float, default=None)
    p_pr.add_argument("--xi0", type=float, default=None)
    p_pr.add_argument("--out", default=None)
    p_pr.set_defaults(func=_cmd_predict)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except IntegrationFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except _ANALYSIS_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())

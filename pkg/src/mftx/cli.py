"""Command-line front end.

Subcommands::

    mftx analytic  --config c.json --quantity e2e_hit --t-end 20 \
                   --t-steps 400 --out curve.csv
    mftx simulate  --config c.json --seed 7 --realizations 500 \
                   --bin-width 0.25 --t-end 50 --out runs/defaults
    mftx compare   --analytic curve.csv --sim runs/defaults.e2e.csv \
                   --out report.json
    mftx recipe    --recipe fig4.json --out-dir figs/fig4
    mftx eigens    --config c.json --n-terms 200 --out spectrum.csv

Exit codes are a stable contract: 0 success, 1 invalid input (including
usage errors), 2 numerical failure, 3 comparison failed.  Failures print a
single JSON object to stderr with at least ``error`` and ``message`` keys.
All file writes are atomic (temporary file plus rename).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .cir import (QuadraturePolicy, SeriesPolicy, e2e_hitting,
                  release_density, release_fraction, uniform_hitting)
from .compare import compare_curves
from .config import SystemConfig, TimeSeries, validate
from .eigen import solve_eigenvalues
from .errors import (ConfigError, EigenvalueError, GeometryError,
                     GridAlignmentError, QuadratureError, RecipeError,
                     SeriesError)
from .recipes import ExperimentRecipe, atomic_write_text, run_recipe
from .sim import CirEstimate, RunSpec, run_campaign

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_COMPARISON = 3

_ANALYTIC_QUANTITIES = ("release_density", "release_fraction",
                        "uniform_hit", "e2e_hit")


def _emit_error(name: str, message: str, **extra) -> None:
    payload = {"error": name, "message": message}
    payload.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(payload), file=sys.stderr)


def _load_config(path: str) -> SystemConfig:
    text = Path(path).read_text()
    config = SystemConfig.from_json(text)
    validate(config)
    return config


def _parse_series_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0].strip() != "t,value":
        raise ValueError("analytic CSV must start with header 't,value'")
    t, v = [], []
    for ln in lines[1:]:
        a, b = ln.split(",")
        t.append(float(a))
        v.append(float(b))
    return np.asarray(t), np.asarray(v)


def _cmd_analytic(args) -> int:
    config = _load_config(args.config)
    if args.t_steps < 2:
        raise ValueError("--t-steps must be at least 2")
    if not 0 <= args.t_start < args.t_end:
        raise ValueError("require 0 <= --t-start < --t-end")
    t = np.linspace(args.t_start, args.t_end, args.t_steps)
    policy = SeriesPolicy(n_terms=args.n_terms)
    spectrum = None if config.k_f == 0 else solve_eigenvalues(config,
                                                              policy.n_terms)
    if args.quantity == "uniform_hit":
        values = uniform_hitting(config, t)
    elif args.quantity == "release_density":
        values = release_density(config, spectrum, policy, t)
    elif args.quantity == "release_fraction":
        values = release_fraction(config, spectrum, policy, t)
    else:
        values = e2e_hitting(config, spectrum, policy, QuadraturePolicy(), t)
    series = TimeSeries(quantity=args.quantity, t=t, value=values)
    atomic_write_text(Path(args.out), series.to_csv_text())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    runspec = RunSpec(realizations=args.realizations, seed=args.seed,
                      bin_width=args.bin_width, t_end=args.t_end)
    start = time.perf_counter()
    result = run_campaign(config, runspec, workers=args.workers)
    wall = time.perf_counter() - start
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(Path(str(stem) + ".release.csv"),
                      result.release.to_csv_text())
    atomic_write_text(Path(str(stem) + ".e2e.csv"), result.e2e.to_csv_text())
    sidecar = {
        "config_hash": config.hash(),
        "seed": runspec.seed,
        "realizations": runspec.realizations,
        "bin_width": runspec.bin_width,
        "t_end": runspec.t_end,
        "workers": args.workers,
        "wall_time_s": wall,
        "n_vesicles": result.n_vesicles,
        "n_fused": result.n_fused,
        "unfused_fraction": result.unfused_fraction,
        "n_molecules": result.n_molecules,
        "n_absorbed": result.n_absorbed,
        "n_degraded": result.n_degraded,
        "n_alive": result.n_alive,
    }
    atomic_write_text(Path(str(stem) + ".json"),
                      json.dumps(sidecar, indent=2) + "\n")
    return EXIT_OK


def _cmd_compare(args) -> int:
    t, values = _parse_series_csv(Path(args.analytic).read_text())
    estimate = CirEstimate.from_csv_text(Path(args.sim).read_text())
    report = compare_curves(t, values, estimate)
    atomic_write_text(Path(args.out), report.to_json())
    print(f"fraction_within={report.fraction_within:.4f} "
          f"sup_deviation={report.sup_deviation:.3e} "
          f"rmse={report.rmse:.3e} passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_COMPARISON


def _cmd_recipe(args) -> int:
    recipe = ExperimentRecipe.from_json(Path(args.recipe).read_text())
    manifest = run_recipe(recipe, args.out_dir, workers=args.workers)
    print(f"wrote {len(manifest['files'])} files and manifest.json "
          f"to {args.out_dir}")
    return EXIT_OK


def _cmd_eigens(args) -> int:
    config = _load_config(args.config)
    spectrum = solve_eigenvalues(config, args.n_terms)
    lines = ["n,x,lambda,residual"]
    for i in range(len(spectrum)):
        lines.append(f"{i + 1},{float(spectrum.x[i])!r},"
                     f"{float(spectrum.lambdas[i])!r},"
                     f"{float(spectrum.residuals[i])!r}")
    atomic_write_text(Path(args.out), "\n".join(lines) + "\n")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mftx",
        description="Vesicle-release transmitter: analytic curves, particle "
                    "simulation, comparison reports, figure recipes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="evaluate an analytic curve to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--quantity", required=True, choices=_ANALYTIC_QUANTITIES)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--t-steps", type=int, required=True)
    p.add_argument("--n-terms", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--realizations", type=int, required=True)
    p.add_argument("--bin-width", type=float, default=0.25)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True,
                   help="output stem; writes <out>.release.csv, "
                        "<out>.e2e.csv, <out>.json")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="score analytic vs simulated curves")
    p.add_argument("--analytic", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("recipe", help="evaluate a figure recipe")
    p.add_argument("--recipe", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_recipe)

    p = sub.add_parser("eigens", help="write the eigenvalue spectrum to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--n-terms", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eigens)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its message; keep the exit-code contract.
        code = exc.code if isinstance(exc.code, int) else 1
        return EXIT_OK if code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), violations=exc.violations)
        return EXIT_INVALID
    except (RecipeError, GridAlignmentError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_INVALID
    except QuadratureError as exc:
        _emit_error("QuadratureError", str(exc), estimate=exc.estimate,
                    error_bound=exc.error_bound)
        return EXIT_NUMERICAL
    except (EigenvalueError, SeriesError, GeometryError,
            ArithmeticError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

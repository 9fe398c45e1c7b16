"""Figure recipes: batch evaluation plans that mirror the summary figures.

A recipe names a figure family, a base configuration, one-at-a-time
parameter sweeps, a time grid, and optionally a simulation run.  Running a
recipe writes one CSV per curve plus ``manifest.json`` describing every
file; the plotting package consumes only that manifest and the CSV schemas
documented below.

Manifest schema::

    {
      "kind": "fig2_release" | "fig3_peak_time" | "fig4_e2e",
      "complete": true | false,
      "error": null | "<message>",
      "config_hash": "<sha256 of the base configuration>",
      "files": [
        {"file": "<name.csv>",
         "quantity": "release_density" | "release_count" | "e2e_hit"
                     | "point_hit" | "peak_release_time",
         "sweep": null | {"param": "<config field>", "value": <number>},
         "role": "analytic" | "simulation" | "reference"}
      ]
    }

CSV schemas: analytic curves ``t,value``; peak-time curves ``r_tx,t_pr``;
simulation estimates ``t_bin_center,density,stderr,n_events``.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import (SystemConfig, TimeSeries, _CONFIG_FIELDS, validate)
from .cir import (QuadraturePolicy, SeriesPolicy, e2e_hitting, point_hitting,
                  release_density, release_fraction, peak_release_time)
from .eigen import solve_eigenvalues
from .errors import RecipeError
from .sim import RunSpec, run_campaign

__all__ = ["ExperimentRecipe", "run_recipe", "atomic_write_text"]

RECIPE_KINDS = ("fig2_release", "fig3_peak_time", "fig4_e2e")

_INT_FIELDS = ("n_v", "eta")


def atomic_write_text(path: Path, text: str) -> None:
    """Write a file so readers never observe a half-written state."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _coerce_value(param: str, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecipeError(f"sweep {param}: values must be numbers, got {value!r}")
    if param in _INT_FIELDS:
        if float(value) != int(value):
            raise RecipeError(f"sweep {param}: values must be integers, got {value!r}")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class ExperimentRecipe:
    """One figure's evaluation plan."""

    kind: str
    base_config: SystemConfig
    sweeps: tuple
    time_grid: tuple
    runspec: Optional[RunSpec] = None

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise RecipeError(f"unknown recipe kind {self.kind!r}; "
                              f"expected one of {', '.join(RECIPE_KINDS)}")
        validate(self.base_config)
        sweeps = []
        for entry in self.sweeps:
            try:
                param, values = entry
            except (TypeError, ValueError):
                raise RecipeError(f"sweep entries must be (param, values) "
                                  f"pairs, got {entry!r}") from None
            if param not in _CONFIG_FIELDS:
                raise RecipeError(f"sweep parameter {param!r} is not a "
                                  "configuration field")
            values = tuple(_coerce_value(param, v) for v in values)
            if not values:
                raise RecipeError(f"sweep {param}: value list is empty")
            for v in values:
                validate(self.base_config.replace(**{param: v}))
            sweeps.append((param, values))
        object.__setattr__(self, "sweeps", tuple(sweeps))
        try:
            t_start, t_end, n_points = self.time_grid
        except (TypeError, ValueError):
            raise RecipeError("time_grid must be (t_start, t_end, n_points)") from None
        if not (isinstance(n_points, int) and not isinstance(n_points, bool)
                and n_points >= 2):
            raise RecipeError(f"time_grid: n_points must be an integer >= 2, "
                              f"got {n_points!r}")
        t_start = float(t_start)
        t_end = float(t_end)
        if not 0.0 <= t_start < t_end:
            raise RecipeError("time_grid: require 0 <= t_start < t_end")
        object.__setattr__(self, "time_grid", (t_start, t_end, n_points))
        if self.runspec is not None and not isinstance(self.runspec, RunSpec):
            raise RecipeError("runspec must be a RunSpec or null")

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "base_config": json.loads(self.base_config.to_json()),
            "sweeps": [[p, list(vs)] for p, vs in self.sweeps],
            "time_grid": list(self.time_grid),
            "runspec": None if self.runspec is None
            else dataclasses.asdict(self.runspec),
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentRecipe":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RecipeError(f"recipe is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise RecipeError("recipe document must be a JSON object")
        required = {"kind", "base_config", "sweeps", "time_grid"}
        missing = sorted(required - set(payload))
        if missing:
            raise RecipeError(f"recipe is missing keys: {', '.join(missing)}")
        unknown = sorted(set(payload) - required - {"runspec"})
        if unknown:
            raise RecipeError(f"recipe has unknown keys: {', '.join(unknown)}")
        base = SystemConfig.from_json(json.dumps(payload["base_config"]))
        runspec = None
        rs = payload.get("runspec")
        if rs is not None:
            if not isinstance(rs, dict):
                raise RecipeError("runspec must be an object or null")
            try:
                runspec = RunSpec(realizations=rs["realizations"],
                                  seed=rs["seed"],
                                  bin_width=rs["bin_width"],
                                  t_end=rs["t_end"])
            except KeyError as exc:
                raise RecipeError(f"runspec is missing key {exc}") from None
            except ValueError as exc:
                raise RecipeError(f"runspec invalid: {exc}") from None
        grid = payload["time_grid"]
        if (not isinstance(grid, (list, tuple)) or len(grid) != 3):
            raise RecipeError("time_grid must be [t_start, t_end, n_points]")
        n_points = grid[2]
        if isinstance(n_points, float) and n_points == int(n_points):
            n_points = int(n_points)
        return cls(kind=payload["kind"], base_config=base,
                   sweeps=tuple((p, tuple(vs)) for p, vs in payload["sweeps"]),
                   time_grid=(grid[0], grid[1], n_points),
                   runspec=runspec)


def _slug(value) -> str:
    text = repr(int(value)) if float(value) == int(value) else repr(float(value))
    return text.replace(".", "p").replace("-", "m")


def _curve_points(recipe: ExperimentRecipe, skip: tuple[str, ...] = ()):
    """Base configuration first, then each sweep value one at a time."""
    yield None, recipe.base_config
    for param, values in recipe.sweeps:
        if param in skip:
            continue
        for v in values:
            yield {"param": param, "value": v}, \
                recipe.base_config.replace(**{param: v})


def _series_csv(t: np.ndarray, values: np.ndarray) -> str:
    lines = ["t,value"]
    lines += [f"{float(ti)!r},{float(vi)!r}" for ti, vi in zip(t, values)]
    return "\n".join(lines) + "\n"


class _ManifestWriter:
    def __init__(self, out_dir: Path, kind: str, config_hash: str):
        self.out_dir = Path(out_dir)
        self.kind = kind
        self.config_hash = config_hash
        self.files: list[dict] = []

    def add(self, name: str, text: str, quantity: str, sweep, role: str) -> None:
        atomic_write_text(self.out_dir / name, text)
        self.files.append({"file": name, "quantity": quantity,
                           "sweep": sweep, "role": role})

    def finish(self, complete: bool, error: str | None) -> dict:
        manifest = {"kind": self.kind, "complete": complete, "error": error,
                    "config_hash": self.config_hash, "files": self.files}
        atomic_write_text(self.out_dir / "manifest.json",
                          json.dumps(manifest, indent=2) + "\n")
        return manifest


def _run_fig2(recipe: ExperimentRecipe, writer: _ManifestWriter,
              policy: SeriesPolicy, workers: int) -> None:
    t_start, t_end, n_points = recipe.time_grid
    t = np.linspace(t_start, t_end, n_points)
    for sweep, cfg in _curve_points(recipe):
        tag = "base" if sweep is None else f"{sweep['param']}_{_slug(sweep['value'])}"
        spectrum = solve_eigenvalues(cfg, policy.n_terms)
        dens = release_density(cfg, spectrum, policy, t)
        series = TimeSeries(quantity="release_density", t=t, value=dens)
        writer.add(f"fig2_release_density_{tag}.csv", series.to_csv_text(),
                   "release_density", sweep, "analytic")
        frac = release_fraction(cfg, spectrum, policy, t)
        count = cfg.n_v * cfg.eta * frac
        writer.add(f"fig2_release_count_{tag}.csv", _series_csv(t, count),
                   "release_count", sweep, "analytic")
        if recipe.runspec is not None:
            result = run_campaign(cfg, recipe.runspec, workers=workers)
            writer.add(f"fig2_release_sim_{tag}.csv",
                       result.release.to_csv_text(),
                       "release_density", sweep, "simulation")


def _run_fig3(recipe: ExperimentRecipe, writer: _ManifestWriter,
              policy: SeriesPolicy) -> None:
    radii = dict(recipe.sweeps).get("r_tx")
    if radii is None:
        raise RecipeError("fig3_peak_time recipe needs an r_tx sweep "
                          "to supply the x-axis")
    for sweep, cfg in _curve_points(recipe, skip=("r_tx",)):
        tag = "base" if sweep is None else f"{sweep['param']}_{_slug(sweep['value'])}"
        lines = ["r_tx,t_pr"]
        for r in radii:
            point_cfg = cfg.replace(r_tx=r)
            validate(point_cfg)
            spectrum = solve_eigenvalues(point_cfg, policy.n_terms)
            t_pr = peak_release_time(point_cfg, spectrum, policy)
            lines.append(f"{float(r)!r},{float(t_pr)!r}")
        writer.add(f"fig3_peak_time_{tag}.csv", "\n".join(lines) + "\n",
                   "peak_release_time", sweep, "analytic")


def _run_fig4(recipe: ExperimentRecipe, writer: _ManifestWriter,
              policy: SeriesPolicy, quad: QuadraturePolicy,
              workers: int) -> None:
    t_start, t_end, n_points = recipe.time_grid
    t = np.linspace(t_start, t_end, n_points)
    for sweep, cfg in _curve_points(recipe):
        tag = "base" if sweep is None else f"{sweep['param']}_{_slug(sweep['value'])}"
        spectrum = solve_eigenvalues(cfg, policy.n_terms)
        dens = e2e_hitting(cfg, spectrum, policy, quad, t)
        series = TimeSeries(quantity="e2e_hit", t=t, value=dens)
        writer.add(f"fig4_e2e_{tag}.csv", series.to_csv_text(),
                   "e2e_hit", sweep, "analytic")
        if recipe.runspec is not None:
            result = run_campaign(cfg, recipe.runspec, workers=workers)
            writer.add(f"fig4_e2e_sim_{tag}.csv", result.e2e.to_csv_text(),
                       "e2e_hit", sweep, "simulation")
    # An ideal point transmitter at the TX center gives the reference
    # curve: same geometry, no membrane stage.
    base = recipe.base_config
    positive = t[t > 0]
    ref = point_hitting(base, base.l, positive)
    writer.add("fig4_point_reference.csv", _series_csv(positive, ref),
               "point_hit", None, "reference")


def run_recipe(recipe: ExperimentRecipe, out_dir, *,
               policy: SeriesPolicy | None = None,
               quad: QuadraturePolicy | None = None,
               workers: int = 1) -> dict:
    """Evaluate a recipe into ``out_dir`` and return the manifest.

    On any sub-evaluation failure the manifest is still written, flagged
    incomplete and carrying the error message, before the exception
    propagates.
    """
    policy = policy or SeriesPolicy()
    quad = quad or QuadraturePolicy()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = _ManifestWriter(out_dir, recipe.kind, recipe.base_config.hash())
    try:
        if recipe.kind == "fig2_release":
            _run_fig2(recipe, writer, policy, workers)
        elif recipe.kind == "fig3_peak_time":
            _run_fig3(recipe, writer, policy)
        else:
            _run_fig4(recipe, writer, policy, quad, workers)
    except BaseException as exc:
        writer.finish(complete=False, error=str(exc))
        raise
    return writer.finish(complete=True, error=None)

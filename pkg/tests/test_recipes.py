"""Recipe validation, execution, manifests, and output schemas."""

import json

import numpy as np
import pytest

from mftx import (
    CirEstimate,
    ExperimentRecipe,
    RecipeError,
    RunSpec,
    SeriesPolicy,
    TimeSeries,
    release_fraction,
    point_hitting,
    run_recipe,
)
from mftx.recipes import _slug, atomic_write_text


def _fig2(defaults, **overrides):
    kw = dict(kind="fig2_release", base_config=defaults,
              sweeps=(("k_f", (2.0,)),), time_grid=(0.0, 5.0, 11))
    kw.update(overrides)
    return ExperimentRecipe(**kw)


def test_recipe_json_roundtrip(defaults):
    recipe = _fig2(defaults, runspec=RunSpec(realizations=2, seed=7,
                                             bin_width=0.5, t_end=2.0))
    back = ExperimentRecipe.from_json(recipe.to_json())
    assert back.kind == recipe.kind
    assert back.base_config == recipe.base_config
    assert back.sweeps == recipe.sweeps
    assert back.time_grid == recipe.time_grid
    assert back.runspec == recipe.runspec


def test_recipe_validation_errors(defaults):
    with pytest.raises(RecipeError, match="unknown recipe kind"):
        ExperimentRecipe(kind="fig9", base_config=defaults, sweeps=(),
                         time_grid=(0.0, 5.0, 11))
    with pytest.raises(RecipeError, match="not a configuration field"):
        _fig2(defaults, sweeps=(("viscosity", (1.0,)),))
    with pytest.raises(RecipeError, match="value list is empty"):
        _fig2(defaults, sweeps=(("k_f", ()),))
    with pytest.raises(RecipeError, match="must be numbers"):
        _fig2(defaults, sweeps=(("k_f", ("fast",)),))
    with pytest.raises(RecipeError, match="must be integers"):
        _fig2(defaults, sweeps=(("n_v", (10.5,)),))
    with pytest.raises(RecipeError, match="n_points"):
        _fig2(defaults, time_grid=(0.0, 5.0, 1))
    with pytest.raises(RecipeError, match="t_start"):
        _fig2(defaults, time_grid=(5.0, 1.0, 11))
    # sweep values must produce valid configurations
    with pytest.raises(Exception):
        _fig2(defaults, sweeps=(("k_f", (90.0,)),))


def test_recipe_from_json_rejects_malformed(defaults):
    with pytest.raises(RecipeError, match="not valid JSON"):
        ExperimentRecipe.from_json("{nope")
    with pytest.raises(RecipeError, match="missing keys"):
        ExperimentRecipe.from_json('{"kind": "fig2_release"}')
    good = json.loads(_fig2(defaults).to_json())
    good["flavour"] = "extra"
    with pytest.raises(RecipeError, match="unknown keys"):
        ExperimentRecipe.from_json(json.dumps(good))


def test_fig2_outputs_and_manifest(defaults, spectrum, series_policy,
                                   tmp_path):
    recipe = _fig2(defaults)
    manifest = run_recipe(recipe, tmp_path)
    assert manifest["complete"] is True
    assert manifest["error"] is None
    assert manifest["kind"] == "fig2_release"
    assert manifest["config_hash"] == defaults.hash()
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    names = {f["file"] for f in manifest["files"]}
    assert names == {
        "fig2_release_density_base.csv", "fig2_release_count_base.csv",
        "fig2_release_density_k_f_2.csv", "fig2_release_count_k_f_2.csv",
    }
    for entry in manifest["files"]:
        assert (tmp_path / entry["file"]).exists()
        assert entry["role"] == "analytic"
    # density CSV parses back into a TimeSeries
    text = (tmp_path / "fig2_release_density_base.csv").read_text()
    series = TimeSeries.from_csv_text(text, "release_density")
    assert series.t.size == 11
    # expected count curve: every vesicle carries eta molecules
    count_text = (tmp_path / "fig2_release_count_base.csv").read_text()
    rows = [line.split(",") for line in count_text.strip().splitlines()[1:]]
    t = np.array([float(r[0]) for r in rows])
    counts = np.array([float(r[1]) for r in rows])
    expected = defaults.n_v * defaults.eta * release_fraction(
        defaults, spectrum, series_policy, t)
    assert np.allclose(counts, expected, rtol=1e-12)


def test_fig2_with_simulation(defaults, tmp_path):
    base = defaults.replace(n_v=10, eta=5)
    recipe = ExperimentRecipe(
        kind="fig2_release", base_config=base, sweeps=(),
        time_grid=(0.0, 2.0, 5),
        runspec=RunSpec(realizations=2, seed=7, bin_width=0.5, t_end=2.0))
    manifest = run_recipe(recipe, tmp_path)
    sim_files = [f for f in manifest["files"] if f["role"] == "simulation"]
    assert len(sim_files) == 1
    est = CirEstimate.from_csv_text(
        (tmp_path / sim_files[0]["file"]).read_text())
    assert est.n_source == 10 * 2


def test_fig3_peak_curve(defaults, tmp_path):
    recipe = ExperimentRecipe(
        kind="fig3_peak_time", base_config=defaults,
        sweeps=(("r_tx", (7.5, 10.0)),), time_grid=(0.0, 5.0, 2))
    manifest = run_recipe(recipe, tmp_path)
    assert manifest["complete"] is True
    text = (tmp_path / "fig3_peak_time_base.csv").read_text()
    lines = text.strip().splitlines()
    assert lines[0] == "r_tx,t_pr"
    rows = [tuple(map(float, ln.split(","))) for ln in lines[1:]]
    assert [r for r, _ in rows] == [7.5, 10.0]
    # larger transmitter peaks later
    assert rows[0][1] < rows[1][1]


def test_fig3_without_radius_sweep_fails_cleanly(defaults, tmp_path):
    recipe = ExperimentRecipe(kind="fig3_peak_time", base_config=defaults,
                              sweeps=(), time_grid=(0.0, 5.0, 2))
    with pytest.raises(RecipeError, match="needs an r_tx sweep"):
        run_recipe(recipe, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert "r_tx sweep" in manifest["error"]
    assert manifest["files"] == []


def test_fig4_reference_curve(defaults, tmp_path):
    recipe = ExperimentRecipe(kind="fig4_e2e", base_config=defaults,
                              sweeps=(), time_grid=(0.0, 4.0, 5))
    manifest = run_recipe(recipe, tmp_path)
    roles = {f["file"]: f["role"] for f in manifest["files"]}
    assert roles["fig4_point_reference.csv"] == "reference"
    text = (tmp_path / "fig4_point_reference.csv").read_text()
    rows = [tuple(map(float, ln.split(",")))
            for ln in text.strip().splitlines()[1:]]
    t = np.array([r[0] for r in rows])
    assert np.all(t > 0.0)
    expected = point_hitting(defaults, defaults.l, t)
    assert np.allclose([r[1] for r in rows], expected, rtol=1e-12)


def test_failure_leaves_partial_manifest(defaults, tmp_path):
    # a 10-mode truncation cannot resolve t = 5e-4, so the first curve
    # evaluation raises and the manifest must record the failure
    recipe = ExperimentRecipe(kind="fig2_release", base_config=defaults,
                              sweeps=(), time_grid=(5e-4, 5.0, 4))
    with pytest.raises(Exception, match="not converged"):
        run_recipe(recipe, tmp_path, policy=SeriesPolicy(n_terms=10))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert "not converged" in manifest["error"]


def test_slug_formatting():
    assert _slug(2) == "2"
    assert _slug(2.0) == "2"
    assert _slug(2.5) == "2p5"
    assert _slug(-1.5) == "m1p5"


def test_atomic_write_replaces_without_leftovers(tmp_path):
    target = tmp_path / "out.csv"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]

import json

import numpy as np
import pytest

from mftx_plots import ManifestError, SchemaError, load_manifest, read_columns

from conftest import entry, write_analytic, write_manifest


def test_load_valid_manifest(fig4_dir):
    m = load_manifest(fig4_dir / "manifest.json")
    assert m.kind == "fig4_e2e"
    assert m.complete
    assert len(m.files) == 5
    analytic = m.select("e2e_hit", role="analytic")
    assert [c.label for c in analytic] == ["base", "k_f=2"]
    assert all(c.path.is_file() for c in m.files)


def test_select_filters_by_quantity_and_role(fig2_dir):
    m = load_manifest(fig2_dir / "manifest.json")
    assert len(m.select("release_density")) == 4
    assert len(m.select("release_density", role="simulation")) == 2
    assert len(m.select("point_hit")) == 0


def test_missing_keys_rejected(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"kind": "fig4_e2e"}))
    with pytest.raises(ManifestError, match="missing keys"):
        load_manifest(tmp_path / "manifest.json")


def test_unknown_kind_rejected(tmp_path):
    write_manifest(tmp_path, "fig9_magic",
                   [entry("x.csv", "e2e_hit", None, "analytic")])
    with pytest.raises(ManifestError, match="fig9_magic"):
        load_manifest(tmp_path / "manifest.json")


def test_empty_file_list_rejected(tmp_path):
    write_manifest(tmp_path, "fig4_e2e", [])
    with pytest.raises(ManifestError, match="no files"):
        load_manifest(tmp_path / "manifest.json")


def test_missing_file_on_disk_rejected(tmp_path):
    write_manifest(tmp_path, "fig4_e2e",
                   [entry("ghost.csv", "e2e_hit", None, "analytic")])
    with pytest.raises(ManifestError, match="ghost.csv"):
        load_manifest(tmp_path / "manifest.json")


def test_bad_quantity_and_role_rejected(tmp_path):
    (tmp_path / "x.csv").write_text("t,value\n0.0,0.0\n")
    write_manifest(tmp_path, "fig4_e2e",
                   [entry("x.csv", "wavelength", None, "analytic")])
    with pytest.raises(ManifestError, match="wavelength"):
        load_manifest(tmp_path / "manifest.json")
    write_manifest(tmp_path, "fig4_e2e",
                   [entry("x.csv", "e2e_hit", None, "decorative")])
    with pytest.raises(ManifestError, match="decorative"):
        load_manifest(tmp_path / "manifest.json")


def test_bad_sweep_rejected(tmp_path):
    (tmp_path / "x.csv").write_text("t,value\n0.0,0.0\n")
    write_manifest(tmp_path, "fig4_e2e",
                   [entry("x.csv", "e2e_hit", {"param": "k_f"}, "analytic")])
    with pytest.raises(ManifestError, match="sweep"):
        load_manifest(tmp_path / "manifest.json")


def test_not_json_rejected(tmp_path):
    (tmp_path / "manifest.json").write_text("not json {")
    with pytest.raises(ManifestError, match="not valid JSON"):
        load_manifest(tmp_path / "manifest.json")


def test_read_columns_roundtrip(tmp_path):
    t = np.linspace(0.0, 1.0, 5)
    write_analytic(tmp_path / "a.csv", t, t ** 2)
    got_t, got_v = read_columns(tmp_path / "a.csv", "t", "value")
    np.testing.assert_array_equal(got_t, t)
    np.testing.assert_array_equal(got_v, t ** 2)
    # order of requested names controls output order
    v_first, t_second = read_columns(tmp_path / "a.csv", "value", "t")
    np.testing.assert_array_equal(v_first, t ** 2)
    np.testing.assert_array_equal(t_second, t)


def test_read_columns_missing_column_named(tmp_path):
    (tmp_path / "a.csv").write_text("t,value\n0.0,1.0\n")
    with pytest.raises(SchemaError, match="missing column 't_bin_center'"):
        read_columns(tmp_path / "a.csv", "t_bin_center", "density", "stderr")
    (tmp_path / "b.csv").write_text("t_bin_center,density\n0.0,1.0\n")
    with pytest.raises(SchemaError, match="missing column 'stderr'"):
        read_columns(tmp_path / "b.csv", "t_bin_center", "density", "stderr")


def test_read_columns_bad_cell_located(tmp_path):
    (tmp_path / "a.csv").write_text("t,value\n0.0,1.0\n0.5,oops\n")
    with pytest.raises(SchemaError, match="line 3.*'value'.*oops"):
        read_columns(tmp_path / "a.csv", "t", "value")


def test_read_columns_empty_and_headerless(tmp_path):
    (tmp_path / "a.csv").write_text("")
    with pytest.raises(SchemaError, match="empty"):
        read_columns(tmp_path / "a.csv", "t", "value")
    (tmp_path / "b.csv").write_text("t,value\n")
    with pytest.raises(SchemaError, match="no data rows"):
        read_columns(tmp_path / "b.csv", "t", "value")


def test_read_columns_ragged_row_rejected(tmp_path):
    (tmp_path / "a.csv").write_text("t,value\n0.0,1.0\n0.5\n")
    with pytest.raises(SchemaError, match="line 3"):
        read_columns(tmp_path / "a.csv", "t", "value")

import json

from mftx_plots.cli import main


def _last_json(capsys, stream="err"):
    captured = capsys.readouterr()
    text = captured.err if stream == "err" else captured.out
    return json.loads(text.strip().splitlines()[-1])


def test_successful_render(fig4_dir, tmp_path, capsys):
    out = tmp_path / "fig4.png"
    code = main(["--manifest", str(fig4_dir / "manifest.json"),
                 "--kind", "fig4", "--out", str(out), "--overlay"])
    assert code == 0
    assert out.is_file()
    assert _last_json(capsys, "out") == {"written": str(out)}


def test_missing_manifest_is_exit_1(tmp_path, capsys):
    code = main(["--manifest", str(tmp_path / "nope.json"),
                 "--kind", "fig2", "--out", str(tmp_path / "x.png")])
    assert code == 1
    payload = _last_json(capsys)
    assert payload["error"] == "manifest"


def test_kind_mismatch_is_exit_1(fig2_dir, tmp_path, capsys):
    code = main(["--manifest", str(fig2_dir / "manifest.json"),
                 "--kind", "fig3", "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert _last_json(capsys)["error"] == "render"
    assert not (tmp_path / "x.png").exists()


def test_schema_error_is_exit_1(fig3_dir, tmp_path, capsys):
    bad = next(p for p in fig3_dir.iterdir() if p.name.startswith("p_"))
    bad.write_text("radius,peak\n5.0,1.0\n")
    code = main(["--manifest", str(fig3_dir / "manifest.json"),
                 "--kind", "fig3", "--out", str(tmp_path / "x.png")])
    assert code == 1
    payload = _last_json(capsys)
    assert payload["error"] == "schema"
    assert "r_tx" in payload["message"]


def test_usage_error_is_exit_1(capsys):
    assert main(["--kind", "fig2"]) == 1
    assert main(["--manifest", "m.json", "--kind", "fig7",
                 "--out", "x.png"]) == 1
    capsys.readouterr()

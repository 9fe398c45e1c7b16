"""Figure renderers: one function per figure family.

Every renderer takes a validated manifest and draws only from the CSVs it
names.  Curve order, colors, and labels come from the manifest file
order, so identical inputs give identical images; PNG and SVG metadata
that would otherwise embed timestamps is suppressed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .manifest import Manifest, ManifestError, read_columns  # noqa: E402

KIND_BY_FLAG = {"fig2": "fig2_release", "fig3": "fig3_peak_time",
                "fig4": "fig4_e2e"}

_STYLE = {
    "figure.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "legend.framealpha": 0.9,
    "svg.hashsalt": "mftx-plots",
}

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


class RenderError(ValueError):
    """The manifest is valid but cannot support the requested figure."""


def _color_map(labels) -> dict:
    table = {}
    for label in labels:
        if label not in table:
            table[label] = _COLORS[len(table) % len(_COLORS)]
    return table


def _save(fig, out_path: Path) -> Path:
    out_path = Path(out_path)
    suffix = out_path.suffix.lower()
    if suffix == ".png":
        kwargs = {"metadata": {"Software": None}}
    elif suffix == ".svg":
        kwargs = {"metadata": {"Date": None}}
    elif suffix == ".pdf":
        kwargs = {"metadata": {"CreationDate": None}}
    else:
        raise RenderError(f"unsupported output format {suffix or '(none)'}; "
                          "use .png, .svg, or .pdf")
    fig.savefig(out_path, bbox_inches="tight", **kwargs)
    plt.close(fig)
    return out_path


def _overlay_markers(ax, curves, colors) -> None:
    for curve in curves:
        t, density, stderr = read_columns(curve.path, "t_bin_center",
                                          "density", "stderr")
        ax.errorbar(t, density, yerr=stderr, fmt="o", ms=2.5, lw=0.8,
                    capsize=1.5, color=colors[curve.label],
                    label=f"{curve.label} (sim)")


def _render_fig2(manifest: Manifest, out_path: Path, overlay: bool) -> Path:
    density = manifest.select("release_density", role="analytic")
    count = manifest.select("release_count", role="analytic")
    if not density or not count:
        raise RenderError("fig2 needs release_density and release_count "
                          "analytic curves")
    sims = manifest.select("release_density", role="simulation")
    if overlay and not sims:
        raise RenderError("overlay requested but the manifest has no "
                          "simulation curves")
    colors = _color_map([c.label for c in density + count + sims])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    for curve in density:
        t, value = read_columns(curve.path, "t", "value")
        ax1.plot(t, value, color=colors[curve.label], label=curve.label)
    if overlay:
        _overlay_markers(ax1, sims, colors)
    ax1.set_xlabel("time (s)")
    ax1.set_ylabel("release density (1/s)")
    ax1.legend()
    for curve in count:
        t, value = read_columns(curve.path, "t", "value")
        ax2.plot(t, value, color=colors[curve.label], label=curve.label)
    ax2.set_xlabel("time (s)")
    ax2.set_ylabel("molecules released")
    ax2.legend()
    fig.suptitle("Vesicle release: density and cumulative count")
    return _save(fig, out_path)


def _render_fig3(manifest: Manifest, out_path: Path) -> Path:
    curves = manifest.select("peak_release_time", role="analytic")
    if not curves:
        raise RenderError("fig3 needs peak_release_time curves")
    colors = _color_map([c.label for c in curves])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for curve in curves:
        r_tx, t_pr = read_columns(curve.path, "r_tx", "t_pr")
        ax.plot(r_tx, t_pr, marker="o", ms=3.5, color=colors[curve.label],
                label=curve.label)
    ax.set_xlabel("transmitter radius (um)")
    ax.set_ylabel("peak release time (s)")
    ax.legend()
    ax.set_title("Time of peak release vs transmitter radius")
    return _save(fig, out_path)


def _render_fig4(manifest: Manifest, out_path: Path, overlay: bool) -> Path:
    curves = manifest.select("e2e_hit", role="analytic")
    if not curves:
        raise RenderError("fig4 needs e2e_hit analytic curves")
    reference = manifest.select("point_hit", role="reference")
    sims = manifest.select("e2e_hit", role="simulation")
    if overlay and not sims:
        raise RenderError("overlay requested but the manifest has no "
                          "simulation curves")
    colors = _color_map([c.label for c in curves + sims])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for curve in curves:
        t, value = read_columns(curve.path, "t", "value")
        ax.plot(t, value, color=colors[curve.label], label=curve.label)
    for curve in reference:
        t, value = read_columns(curve.path, "t", "value")
        ax.plot(t, value, color="black", ls="--", lw=1.0,
                label="point transmitter")
    if overlay:
        _overlay_markers(ax, sims, colors)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("hitting density (1/s)")
    ax.legend()
    ax.set_title("End-to-end hitting density at the receiver")
    return _save(fig, out_path)


def render(manifest: Manifest, kind_flag: str, out_path,
           overlay: bool = False) -> Path:
    """Render one figure; returns the written path."""
    if kind_flag not in KIND_BY_FLAG:
        raise RenderError(f"unknown figure kind {kind_flag!r}; expected "
                          f"one of {', '.join(KIND_BY_FLAG)}")
    if manifest.kind != KIND_BY_FLAG[kind_flag]:
        raise RenderError(f"manifest kind {manifest.kind!r} does not match "
                          f"requested figure {kind_flag!r}")
    if not manifest.complete:
        raise ManifestError(
            "manifest is marked incomplete"
            + (f" (producer error: {manifest.error})" if manifest.error
               else ""))
    with plt.rc_context(_STYLE):
        if kind_flag == "fig2":
            return _render_fig2(manifest, out_path, overlay)
        if kind_flag == "fig3":
            return _render_fig3(manifest, out_path)
        return _render_fig4(manifest, out_path, overlay)

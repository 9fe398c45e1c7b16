"""Fixtures fabricating recipe output directories from the schemas alone.

The producer package is deliberately not imported; these fixtures write
the documented file formats by hand so the contract stays visible.
"""

import json

import numpy as np
import pytest


def write_analytic(path, t, value):
    lines = ["t,value"] + [f"{float(ti)!r},{float(vi)!r}"
             for ti, vi in zip(t, value)]
    path.write_text("\n".join(lines) + "\n")


def write_sim(path, t, density, stderr, counts):
    lines = ["t_bin_center,density,stderr,n_events"]
    lines += [f"{float(ti)!r},{float(di)!r},{float(si)!r},{int(ni)}"
              for ti, di, si, ni in zip(t, density, stderr, counts)]
    path.write_text("\n".join(lines) + "\n")


def write_peaks(path, r_tx, t_pr):
    lines = ["r_tx,t_pr"] + [f"{float(ri)!r},{float(pi)!r}"
             for ri, pi in zip(r_tx, t_pr)]
    path.write_text("\n".join(lines) + "\n")


def write_manifest(directory, kind, files, complete=True, error=None):
    payload = {"kind": kind, "complete": complete, "error": error,
               "config_hash": "deadbeef", "files": files}
    path = directory / "manifest.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def entry(name, quantity, sweep, role):
    return {"file": name, "quantity": quantity, "sweep": sweep, "role": role}


def _hump(t, scale, loc):
    t = np.asarray(t)
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = scale * (t[pos] / loc) * np.exp(1.0 - t[pos] / loc)
    return out


@pytest.fixture
def fig2_dir(tmp_path):
    t = np.linspace(0.0, 10.0, 41)
    centers = np.arange(0.25, 10.0, 0.5)
    files = []
    for label, sweep in (("base", None),
                         ("k_f_2", {"param": "k_f", "value": 2.0})):
        loc = 1.0 if sweep is None else 2.5
        write_analytic(tmp_path / f"d_{label}.csv", t, _hump(t, 0.3, loc))
        files.append(entry(f"d_{label}.csv", "release_density", sweep,
                           "analytic"))
        write_analytic(tmp_path / f"c_{label}.csv", t,
                       1e4 * (1 - np.exp(-t / loc)))
        files.append(entry(f"c_{label}.csv", "release_count", sweep,
                           "analytic"))
        dens = _hump(centers, 0.3, loc)
        write_sim(tmp_path / f"s_{label}.csv", centers, dens,
                  0.05 * dens + 1e-4, np.maximum(1, 1e3 * dens).astype(int))
        files.append(entry(f"s_{label}.csv", "release_density", sweep,
                           "simulation"))
    write_manifest(tmp_path, "fig2_release", files)
    return tmp_path


@pytest.fixture
def fig3_dir(tmp_path):
    r = np.linspace(5.0, 15.0, 11)
    files = []
    for label, sweep, slope in (("base", None, 0.11),
                                ("d_v_3", {"param": "d_v", "value": 3.0},
                                 0.33)):
        write_peaks(tmp_path / f"p_{label}.csv", r, slope * r ** 2 / 9.0)
        files.append(entry(f"p_{label}.csv", "peak_release_time", sweep,
                           "analytic"))
    write_manifest(tmp_path, "fig3_peak_time", files)
    return tmp_path


@pytest.fixture
def fig4_dir(tmp_path):
    t = np.linspace(0.0, 25.0, 51)
    centers = np.arange(0.125, 25.0, 0.25)
    files = []
    for label, sweep in (("base", None),
                         ("k_f_2", {"param": "k_f", "value": 2.0})):
        loc = 2.5 if sweep is None else 5.0
        write_analytic(tmp_path / f"e_{label}.csv", t, _hump(t, 0.06, loc))
        files.append(entry(f"e_{label}.csv", "e2e_hit", sweep, "analytic"))
        dens = 0.91 * _hump(centers, 0.06, loc)
        write_sim(tmp_path / f"es_{label}.csv", centers, dens,
                  0.04 * dens + 1e-5, np.maximum(0, 4e3 * dens).astype(int))
        files.append(entry(f"es_{label}.csv", "e2e_hit", sweep, "simulation"))
    write_analytic(tmp_path / "ref.csv", t[1:], _hump(t[1:], 0.23, 0.35))
    files.append(entry("ref.csv", "point_hit", None, "reference"))
    write_manifest(tmp_path, "fig4_e2e", files)
    return tmp_path

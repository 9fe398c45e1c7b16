"""Load and validate recipe manifests and their CSV files.

The contract (mirrored from the producer's documentation):

* ``manifest.json``: object with keys kind, complete, error, config_hash,
  files; each file entry has file, quantity, sweep, role.  ``sweep`` is
  null for the base configuration or ``{"param": ..., "value": ...}``.
* analytic curves: ``t,value``
* simulation estimates: ``t_bin_center,density,stderr,n_events``
* peak-time curves: ``r_tx,t_pr``

Validation is eager: a manifest that names a missing file, or a CSV with
a missing or non-numeric column, fails with the offending name before
any rendering starts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

KINDS = ("fig2_release", "fig3_peak_time", "fig4_e2e")
QUANTITIES = ("release_density", "release_count", "e2e_hit", "point_hit",
              "peak_release_time")
ROLES = ("analytic", "simulation", "reference")


class ManifestError(ValueError):
    """The manifest document itself is unusable."""


class SchemaError(ValueError):
    """A CSV file does not match its documented schema."""


@dataclass(frozen=True)
class CurveFile:
    path: Path
    quantity: str
    sweep: Optional[tuple[str, float]]
    role: str

    @property
    def label(self) -> str:
        if self.sweep is None:
            return "base"
        param, value = self.sweep
        return f"{param}={value:g}"


@dataclass(frozen=True)
class Manifest:
    kind: str
    complete: bool
    error: Optional[str]
    config_hash: str
    files: tuple[CurveFile, ...]

    def select(self, quantity: str | None = None,
               role: str | None = None) -> tuple[CurveFile, ...]:
        out = self.files
        if quantity is not None:
            out = tuple(f for f in out if f.quantity == quantity)
        if role is not None:
            out = tuple(f for f in out if f.role == role)
        return out


def _file_entry(entry, base_dir: Path, index: int) -> CurveFile:
    if not isinstance(entry, dict):
        raise ManifestError(f"files[{index}] must be an object")
    missing = sorted({"file", "quantity", "sweep", "role"} - set(entry))
    if missing:
        raise ManifestError(
            f"files[{index}] is missing keys: {', '.join(missing)}")
    name = entry["file"]
    if not isinstance(name, str) or not name:
        raise ManifestError(f"files[{index}]: file must be a non-empty string")
    quantity = entry["quantity"]
    if quantity not in QUANTITIES:
        raise ManifestError(
            f"files[{index}] ({name}): unknown quantity {quantity!r}")
    role = entry["role"]
    if role not in ROLES:
        raise ManifestError(f"files[{index}] ({name}): unknown role {role!r}")
    sweep = entry["sweep"]
    if sweep is not None:
        if (not isinstance(sweep, dict)
                or set(sweep) != {"param", "value"}
                or not isinstance(sweep["param"], str)):
            raise ManifestError(
                f"files[{index}] ({name}): sweep must be null or "
                "{param, value}")
        try:
            sweep = (sweep["param"], float(sweep["value"]))
        except (TypeError, ValueError):
            raise ManifestError(
                f"files[{index}] ({name}): sweep value must be a number"
            ) from None
    path = base_dir / name
    if not path.is_file():
        raise ManifestError(f"manifest names a missing file: {name}")
    return CurveFile(path=path, quantity=quantity, sweep=sweep, role=role)


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ManifestError("manifest must be a JSON object")
    missing = sorted({"kind", "complete", "error", "config_hash", "files"}
                     - set(payload))
    if missing:
        raise ManifestError(f"manifest is missing keys: {', '.join(missing)}")
    kind = payload["kind"]
    if kind not in KINDS:
        raise ManifestError(f"unknown manifest kind {kind!r}; expected one "
                            f"of {', '.join(KINDS)}")
    if not isinstance(payload["files"], list):
        raise ManifestError("files must be a list")
    if not payload["files"]:
        raise ManifestError("manifest lists no files")
    files = tuple(_file_entry(e, path.parent, i)
                  for i, e in enumerate(payload["files"]))
    return Manifest(kind=kind, complete=bool(payload["complete"]),
                    error=payload["error"],
                    config_hash=str(payload["config_hash"]), files=files)


def read_columns(path, *names: str) -> tuple[np.ndarray, ...]:
    """Read named columns from a CSV, failing with the missing name."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [n for n in names if n not in header]
        if missing:
            raise SchemaError(
                f"{path.name}: missing column '{missing[0]}' "
                f"(has {','.join(header)})")
        idx = [header.index(n) for n in names]
        columns: list[list[float]] = [[] for _ in names]
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path.name}: line {row_no} has "
                                  f"{len(row)} fields, header has "
                                  f"{len(header)}")
            for col, i in zip(columns, idx):
                try:
                    col.append(float(row[i]))
                except ValueError:
                    raise SchemaError(
                        f"{path.name}: line {row_no}, column "
                        f"'{header[i]}': not a number: {row[i]!r}"
                    ) from None
    if not columns[0]:
        raise SchemaError(f"{path.name}: no data rows")
    return tuple(np.asarray(c, dtype=float) for c in columns)

"""Analytic-versus-simulation agreement scored as per-bin z-values.

The analytic curve must be evaluated exactly at the simulation bin centers;
no interpolation happens here, so a grid mismatch is an error rather than a
silent resample.  Each bin contributes z = (density - analytic) / stderr.
Bins whose binomial stderr is zero (no events, or every source produced
one) fall back to the standard error the analytic curve itself implies,
sqrt(analytic / (n_source * bin_width)); a bin where both sides are exactly
zero scores z = 0.  A comparison passes when at least 95 percent of bins
lie within three standard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridAlignmentError
from .sim import CirEstimate

__all__ = ["ComparisonReport", "compare_curves"]

Z_LIMIT = 3.0
PASS_FRACTION = 0.95


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of one curve comparison.

    ``passed`` is defined as ``fraction_within >= 0.95``; the other fields
    let a reader judge how close the call was.  Degenerate bins can give
    infinite z; JSON output then uses the Python literal ``Infinity``.
    """

    z: np.ndarray
    fraction_within: float
    sup_deviation: float
    rmse: float
    passed: bool

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "z", z)
        if self.passed != (self.fraction_within >= PASS_FRACTION):
            raise ValueError("pass flag contradicts the bin fraction")

    def to_json(self) -> str:
        payload = {
            "fraction_within": self.fraction_within,
            "sup_deviation": self.sup_deviation,
            "rmse": self.rmse,
            "passed": self.passed,
            "z": [float(v) for v in self.z],
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        payload = json.loads(text)
        return cls(z=np.asarray(payload["z"], dtype=float),
                   fraction_within=float(payload["fraction_within"]),
                   sup_deviation=float(payload["sup_deviation"]),
                   rmse=float(payload["rmse"]),
                   passed=bool(payload["passed"]))


def _check_alignment(analytic_t: np.ndarray, centers: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(centers), initial=0.0)))
    if analytic_t.shape != centers.shape or np.any(
            np.abs(analytic_t - centers) > 1e-9 * scale):
        def describe(name, grid):
            if grid.size == 0:
                return f"{name}: empty"
            return (f"{name}: {grid.size} points on "
                    f"[{grid[0]:.6g}, {grid[-1]:.6g}]")
        raise GridAlignmentError(
            "analytic grid must equal the simulation bin centers; "
            + describe("analytic", analytic_t) + "; "
            + describe("simulation centers", centers))


def compare_curves(analytic_t: np.ndarray, analytic_value: np.ndarray,
                   estimate: CirEstimate) -> ComparisonReport:
    """Score an analytic curve against a histogram estimate."""
    analytic_t = np.asarray(analytic_t, dtype=float)
    analytic_value = np.asarray(analytic_value, dtype=float)
    centers = estimate.bin_centers
    _check_alignment(analytic_t, centers)

    density = estimate.density
    stderr = estimate.stderr
    diff = density - analytic_value

    scale = stderr.copy()
    if estimate.n_source > 0:
        floor = np.sqrt(np.maximum(analytic_value, 0.0)
                        / (estimate.n_source * estimate.bin_width))
        scale = np.where(scale > 0, scale, floor)
    z = np.empty_like(diff)
    degenerate = scale == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z[~degenerate] = diff[~degenerate] / scale[~degenerate]
    z[degenerate] = np.where(diff[degenerate] == 0, 0.0,
                             np.copysign(math.inf, diff[degenerate]))

    fraction = float(np.mean(np.abs(z) <= Z_LIMIT)) if z.size else 1.0
    return ComparisonReport(
        z=z,
        fraction_within=fraction,
        sup_deviation=float(np.max(np.abs(diff), initial=0.0)),
        rmse=float(np.sqrt(np.mean(diff * diff))) if diff.size else 0.0,
        passed=fraction >= PASS_FRACTION,
    )

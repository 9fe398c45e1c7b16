"""Exception types shared across the package.

The CLI maps these onto its exit codes: configuration problems exit 1,
numerical failures (series, quadrature, eigensolver) exit 2, and a failed
simulation-versus-analytic comparison exits 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid system configuration; carries one message per violated rule."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class EigenvalueError(RuntimeError):
    """Eigenvalue solve failed or the spectrum is degenerate (k_f = 0)."""


class SeriesError(RuntimeError):
    """Series evaluation not converged at the requested time."""


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance.

    Carries the best available estimate and its error bound so callers can
    decide whether to proceed anyway.
    """

    def __init__(self, message: str, estimate: float | None = None,
                 error_bound: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class GeometryError(RuntimeError):
    """Segment-sphere intersection failed despite an outside endpoint.

    Impossible in exact arithmetic; in practice it signals NaN or infinity
    propagation into particle positions.
    """


class GridAlignmentError(ValueError):
    """Two time grids that must match do not."""


class RecipeError(ValueError):
    """Malformed experiment recipe."""

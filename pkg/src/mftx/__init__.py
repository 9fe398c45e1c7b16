"""Membrane-fusion transmitter channel toolkit.

Analytic release and hitting densities for a spherical transmitter that
releases molecules through vesicle-membrane fusion, together with a
particle-based Monte Carlo validator and a small experiment harness.
"""

from .config import (DEFAULTS, DerivedConstants, SystemConfig, TimeSeries,
                     derived_constants, validate)
from .eigen import EigenSpectrum, robin_scalar, solve_eigenvalues
from .cir import (QuadraturePolicy, SeriesPolicy, e2e_hitting,
                  e2e_hitting_convolved, peak_release_time, point_hitting,
                  release_density, release_fraction, singular_convolution,
                  uniform_hitting)
from .errors import (ConfigError, EigenvalueError, GeometryError,
                     GridAlignmentError, QuadratureError, RecipeError,
                     SeriesError)
from .sim import (CampaignResult, CirEstimate, FusionEvent, MoleculeState,
                  RunSpec, VesicleState, attempt_fusion, detect_membrane_hit,
                  propagate_molecule, run_campaign, step_vesicle)
from .compare import ComparisonReport, compare_curves
from .recipes import ExperimentRecipe, run_recipe

__all__ = [
    "DEFAULTS", "SystemConfig", "DerivedConstants", "TimeSeries",
    "derived_constants", "validate",
    "EigenSpectrum", "robin_scalar", "solve_eigenvalues",
    "SeriesPolicy", "QuadraturePolicy",
    "release_density", "release_fraction", "point_hitting",
    "uniform_hitting", "singular_convolution", "e2e_hitting",
    "e2e_hitting_convolved", "peak_release_time",
    "VesicleState", "FusionEvent", "MoleculeState", "CirEstimate",
    "RunSpec", "CampaignResult", "step_vesicle", "detect_membrane_hit",
    "attempt_fusion", "propagate_molecule", "run_campaign",
    "ComparisonReport", "compare_curves",
    "ExperimentRecipe", "run_recipe",
    "ConfigError", "EigenvalueError", "SeriesError", "QuadratureError",
    "GeometryError", "GridAlignmentError", "RecipeError",
]

__version__ = "0.1.0"

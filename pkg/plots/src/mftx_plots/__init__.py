"""Render figures from mftx recipe output.

This package reads only the recipe manifest (``manifest.json``) and the
CSV schemas it names; it never imports the model package, so the two can
be installed and tested independently.
"""

from .manifest import (CurveFile, Manifest, ManifestError, SchemaError,
                       load_manifest, read_columns)
from .render import KIND_BY_FLAG, RenderError, render

__all__ = ["CurveFile", "Manifest", "ManifestError", "SchemaError",
           "load_manifest", "read_columns",
           "KIND_BY_FLAG", "RenderError", "render"]

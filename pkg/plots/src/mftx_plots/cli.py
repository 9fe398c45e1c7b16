"""mftx-plot: render a figure from a recipe manifest.

Exit codes: 0 success, 1 any input or rendering failure.  Errors are
printed as one JSON object on stderr, matching the producer CLI's
convention.
"""

from __future__ import annotations

import argparse
import json
import sys

from .manifest import ManifestError, SchemaError, load_manifest
from .render import KIND_BY_FLAG, RenderError, render


def _emit_error(name: str, message: str) -> None:
    print(json.dumps({"error": name, "message": message}), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mftx-plot",
        description="Render a figure from an mftx recipe manifest.")
    parser.add_argument("--manifest", required=True,
                        help="path to manifest.json")
    parser.add_argument("--kind", required=True, choices=sorted(KIND_BY_FLAG),
                        help="figure family to render")
    parser.add_argument("--out", required=True,
                        help="output image path (.png, .svg, or .pdf)")
    parser.add_argument("--overlay", action="store_true",
                        help="draw simulation markers with error bars over "
                             "the analytic curves")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        manifest = load_manifest(args.manifest)
        out = render(manifest, args.kind, args.out, overlay=args.overlay)
    except ManifestError as exc:
        _emit_error("manifest", str(exc))
        return 1
    except SchemaError as exc:
        _emit_error("schema", str(exc))
        return 1
    except RenderError as exc:
        _emit_error("render", str(exc))
        return 1
    except OSError as exc:
        _emit_error("io", str(exc))
        return 1
    print(json.dumps({"written": str(out)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

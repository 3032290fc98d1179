"""Command line wrapper: render everything a manifest asks for."""

import argparse
import sys

from .manifest import render_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellmtf-plots",
        description="Render figures from cellmtf CSV outputs as described "
                    "by a JSON manifest.",
    )
    parser.add_argument("manifest", help="JSON manifest of figures")
    parser.add_argument("--out-dir", help="override the manifest's output directory")
    parser.add_argument("--workers", type=int, help="concurrent renderers")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        paths = render_manifest(
            args.manifest, out_dir=args.out_dir, workers=args.workers
        )
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in sorted(paths):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

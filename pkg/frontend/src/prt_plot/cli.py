"""prt-plot: render figures from a prt report directory."""

import argparse
import os
import sys

from .reader import ArtifactError
from .render import KINDS, PlotSpec, plan_report, render, render_manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prt-plot",
        description="Render eigenvalue ladders, loadings, profiles, relationship "
                    "plots, sufficient-summary scatters, and heat maps from a prt "
                    "report directory.")
    parser.add_argument("kind", choices=("all",) + KINDS,
                        help="plot kind, or 'all' for every recognized artifact")
    parser.add_argument("--in", dest="report_dir", required=True,
                        help="report directory (with manifest.txt)")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the rendered images")
    parser.add_argument("--log-x", action="store_true", default=None,
                        help="force log x axis (relationship plots)")
    parser.add_argument("--log-y", action="store_true", default=None,
                        help="force log y axis (relationship plots)")
    args = parser.parse_args(argv)

    try:
        if args.kind == "all":
            written = render_manifest(args.report_dir, args.out_dir)
        else:
            specs = [s for s in plan_report(args.report_dir, args.out_dir)
                     if s.kind == args.kind]
            if not specs:
                print(f"error: ArtifactError: no {args.kind} artifact in "
                      f"{args.report_dir}", file=sys.stderr)
                return 1
            written = []
            for spec in specs:
                if args.log_x is not None or args.log_y is not None:
                    spec = PlotSpec(spec.kind, spec.table_path, spec.out_path,
                                    metadata_path=spec.metadata_path,
                                    log_x=args.log_x, log_y=args.log_y)
                written.append(render(spec))
    except ArtifactError as exc:
        print(f"error: ArtifactError: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

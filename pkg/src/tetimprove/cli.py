"""Command-line driver: ``improve``, ``stats`` and ``gen``."""

import argparse
import sys

from .exceptions import MeshError
from .io import FORMATS, emit_report, generate_test_mesh, quality_report, read_mesh, write_mesh
from .scheduler import DEFAULT_THRESHOLD, improve

__all__ = ["build_parser", "main", "main_exit"]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tetimprove", description="Improve the quality of tetrahedral meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("improve", help="improve every tetrahedron below a quality threshold")
    p.add_argument("--input", required=True, help="input mesh file")
    p.add_argument("--format", choices=FORMATS, help="mesh format (default: from extension)")
    p.add_argument("--output", required=True, help="output mesh file, same format as input")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="gamma below which a tetrahedron is bad (default %(default)s)")
    p.add_argument("--threads", type=int, default=1, help="maximum worker count")
    p.add_argument("--reproducible", action="store_true",
                   help="canonical tetrahedron order in the output")
    p.add_argument("--report", help="write a quality report here")

    p = sub.add_parser("stats", help="quality histograms and summary of a mesh")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--report", help="report path (default: standard output)")

    p = sub.add_parser("gen", help="write a perturbed structured cube mesh")
    p.add_argument("--n", type=int, required=True, help="cells per axis")
    p.add_argument("--perturb", type=float, default=0.0, help="displacement as a fraction of cell size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=FORMATS)
    return parser


def _check_args(parser, args):
    if args.command == "improve":
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        if not 0.0 < args.threshold <= 1.0:
            parser.error("--threshold must lie in (0, 1]")
    if args.command == "gen":
        if args.n < 1:
            parser.error("--n must be at least 1")
        if not 0.0 <= args.perturb < 1.0:
            parser.error("--perturb must lie in [0, 1)")


def _run(args):
    if args.command == "gen":
        mesh = generate_test_mesh(args.n, args.perturb, args.seed)
        write_mesh(mesh, args.output, args.format)
        print(f"wrote {mesh.n_live} tetrahedra to {args.output}")
        return 0
    mesh = read_mesh(args.input, args.format)
    if args.command == "stats":
        report = quality_report(mesh, args.threshold)
        emit_report(report, args.report or sys.stdout)
        return 0
    mesh, result = improve(mesh, args.threshold, max_workers=args.threads,
                           reproducible=args.reproducible)
    write_mesh(mesh, args.output, args.format or None, reproducible=args.reproducible)
    if args.report:
        report = quality_report(mesh, args.threshold, bad_before=result.bad_before,
                                sweeps=result.sweeps, modifications=result.modifications)
        emit_report(report, args.report)
    print(f"bad tetrahedra: {result.bad_before} -> {result.bad_after}; "
          f"{result.modifications} modifications; min gamma {mesh.min_quality():.6g}")
    return 0


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    # argparse exits on usage errors after printing the synopsis
    try:
        args = parser.parse_args(argv)
        _check_args(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except (MeshError, OSError, ValueError) as exc:
        print(f"tetimprove: error: {exc}", file=sys.stderr)
        return 1


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

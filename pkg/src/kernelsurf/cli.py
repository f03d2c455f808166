"""Command-line entry point: ``reconstruct``, ``metrics`` and ``selftest``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nystrom_arg(text):
    """``N`` or ``count:N`` selects N centers, ``radius:R`` a minimum spacing, ``all`` every point."""
    from .solver import Count, Radius
    t = text.strip().lower()
    try:
        if t in ("all", "none"):
            return None
        if t.startswith("radius:"):
            r = float(t.split(":", 1)[1])
            if not r > 0:
                raise ValueError
            return Radius(r)
        m = int(t.split(":", 1)[1]) if t.startswith("count:") else int(t)
        if m < 1:
            raise ValueError
        return Count(m)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid --nystrom value {text!r} (use N, count:N, radius:R or all)") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kernelsurf", description="Surface reconstruction with infinite-width ReLU kernels.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("reconstruct", help="fit an oriented cloud and write its zero level set as OBJ")
    r.add_argument("--input", required=True, help="XYZ or PLY file with points and normals")
    r.add_argument("--output", required=True, help="OBJ file to write")
    r.add_argument("--kernel", choices=("gaussian", "uniform", "poisson-radial"), default="gaussian")
    r.add_argument("--lambda", dest="lam", type=float, default=0.0, help="ridge regularization (>= 0)")
    r.add_argument("--nystrom", type=_nystrom_arg, default=None, help="N, count:N, radius:R or all")
    r.add_argument("--grid-res", type=int, default=128, help="lattice points per axis, 16..512")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--support-k", type=float, default=1.0, help="bias bound k of the uniform kernel")
    r.add_argument("--no-normalize", action="store_true", help="fit in the input coordinates as given")
    r.add_argument("--solver", choices=("auto", "direct", "cg"), default="auto")

    m = sub.add_parser("metrics", help="Chamfer and Hausdorff distances between two OBJ meshes")
    m.add_argument("mesh_a")
    m.add_argument("mesh_b")
    m.add_argument("--samples", type=int, default=100000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--no-normalize", action="store_true",
                   help="measure in file coordinates instead of mesh_a's unit cube")

    s = sub.add_parser("selftest", help="run the kernel invariant checks")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def _thread_limit():
    value = os.environ.get("NS_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"NS_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"NS_THREADS must be a positive integer, got {value!r}")
    return n


def cmd_reconstruct(args) -> int:
    from .io import load_cloud, save_mesh
    from .pipeline import make_kernel, reconstruct
    from .solver import SolverConfig

    if not 16 <= args.grid_res <= 512:
        raise UsageError("--grid-res must be between 16 and 512")
    if not args.lam >= 0:
        raise UsageError("--lambda must be >= 0")
    if not args.support_k > 0:
        raise UsageError("--support-k must be > 0")
    cloud = load_cloud(args.input)
    config = SolverConfig(lam=args.lam, method=args.solver, nystrom=args.nystrom, seed=args.seed)
    rec = reconstruct(cloud, make_kernel(args.kernel, args.support_k), config,
                      grid_resolution=args.grid_res, normalize_input=not args.no_normalize)
    save_mesh(rec.mesh, args.output)
    rep = rec.report
    rows = [
        ("samples", f"{rep['samples']}"),
        ("centers", f"{rep['centers']}"),
        ("lambda", f"{rep['lambda']:.6g}"),
        ("solver", rep["method"]),
        ("value_residual", f"{rep['value_residual']:.6e}"),
        ("normal_residual", f"{rep['normal_residual']:.6e}"),
        ("rkhs_norm", f"{rep['rkhs_norm']:.6e}"),
        ("vertices", f"{rep['vertices']}"),
        ("triangles", f"{rep['triangles']}"),
        ("wall_time_s", f"{rep['seconds']:.3f}"),
    ]
    for key, val in rows:
        print(f"{key:<16}{val}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    from .core import make_rng
    from .io import load_mesh
    from .metrics import SampledSurface, chamfer, hausdorff, sample_mesh, unit_cube_transform

    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    for path in (args.mesh_a, args.mesh_b):
        if not os.path.exists(path):
            raise UsageError(f"no such file: {path}")
    a, b = load_mesh(args.mesh_a), load_mesh(args.mesh_b)
    if a.is_empty or b.is_empty:
        raise UsageError("both meshes must contain triangles")
    # same stream for both meshes: identical inputs give identical samples
    pa = sample_mesh(a, args.samples, make_rng(args.seed)).points
    pb = sample_mesh(b, args.samples, make_rng(args.seed)).points
    if not args.no_normalize:
        lo, ext = unit_cube_transform(a.vertices)
        pa, pb = (pa - lo) / ext, (pb - lo) / ext
    A, B = SampledSurface(pa, "mesh-sampled"), SampledSurface(pb, "mesh-sampled")
    print(f"{'metric':<10}{'a->b':>16}{'b->a':>16}{'two-sided':>16}")
    for name, fn in (("chamfer", chamfer), ("hausdorff", hausdorff)):
        ab, ba, both = fn(A, B, one_sided=True), fn(B, A, one_sided=True), fn(A, B)
        print(f"{name:<10}{ab:>16.8e}{ba:>16.8e}{both:>16.8e}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import format_results, run_checks

    results = run_checks(seed=args.seed, inject_fault=args.inject_fault)
    print(format_results(results))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


COMMANDS = {"reconstruct": cmd_reconstruct, "metrics": cmd_metrics, "selftest": cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    from .io import CloudFormatError
    from .solver import SolverError

    try:
        limit = _thread_limit()
        if limit is None:
            return COMMANDS[args.command](args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return COMMANDS[args.command](args)
    except (UsageError, FileNotFoundError, IsADirectoryError, PermissionError, CloudFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # invalid geometry for the chosen kernel (e.g. outside the uniform kernel's support)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Exit codes: 0 success, 1 a bound failed to dominate, 2 configuration or
input error, 3 numerical failure, 4 construction failure.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _cap_threads() -> None:
    """Apply WENTZEL_THREADS to the BLAS pools before numpy is loaded."""
    cap = os.environ.get("WENTZEL_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


def _add_mesh_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--mesh", help="mesh file")
    g.add_argument("--shape", help="shape spec, e.g. disk, square:side=2, ellipse:a=1.25,b=0.8, polygon:seed=3")
    p.add_argument("--res", type=int, default=240, help="boundary resolution for --shape (default 240)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wentzel", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-gen", help="generate a mesh file")
    p.add_argument("--shape", required=True)
    p.add_argument("--res", type=int, default=240)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="lowest Wentzel eigenvalues")
    _add_mesh_source(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", help="build a capacitor family on a mesh boundary or a space file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mesh")
    g.add_argument("--shape")
    g.add_argument("--space", help="point-cloud space file")
    p.add_argument("--res", type=int, default=240)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--r0", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("certify", help="certified upper bounds from plateau test functions")
    _add_mesh_source(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--k", type=int, required=True, help="certify k = 1..K")
    p.add_argument("--n-cover", default="2", help="covering constant: integer, auto or paper (default 2)")
    p.add_argument("--r0", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds", help="closed-form bounds from a geometry summary")
    p.add_argument("--geom", required=True, help="geometry JSON")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="solver vs certificate vs closed-form bounds")
    _add_mesh_source(p, required=False)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--k", default="1..10", help="K or K1..K2")
    p.add_argument("--n-cover", default="auto", help="integer, auto (measured) or paper")
    p.add_argument("--r0", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-certify", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--geom-out", help="also write the geometry summary JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="summarize a sweep CSV")
    p.add_argument("--table", required=True)
    p.add_argument("--geom", help="geometry JSON for the header")
    p.add_argument("--out", help="write the summary here instead of stdout")
    return ap


def _load_mesh(args):
    from .spectral import read_mesh, shape_mesh

    return read_mesh(args.mesh) if args.mesh else shape_mesh(args.shape, args.res)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else f"{v:.17g}" if isinstance(v, float) else str(v) for v in r) + "\n")


def _cmd_mesh_gen(args):
    from .spectral import shape_mesh, write_mesh

    write_mesh(shape_mesh(args.shape, args.res), args.out)


def _cmd_solve(args):
    from .spectral import solve_wentzel

    spec = solve_wentzel(_load_mesh(args), args.beta, args.count)
    _write_csv(args.out, ["k", "lambda"], [(k, float(v)) for k, v in enumerate(spec.eigenvalues)])


def _cmd_decompose(args):
    from .decomposition import build_capacitors, write_family
    from .mms import read_space, space_from_mesh

    space = read_space(args.space) if args.space else space_from_mesh(_load_mesh(args))
    fam = build_capacitors(space, args.K, args.r0, args.N)
    write_family(fam, args.out, space)


def _cmd_certify(args):
    from .rayleigh import certified_envelope, certified_upper_bounds
    from .mms import space_from_mesh
    from .spectral import assemble, solve_wentzel
    from .sweep import resolve_n_cover

    if args.k < 1:
        from .errors import ConfigError

        raise ConfigError("k must be at least 1")
    mesh = _load_mesh(args)
    asm = assemble(mesh)
    lam = solve_wentzel(asm, args.beta, args.k + 1).eigenvalues
    N = resolve_n_cover(args.n_cover, space_from_mesh(mesh))
    certs = {k: certified_upper_bounds(asm, args.beta, k, N, args.r0) for k in range(1, args.k + 1)}
    env = certified_envelope(certs)
    rows = [(k, env[k], float(lam[k]), env[k] / lam[k] if lam[k] > 0 else float("nan"), certs[k].family_kind)
            for k in sorted(env)]
    _write_csv(args.out, ["k", "certified_bound", "solver_lambda", "ratio", "family_kind"], rows)


def _cmd_bounds(args):
    from pathlib import Path

    from .bounds import bound_report
    from .errors import ConfigError
    from .mms import GeometrySummary

    if args.k_max < 1:
        raise ConfigError("k-max must be at least 1")
    try:
        geom = GeometrySummary.from_json(Path(args.geom).read_text())
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad geometry file {args.geom}: {exc}") from exc
    ks = list(range(1, args.k_max + 1))
    rep = bound_report(geom, args.beta, ks)
    rows = [(k, float(rep.weyl[i]), float(rep.thm_general[i]), float(rep.thm_ricci[i]), float(rep.cor[i]),
             float(rep.euclid[i])) for i, k in enumerate(ks)]
    _write_csv(args.out, ["k", "weyl", "thm_general", "thm_ricci", "cor", "euclid"], rows)


def _cmd_sweep(args):
    from pathlib import Path

    from .sweep import RunConfig, parse_k_range, run_sweep, write_result

    lo, hi = parse_k_range(args.k)
    cfg = RunConfig(beta=args.beta, k_min=lo, k_max=hi, shape=args.shape or ("disk" if not args.mesh else None),
                    resolution=args.res, mesh_path=args.mesh, n_cover=args.n_cover, r0=args.r0,
                    kappa=args.kappa, seed=args.seed, out=args.out, fmt=args.format,
                    certify=not args.no_certify)
    result = run_sweep(cfg)
    write_result(result, args.out, cfg.fmt)
    if args.geom_out:
        Path(args.geom_out).write_text(result.geometry.to_json() + "\n")
    for key, msg in sorted(result.notes.items()):
        print(f"note: {key}: {msg}", file=sys.stderr)
    return result.exit_code


def _cmd_report(args):
    from pathlib import Path

    from .mms import GeometrySummary
    from .sweep import report, rows_from_csv

    rows = rows_from_csv(Path(args.table).read_text())
    geom = GeometrySummary.from_json(Path(args.geom).read_text()) if args.geom else None
    text = report(rows, geom.n if geom else 2, geom)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "mesh-gen": _cmd_mesh_gen,
    "solve": _cmd_solve,
    "decompose": _cmd_decompose,
    "certify": _cmd_certify,
    "bounds": _cmd_bounds,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    from .errors import WentzelError

    try:
        code = COMMANDS[args.command](args)
    except WentzelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())

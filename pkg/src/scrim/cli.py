"""Command-line front end: ``scrim {matgen,select,solve,bench,rate}``.

Exit codes: 0 on success (a run that hits ``max_iters`` or stalls still
succeeds; its status is printed), 2 for usage errors, 3 for data errors.
"""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, io
from .constraint import InconsistentSubsystemError, build_constraint
from .linalg import pinv_solve_least_norm
from .matgen import ClusterSpec, SpecError, generate
from .sampling import make_rng
from .selection import METHODS, select_rows
from .solvers import run
from .theory import compare_rates, rate_report

EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(ValueError):
    pass


def _ell(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'inf', got {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError("ell must be >= 1")
    return val


def _emit(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


def _read_ip(arg, m):
    if arg is None or arg == "none":
        return np.zeros(0, dtype=np.int64)
    return io.read_indices(arg)


def _read_rhs(arg, m):
    if arg is None:
        return np.zeros(m)
    b = io.read_vector(arg)
    if b.shape[0] != m:
        raise io.DataError(f"right-hand side has length {b.shape[0]}, matrix has {m} rows")
    return b


def cmd_matgen(args):
    spec = ClusterSpec(m=args.m, n=args.n, r=args.r, n_l=args.nl, n_s=args.ns, kappa_m=args.kappa_m,
                       r_s=tuple(args.rs), r_m=tuple(args.rm), r_l=tuple(args.rl), seed=args.seed)
    a, sigma = generate(spec)
    out = Path(args.out)
    io.write_matrix_market(out, a, comment=f"clustered-spectrum matrix, seed {args.seed}")
    meta = {"spec": spec.to_dict(), "value_sampling": "uniform", "matrix": out.name,
            "singular_values": [float(s) for s in sigma]}
    io.write_json(out.with_suffix(".json"), meta)
    return 0


def cmd_select(args):
    a = io.read_matrix_market(args.input)
    res = select_rows(a, args.method, args.mp, seed=args.seed, sketch_cols=args.sketch_cols,
                      block_size=args.block_size)
    doc = res.to_dict()
    if args.out:
        io.write_json(args.out, doc)
    else:
        _emit(doc)
    return 0


def _algo_entry(args):
    if args.algo == "scrim":
        return {"name": "scrim", "zeta": args.zeta}
    return {"name": "krylov", "ell": "inf" if args.ell == math.inf else args.ell}


def cmd_solve(args):
    a = io.read_matrix_market(args.matrix)
    m, n = a.shape
    b = _read_rhs(args.rhs, m)
    f = build_constraint(a, b, _read_ip(args.ip, m))
    if f.partition.m_r == 0:
        raise UsageError("every row is a constraint row; nothing to iterate on")
    x_ref = pinv_solve_least_norm(a, b) if m * n <= args.rse_size_cap else None
    cfg = bench.algo_config(_algo_entry(args), args.tol, args.max_iters)
    q = args.q if args.sampler == "partition" else None
    if args.sampler == "partition" and q is None:
        raise UsageError("--sampler partition needs --q")
    space = bench.make_space(args.sampler, f, q, make_rng(args.seed, 0))
    tr = run(a, b, f, space, cfg, x_star=x_ref, rng=make_rng(args.seed, 1))
    if args.trace:
        io.write_trace_csv(args.trace, [(0, tr)])
    m_r = f.partition.m_r
    per_step = bench.rows_per_step(args.sampler, q, m_r)
    _emit({
        "status": tr.status,
        "message": tr.message,
        "iterations": int(tr.iterations),
        "full_iterations": tr.full_iterations(per_step, m_r),
        "rse": float(tr.rse[-1]) if tr.has_rse else None,
        "residual_norm": float(np.linalg.norm(a @ tr.x - b)),
        "m_p": int(f.partition.m_p),
        "m_r": int(m_r),
        "reorthogonalizations": int(tr.n_reorth),
        "wall_time": tr.wall_time,
    })
    return 0


def cmd_bench(args):
    path = Path(args.config)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise io.DataError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc
    res = bench.run_experiment(cfg, base_dir=path.parent)
    bench.write_experiment(res, args.out)
    s = res.summary
    _emit({k: s[k] for k in ("mean_iterations", "median_iterations", "mean_full_iterations", "statuses")})
    return 0


def cmd_rate(args):
    a = io.read_matrix_market(args.matrix)
    m = a.shape[0]
    b = _read_rhs(args.rhs, m)
    f = build_constraint(a, b, _read_ip(args.ip, m))
    i_r, i_p = f.partition.i_r, f.partition.i_p
    if f.partition.m_r == 0:
        raise UsageError("every row is a constraint row; there is no rate to report")
    if args.sampler == "partition" and args.q is None:
        raise UsageError("--sampler partition needs --q")
    space = bench.make_space(args.sampler, f, args.q, make_rng(args.seed, 0))
    rep = rate_report(space, f.reduced_matrix(), args.zeta, scale=f.scale())
    if rep.rho is not None:
        # unconstrained space: the same blocks in global row numbers, plus the constraint rows
        if args.sampler == "single_row":
            blocks = [[i] for i in range(m)]
        else:
            blocks = [i_r[blk] for blk in space.blocks]
            if i_p.size:
                blocks.append(i_p)
        rep.rho_tilde = compare_rates(a, np.zeros(0, dtype=np.int64), blocks, args.zeta).rho_tilde
    _emit(rep.to_dict())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="scrim", description="Subspace-constrained randomized iterative solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("matgen", help="generate a clustered-spectrum test matrix")
    for flag in ("--m", "--n", "--r", "--nl", "--ns"):
        g.add_argument(flag, type=int, required=True)
    g.add_argument("--kappa-m", type=float, required=True)
    g.add_argument("--rs", type=float, nargs=2, default=[50.0, 150.0], metavar=("LO", "HI"))
    g.add_argument("--rm", type=float, nargs=2, default=[300.0, 400.0], metavar=("LO", "HI"))
    g.add_argument("--rl", type=float, nargs=2, default=[900.0, 1000.0], metavar=("LO", "HI"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="Matrix Market output; metadata goes next to it as .json")
    g.set_defaults(func=cmd_matgen)

    s = sub.add_parser("select", help="choose constraint rows")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--method", choices=METHODS, required=True)
    s.add_argument("--mp", type=int, required=True)
    s.add_argument("--sketch-cols", type=int)
    s.add_argument("--block-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_select)

    v = sub.add_parser("solve", help="run one solve")
    v.add_argument("--matrix", required=True)
    v.add_argument("--rhs", help="right-hand side file (default: zero vector)")
    v.add_argument("--ip", default="none", help="selection document or index list, or 'none'")
    v.add_argument("--algo", choices=("scrim", "krylov"), default="krylov")
    v.add_argument("--zeta", type=float, default=1.0)
    v.add_argument("--ell", type=_ell, default=10)
    v.add_argument("--sampler", choices=("partition", "single_row", "identity"), default="partition")
    v.add_argument("--q", type=int)
    v.add_argument("--tol", type=float, default=1e-12)
    v.add_argument("--max-iters", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trace")
    v.add_argument("--rse-size-cap", type=int, default=bench.DEFAULTS["rse_size_cap"],
                   help="above m*n this large, stop on the residual and omit the error column")
    v.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a multi-trial experiment from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("rate", help="exact convergence factors for an enumerable sampler")
    r.add_argument("--matrix", required=True)
    r.add_argument("--rhs")
    r.add_argument("--ip", default="none")
    r.add_argument("--sampler", choices=("partition", "single_row", "identity"), default="partition")
    r.add_argument("--q", type=int)
    r.add_argument("--zeta", type=float, default=1.0)
    r.add_argument("--seed", type=int, default=0, help="seed for the random row partition")
    r.set_defaults(func=cmd_rate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (io.DataError, InconsistentSubsystemError, OSError, bench.ExperimentError) as exc:
        print(f"scrim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SpecError, UsageError, ValueError, TypeError) as exc:
        print(f"scrim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: gen | sketch | decode | eval | bench | ripprobe.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Step sizes and penalties on the command line are in raw-measurement units
(the readings ``a_j' S a_j`` without the 1/m averaging), matching how such
configurations are usually quoted; conversion happens internally.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .decoder import SAFE_AUTO, STABLE, DecoderConfig, backprojection_init, decode
from .experiments import (
    load_config,
    read_results_csv,
    rip_probe,
    run_grid,
    write_results_csv,
)
from .metrics import f1_support, relative_error
from .modelgen import (
    DEFAULT_ZERO_TOL,
    GeneratorSpec,
    generate,
    save_ground_truth,
)
from .sketch import (
    build_operator,
    load_skch,
    operator_for_sketch,
    save_skch,
    sketch_stream,
)
from .symmat import load_matrix_csv, load_spmx, save_spmx

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sketchprec", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sketchprec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a ground-truth precision/covariance pair")
    p.add_argument("--kind", choices=["erdos", "powerlaw"], required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--p", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("sketch", help="one-pass sketch of CSV sample rows")
    p.add_argument("--op", choices=["structured", "dense"], default="structured")
    p.add_argument("--dist", choices=["gaussian", "uniform_sphere"], default="gaussian")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--data", required=True, help="CSV of samples, one row each; '-' for stdin")
    p.add_argument("--d", type=int, help="sample dimension (required with --data -)")
    p.add_argument("-o", "--out", required=True, help="output .skch file")

    p = sub.add_parser("decode", help="decode a sketch into covariance/precision estimates")
    p.add_argument("--sketch", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="sparsity penalty (raw units)")
    p.add_argument("--gamma", default=STABLE,
                   help=f"step size (raw units), '{SAFE_AUTO}' or '{STABLE}'")
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--lam-min-hat", type=float, default=0.0)
    p.add_argument("--init", choices=["backprojection", "scaled_identity"],
                   default="backprojection")
    p.add_argument("--early-stop", action="store_true")
    p.add_argument("--trace", action="store_true", help="record the objective trace")
    p.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="score an estimate against a reference matrix")
    p.add_argument("--true", dest="true_path", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--zero-tol", type=float, default=DEFAULT_ZERO_TOL)

    p = sub.add_parser("bench", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--out", required=True, help="output results CSV")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel cells (default: SKETCHPREC_WORKERS or 1)")

    p = sub.add_parser("ripprobe", help="secant-deviation statistics of the sketching operator")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--b", type=float, default=15.0)
    p.add_argument("--m-grid", required=True, help="comma-separated sketch sizes")
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--mc", type=int, default=200_000)
    p.add_argument("--dist", choices=["gaussian", "uniform_sphere"], default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default=None, help="optional output CSV (default: stdout)")
    return parser


def _load_matrix(path):
    if str(path).endswith(".csv"):
        return load_matrix_csv(path)
    return load_spmx(path)


def _stdin_rows(d: int):
    reader = csv.reader(sys.stdin)
    for line in reader:
        if not line:
            continue
        row = np.array([float(v) for v in line], dtype=np.float64)
        if row.size != d:
            raise ValueError(f"stdin row has {row.size} values, expected {d}")
        yield row


def _cmd_gen(args) -> int:
    spec = GeneratorSpec(
        kind=args.kind, d=args.d, num_blocks=args.blocks, p=args.p, seed=args.seed
    )
    gt = generate(spec)
    save_ground_truth(args.out, gt)
    print(f"wrote theta.spmx, sigma.spmx, meta.json to {args.out} (nnz={gt.nnz})")
    return EXIT_OK


def _cmd_sketch(args) -> int:
    if args.data == "-":
        if args.d is None:
            raise ValueError("--d is required when sketching from stdin")
        d = args.d
        op = build_operator(args.op, d, args.m, args.seed, dist=args.dist)
        s = sketch_stream(op, _stdin_rows(d))
    else:
        data = np.loadtxt(args.data, delimiter=",", dtype=np.float64, ndmin=2)
        d = data.shape[1]
        if args.d is not None and args.d != d:
            raise ValueError(f"--d {args.d} does not match data width {d}")
        op = build_operator(args.op, d, args.m, args.seed, dist=args.dist)
        s = sketch_stream(op, data)
    save_skch(args.out, s)
    print(f"wrote {args.out} (m={s.m}, n={s.n}, d={s.d_orig})")
    return EXIT_OK


def _cmd_decode(args) -> int:
    s = load_skch(args.sketch)
    op = operator_for_sketch(s)
    gamma = args.gamma
    if gamma not in (SAFE_AUTO, STABLE):
        gamma = float(gamma)
    init = backprojection_init(op, s) if args.init == "backprojection" else None
    cfg = DecoderConfig.from_raw_units(
        args.lam,
        gamma,
        op.m,
        t_max=args.tmax,
        lam_min_hat=args.lam_min_hat,
        init=init,
        record_trace=args.trace,
        early_stop=args.early_stop,
    )
    result = decode(op, s, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_spmx(os.path.join(args.out, "sigma.spmx"), result.estimate.covariance)
    save_spmx(os.path.join(args.out, "theta.spmx"), result.estimate.precision)
    meta = {
        "lambda": args.lam,
        "gamma": args.gamma,
        "gamma_used_operator_units": result.gamma_used,
        "t_max": args.tmax,
        "iterations": result.iterations,
        "spd_violations": result.spd_violations,
        "converged": bool(result.estimate.converged),
        "kkt_residual": result.estimate.kkt_residual,
        "sketch": {"m": s.m, "d": s.d_orig, "n": s.n, "fingerprint": list(s.fingerprint)},
    }
    if result.objective_trace is not None:
        meta["objective_trace"] = result.objective_trace.tolist()
    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    print(f"wrote sigma.spmx, theta.spmx, meta.json to {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    theta_true = _load_matrix(args.true_path)
    theta_est = _load_matrix(args.est)
    score = f1_support(theta_true, theta_est, args.zero_tol)
    out = {
        "re": relative_error(theta_true, theta_est),
        "f1": score.f1,
        "tp": score.tp,
        "fp": score.fp,
        "fn": score.fn,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    rows = run_grid(cfg, workers=args.workers)
    write_results_csv(args.out, rows)
    n_failed = sum(1 for r in rows if r.failed)
    print(f"wrote {len(rows)} rows to {args.out} ({n_failed} failed cells)")
    return EXIT_NUMERICAL if n_failed == len(rows) and rows else EXIT_OK


def _cmd_ripprobe(args) -> int:
    m_grid = [int(v) for v in args.m_grid.split(",") if v]
    table = rip_probe(
        d=args.d, k=args.k, a=args.a, b=args.b, m_grid=m_grid,
        n_pairs=args.pairs, n_mc=args.mc, dist=args.dist, seed=args.seed,
    )
    lines = ["m,n_pairs,median,q10,q90,max"]
    for row in table:
        lines.append(
            f"{row['m']},{row['n_pairs']},{row['median']:.6g},"
            f"{row['q10']:.6g},{row['q90']:.6g},{row['max']:.6g}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "sketch": _cmd_sketch,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "ripprobe": _cmd_ripprobe,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"sketchprec {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"sketchprec {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

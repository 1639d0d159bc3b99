"""Command-line interface: solve, bench, gen."""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import bilevel as bl
from . import relax
from .probfile import ProblemFileError, emit, parse
from .randgen import KINDS, gen_random

EXIT_SOLVED = 0
EXIT_MAX_ITERATIONS = 2
EXIT_INFEASIBLE = 3
EXIT_SUBPROBLEM_FAILURE = 4
EXIT_PARSE_ERROR = 5

_STATUS_CODES = {
    bl.GLOBAL_SOLVED_EPS: EXIT_SOLVED,
    bl.MAX_ITERATIONS: EXIT_MAX_ITERATIONS,
    bl.INFEASIBLE: EXIT_INFEASIBLE,
    bl.SUBPROBLEM_FAILURE: EXIT_SUBPROBLEM_FAILURE,
}


def _add_solve(sub):
    p = sub.add_parser("solve", help="solve a bilevel problem file")
    p.add_argument("file")
    p.add_argument("--eps", type=float, default=1e-5,
                   help="feasibility tolerance for acceptance (default 1e-5)")
    p.add_argument("--kmax", type=int, default=20,
                   help="maximum exchange iterations (default 20)")
    p.add_argument("--order-max", type=int, default=None, metavar="K",
                   help="cap the relaxation order of every subproblem")
    p.add_argument("--no-psi", action="store_true",
                   help="drop the Jacobian equalities (plain exchange scheme)")
    p.add_argument("--ball", type=float, default=None, metavar="R",
                   help="append a radius-R ball constraint to every subproblem")
    p.add_argument("--dump-psi", action="store_true",
                   help="print the constructed psi system and exit")
    p.add_argument("--dump-sdp", metavar="DIR", default=None,
                   help="dump every assembled SDP in sparse text form to DIR")
    p.add_argument("--report", choices=("md", "csv"), default="md")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_run_solve)


def _iteration_table(result: bl.BilevelResult, fmt: str) -> str:
    header = ["Iter k", "(x_i^k, y_i^k)", "z_{i,j}^k", "F_k*", "v_i^k"]
    rows = []
    for rec in result.history:
        for cand in rec.candidates:
            pt = np.concatenate([cand.x, cand.y])
            zs = "; ".join(
                np.array2string(z, precision=4, separator=",") for z in cand.lower_minimizers
            )
            rows.append([
                str(rec.k),
                np.array2string(pt, precision=4, separator=","),
                zs,
                f"{rec.master_bound:.4f}",
                f"{cand.v:.3e}",
            ])
    if fmt == "csv":
        import csv as _csv
        import io as _io
        buf = _io.StringIO()
        w = _csv.writer(buf)
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    def line(vals):
        return "| " + " | ".join(v.ljust(w) for v, w in zip(vals, widths)) + " |"
    out = [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out.extend(line(r) for r in rows)
    return "\n".join(out)


def _run_solve(args) -> int:
    try:
        parsed = parse(args.file)
    except (ProblemFileError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    bp = parsed.bilevel
    if args.dump_psi:
        from .jacobian import build_system

        system = build_system(bp.lower)
        print(f"# psi system: {system.count_actual} entries "
              f"(paper minimal count {system.minimal_count})")
        for entry in system.entries:
            print(f"J={list(entry.subset)} rows={list(entry.minor_rows)}: {entry.poly}")
        return EXIT_SOLVED
    pop = relax.PopOptions(k_extra=2)
    if args.order_max is not None:
        pop.k_max_order = args.order_max
    if args.ball is not None:
        pop.ball_radius = args.ball
    if args.dump_sdp:
        os.makedirs(args.dump_sdp, exist_ok=True)
        pop.dump_dir = args.dump_sdp
    opts = bl.ExchangeOptions(
        eps=args.eps, k_max=args.kmax, no_psi=args.no_psi, pop=pop,
        verbose=args.verbose,
    )
    res = bl.exchange_solve(bp, opts)
    print(_iteration_table(res, args.report))
    print()
    print(f"status: {res.status}   iterations: {res.iterations}   "
          f"time: {res.wall_time:.2f}s")
    if res.global_not_guaranteed:
        print("note: general kind - global optimality not guaranteed "
              "(global_not_guaranteed flag set)")
    for sol in res.solutions:
        print(f"solution: x = {np.array2string(sol.x, precision=6)}  "
              f"y = {np.array2string(sol.y, precision=6)}  "
              f"F = {sol.F_value:.6f}  v_check = {sol.v_check:.3e}  "
              f"v_audit = {sol.v_audit:.3e}")
    if not math.isnan(res.v_star):
        print(f"v* = {res.v_star:.3e}")
    if res.failure_note:
        print(f"note: {res.failure_note}")
    return _STATUS_CODES[res.status]


def _add_bench(sub):
    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("suite", help="sbpp_small | sbpp_large | gbpp_small | a directory")
    p.add_argument("--slow", action="store_true", help="include rows marked slow")
    p.add_argument("--report", choices=("md", "csv"), default="md")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--kmax", type=int, default=20)
    p.set_defaults(func=_run_bench)


def _run_bench(args) -> int:
    opts = bl.ExchangeOptions(eps=args.eps, k_max=args.kmax)
    if os.path.isdir(args.suite):
        report = bench_mod.run_suite("custom", opts, custom_dir=args.suite)
    else:
        try:
            report = bench_mod.run_suite(args.suite, opts, include_slow=args.slow)
        except KeyError as exc:
            print(exc, file=sys.stderr)
            return EXIT_PARSE_ERROR
    fmt = "csv" if args.report == "csv" else "markdown"
    print(bench_mod.emit_report(report, fmt))
    return EXIT_SOLVED


def _add_gen(sub):
    p = sub.add_parser("gen", help="generate a random SBPP instance")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--d1", type=int, required=True)
    p.add_argument("--d2", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", default=None, help="write to file (default stdout)")
    p.set_defaults(func=_run_gen)


def _run_gen(args) -> int:
    parsed = gen_random(args.kind, args.n, args.p, args.d1, args.d2, args.seed)
    text = emit(parsed)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_SOLVED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bilevelsdp",
        description="Bilevel polynomial program solver (Jacobian/Fritz John "
                    "reformulation + moment-SOS relaxations + exchange loop)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_solve(sub)
    _add_bench(sub)
    _add_gen(sub)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

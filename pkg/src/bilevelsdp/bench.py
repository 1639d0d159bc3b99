"""Bundled benchmark suite and report emission."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional

import numpy as np

from . import bilevel as bl
from .probfile import ParsedProblem, parse, parse_text


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    slow: bool = False
    expect_local: bool = False  # the known value is a documented local solution


SUITES: Dict[str, List[SuiteEntry]] = {
    "sbpp_small": [
        SuiteEntry("ex2_2"),
        SuiteEntry("ex2_3"),
        SuiteEntry("ex2_4"),
        SuiteEntry("ex3_14"),
        SuiteEntry("ex3_15"),
        SuiteEntry("ex3_16"),
        SuiteEntry("ex3_17"),
        SuiteEntry("ex3_18"),
        SuiteEntry("ex3_19"),
        SuiteEntry("ex3_20"),
        SuiteEntry("ex6_1"),
    ],
    "sbpp_large": [
        SuiteEntry("ex5_1"),
        SuiteEntry("ex5_2"),
        SuiteEntry("table5", slow=True),
    ],
    "gbpp_small": [
        SuiteEntry("ex4_1"),
        SuiteEntry("ex4_3", expect_local=True),
        SuiteEntry("ex5_7"),
        SuiteEntry("t9_1"),
        SuiteEntry("t9_2"),
        SuiteEntry("t9_3"),
        SuiteEntry("t9_4"),
        SuiteEntry("t9_5"),
        SuiteEntry("t9_6"),
        SuiteEntry("t9_7"),
        SuiteEntry("table7", slow=True),
    ],
}

# known-solution regression tolerances (paper values carry 4 printed digits)
F_TOL = 1e-3
POINT_TOL = 5e-3


def load_problem(name: str) -> ParsedProblem:
    ref = resources.files("bilevelsdp").joinpath(f"problems/{name}.blp")
    return parse_text(ref.read_text(), name=name)


def problem_names(suite: str) -> List[str]:
    return [e.name for e in SUITES[suite]]


@dataclass
class ReportRow:
    name: str
    status: str
    iterations: int
    time: float
    F_value: float
    v_star: float
    dist_known: float
    F_known: Optional[float]
    matched: bool
    note: str = ""


@dataclass
class BenchmarkReport:
    suite: str
    rows: List[ReportRow] = field(default_factory=list)


def _distance(sol: bl.Solution, known_pts: List[np.ndarray]) -> float:
    if not known_pts:
        return math.nan
    pt = np.concatenate([sol.x, sol.y])
    return min(float(np.max(np.abs(pt - kp))) for kp in known_pts)


def run_problem(
    parsed: ParsedProblem, opts: Optional[bl.ExchangeOptions] = None
) -> ReportRow:
    opts = opts or bl.ExchangeOptions()
    t0 = time.perf_counter()
    note = ""
    try:
        res = bl.exchange_solve(parsed.bilevel, opts)
        status = res.status
        iters = res.iterations
        Fv = res.best_F
        vstar = res.v_star
        dist = (
            min(_distance(s, parsed.known.solutions) for s in res.solutions)
            if res.solutions
            else math.nan
        )
        note = res.failure_note
    except Exception as exc:  # failures are recorded, never dropped
        status = "Error"
        iters = 0
        Fv = math.nan
        vstar = math.nan
        dist = math.nan
        note = f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    Fk = parsed.known.F_star
    matched = (
        status == bl.GLOBAL_SOLVED_EPS
        and Fk is not None
        and not math.isnan(Fv)
        and abs(Fv - Fk) <= F_TOL
        and (math.isnan(dist) or dist <= POINT_TOL)
    )
    return ReportRow(
        name=parsed.name,
        status=status,
        iterations=iters,
        time=elapsed,
        F_value=Fv,
        v_star=vstar,
        dist_known=dist,
        F_known=Fk,
        matched=matched,
        note=note,
    )


def run_suite(
    suite: str,
    opts: Optional[bl.ExchangeOptions] = None,
    include_slow: bool = False,
    custom_dir: Optional[str] = None,
) -> BenchmarkReport:
    """Run every suite entry; one row per problem, failures included."""
    report = BenchmarkReport(suite=suite)
    if custom_dir is not None:
        names = sorted(
            fn[:-4] for fn in os.listdir(custom_dir) if fn.endswith(".blp")
        )
        loaders = [(n, os.path.join(custom_dir, n + ".blp")) for n in names]
        for name, path in loaders:
            report.rows.append(run_problem(parse(path), opts))
        return report
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; have {sorted(SUITES)}")
    for entry in SUITES[suite]:
        if entry.slow and not include_slow:
            continue
        parsed = load_problem(entry.name)
        report.rows.append(run_problem(parsed, opts))
    return report


_COLUMNS = [
    "name", "status", "iterations", "time_s", "F_star", "v_star",
    "dist_to_known", "F_known", "matched", "note",
]


def _row_values(r: ReportRow) -> List[str]:
    def num(v, fmt="{:.4f}"):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return ""
        return fmt.format(v)

    return [
        r.name,
        r.status,
        str(r.iterations),
        f"{r.time:.2f}",
        num(r.F_value),
        num(r.v_star, "{:.2e}"),
        num(r.dist_known, "{:.2e}"),
        num(r.F_known),
        "yes" if r.matched else "no",
        r.note,
    ]


def emit_report(report: BenchmarkReport, fmt: str = "markdown") -> str:
    """Stable column order; `markdown` or `csv`."""
    rows = [_row_values(r) for r in report.rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        widths = [
            max(len(_COLUMNS[i]), *(len(r[i]) for r in rows)) if rows else len(_COLUMNS[i])
            for i in range(len(_COLUMNS))
        ]
        def line(vals):
            return "| " + " | ".join(v.ljust(w) for v, w in zip(vals, widths)) + " |"
        out = [line(_COLUMNS), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        out.extend(line(r) for r in rows)
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")

"""Command-line front end.

    varfrac run <file|example1..example5> [--M 2,6,10] [--points 0.2,0.4 | --grid N]
                [--format csv|json] [--out PATH] [--tol 1e-12] [--max-iters 100]
    varfrac list

Exit codes: 0 success, 1 I/O error, 2 parse/schema error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import EvalError
from .problems import EXAMPLES, FORMATS, ProblemFile, ReferenceTable, SchemaError, get_example, load_problem_file
from .solver import ConvergenceError, SolverError, SpectralSolution, l2_error, solve, theorem2_bound

__all__ = ["RunResult", "emit_table", "main", "run"]

logger = logging.getLogger("varfrac")

EXIT_OK = 0
EXIT_IO = 1
EXIT_SCHEMA = 2
EXIT_SOLVER = 3


@dataclass(frozen=True)
class RunResult:
    """Outcome of one solve, sampled on the output points."""

    M: int
    points: tuple[float, ...]
    values: tuple[float, ...]
    coefficients: tuple[float, ...]
    iterations: int
    residual_norm: float
    converged: bool
    abs_error: tuple[float, ...] | None = None
    l2_error: float | None = None
    bound: float | None = None
    message: str = ""


def _sample(sol: SpectralSolution, pf: ProblemFile, points: Sequence[float], kappa: float | None, message=""):
    values = tuple(float(v) for v in sol(np.asarray(points)))
    exact = pf.exact
    abs_error = l2 = None
    if exact is not None:
        abs_error = tuple(abs(v - float(exact(t))) for v, t in zip(values, points))
        l2 = l2_error(sol, exact)
    bound = theorem2_bound(sol.M, pf.problem.n, kappa) if kappa is not None else None
    return RunResult(
        M=sol.M,
        points=tuple(points),
        values=values,
        coefficients=tuple(float(a) for a in sol.A),
        iterations=sol.iterations,
        residual_norm=sol.residual_norm,
        converged=sol.converged,
        abs_error=abs_error,
        l2_error=l2,
        bound=bound,
        message=message,
    )


def _fmt_t(t: float) -> str:
    return f"{t:.10g}"


def emit_table(
    results: Sequence[RunResult],
    format: str = "csv",
    *,
    points: Sequence[float] | None = None,
    name: str = "",
    y0: float | None = None,
    reference: ReferenceTable | None = None,
) -> str:
    """Render results as CSV (3 significant digits) or JSON (full precision).

    Columns are ``t`` then one column per ``M`` in ascending order. When the
    problem has an exact solution the columns hold absolute errors,
    otherwise the computed solution values.
    """
    results = sorted(results, key=lambda r: r.M)
    if points is None:
        points = results[0].points if results else ()
    with_error = bool(results) and all(r.abs_error is not None for r in results)
    if format == "csv":
        lines = [",".join(["t", *(f"M={r.M}" for r in results)])]
        for i, t in enumerate(points):
            cells = [(r.abs_error if with_error else r.values)[i] for r in results]
            lines.append(",".join([_fmt_t(t), *(f"{c:.2e}" for c in cells)]))
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "problem": name,
            "quantity": "abs_error" if with_error else "y",
            "points": list(points),
            "y0": y0,
            "results": [
                {
                    "M": r.M,
                    "converged": r.converged,
                    "iterations": r.iterations,
                    "residual_norm": r.residual_norm,
                    "coefficients": list(r.coefficients),
                    "y": list(r.values),
                    "abs_error": None if r.abs_error is None else list(r.abs_error),
                    "l2_error": r.l2_error,
                    "theorem2_bound": r.bound,
                }
                for r in results
            ],
        }
        if reference is not None:
            doc["reference"] = {
                "caption": reference.caption,
                "points": list(reference.points),
                "columns": {k: list(v) for k, v in reference.columns.items()},
            }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(not (0.0 < v <= 1.0) for v in vals):
        raise argparse.ArgumentTypeError("points must lie in (0, 1]")
    return vals


def _load(target: str) -> tuple[ProblemFile, ReferenceTable | None]:
    if target in EXAMPLES:
        return get_example(target), EXAMPLES[target].table
    return load_problem_file(target), None


def run(
    target: str,
    M: Sequence[int] | None = None,
    points: Sequence[float] | None = None,
    grid: int | None = None,
    format: str | None = None,
    out: str | Path | None = None,
    tol: float = 1e-12,
    max_iters: int = 100,
    kappa: float | None = None,
    stdout=None,
) -> int:
    """Solve a problem file or built-in example for each ``M``; returns an exit code."""
    stdout = stdout or sys.stdout
    try:
        pf, reference = _load(target)
    except SchemaError as exc:
        logger.error("schema error in %s: %s", target, exc)
        return EXIT_SCHEMA
    except OSError as exc:
        logger.error("cannot read %s: %s", target, exc)
        return EXIT_IO

    degrees = sorted(set(M)) if M else list(pf.M)
    if any(not 0 <= m <= 30 for m in degrees):
        logger.error("M: degrees must lie in [0, 30], got %s", degrees)
        return EXIT_SCHEMA
    if points is not None:
        sample = tuple(points)
    elif grid is not None:
        sample = tuple(k / grid for k in range(1, grid + 1))
    else:
        sample = pf.output.sample_points()
    fmt = format or pf.output.format

    results = []
    status = EXIT_OK
    for m in degrees:
        try:
            sol = solve(pf.problem, m, tol=tol, max_iter=max_iters)
            res = _sample(sol, pf, sample, kappa)
        except ConvergenceError as exc:
            logger.error("M=%d: %s", m, exc)
            status = EXIT_SOLVER
            if exc.solution is None:
                continue
            res = _sample(exc.solution, pf, sample, kappa, message=str(exc))
        except (SolverError, EvalError, ArithmeticError) as exc:
            logger.error("M=%d: %s", m, exc)
            status = EXIT_SOLVER
            continue
        results.append(res)
        logger.info(
            "M=%d: iterations=%d residual=%.2e%s%s",
            res.M,
            res.iterations,
            res.residual_norm,
            "" if res.l2_error is None else f" L2 error={res.l2_error:.3e}",
            "" if res.bound is None else f" bound={res.bound:.3e}",
        )

    text = emit_table(
        results,
        fmt,
        points=sample,
        name=pf.name,
        y0=pf.problem.initial_values[0],
        reference=reference,
    )
    if out is None:
        stdout.write(text)
    else:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            logger.error("cannot write %s: %s", out, exc)
            return EXIT_IO
    return status


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varfrac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-M convergence details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve a problem file or built-in example")
    p.add_argument("target", help="path to a YAML problem file, or example1..example5")
    p.add_argument("--M", type=_int_list, help="comma-separated basis degrees")
    where = p.add_mutually_exclusive_group()
    where.add_argument("--points", type=_float_list, help="comma-separated sample points in (0, 1]")
    where.add_argument("--grid", type=int, help="sample at k/N for k = 1..N")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--tol", type=_positive_float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--kappa", type=float, help="derivative bound; adds the a-priori error bound to the report")

    sub.add_parser("list", help="list the built-in examples")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "list":
        for key, entry in EXAMPLES.items():
            print(f"{key}: {entry.description}")
        return EXIT_OK
    if args.grid is not None and args.grid < 1:
        logger.error("--grid must be at least 1")
        return EXIT_SCHEMA
    return run(
        args.target,
        M=args.M,
        points=args.points,
        grid=args.grid,
        format=args.format,
        out=args.out,
        tol=args.tol,
        max_iters=args.max_iters,
        kappa=args.kappa,
    )


if __name__ == "__main__":
    sys.exit(main())

"""Problem files and the built-in example problems.

A problem file is a YAML mapping::

    name: pantograph
    alpha: "1"                      # order of the leading derivative, in t
    n: 1                            # max ceil(alpha(t)) on (0, 1]
    term_orders: []                 # increasing lower orders, bound to d1, d2, ...
    rhs: "-0.1*exp(-0.2*t) - y + 0.1*z"
    deformed_args: {z: "0.2*t"}     # z = y(0.2 t) inside rhs
    initial_values: [1]             # y(0), y'(0), ..., n values
    exact: "exp(-t)"                # optional
    M: [6, 8, 10]                   # optional, int or list
    output: {points: [0.25, 0.125], format: csv}   # or grid: N

Unknown keys are rejected. Every schema problem raises :class:`SchemaError`
whose ``key`` names the offending entry.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .basis import MAX_DEGREE
from .expr import EvalError, Expression, ExprSyntaxError
from .operators import OrderFunction
from .solver import FdeProblem, term_name

__all__ = [
    "EXAMPLES",
    "ExampleEntry",
    "OutputSpec",
    "ProblemFile",
    "ReferenceTable",
    "SchemaError",
    "get_example",
    "load_problem_file",
    "parse_problem",
]

_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")
_KEYS = {"name", "alpha", "n", "term_orders", "rhs", "deformed_args", "initial_values", "exact", "M", "output"}
_REQUIRED = ("alpha", "n", "rhs", "initial_values")
_OUTPUT_KEYS = {"points", "grid", "format"}
FORMATS = ("csv", "json")


class SchemaError(ValueError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class OutputSpec:
    points: tuple[float, ...] | None = None
    grid: int | None = None
    format: str = "csv"

    def sample_points(self) -> tuple[float, ...]:
        if self.points is not None:
            return self.points
        N = self.grid or 10
        return tuple(k / N for k in range(1, N + 1))


@dataclass(frozen=True, eq=False)
class ProblemFile:
    """A validated problem description plus its run settings."""

    name: str
    problem: FdeProblem
    source: Mapping[str, Any]
    M: tuple[int, ...] = (2, 4, 6)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def exact(self):
        return self.problem.exact


def _expr(key: str, value: Any, variables) -> Expression:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise SchemaError(key, f"expected an expression string, got {type(value).__name__}")
    try:
        return Expression(str(value), frozenset(variables))
    except ExprSyntaxError as exc:
        raise SchemaError(key, str(exc)) from None


def _int(key: str, value: Any, lo: int, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(key, f"expected an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise SchemaError(key, f"value {value} outside {bound}")
    return value


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(key, f"expected a finite number, got {value!r}")
    return float(value)


def _order(key: str, value: Any, n: int | None = None) -> OrderFunction:
    e = _expr(key, value, {"t"})
    try:
        return OrderFunction(e, n_bound=n, label=key)
    except (ValueError, EvalError) as exc:
        msg = str(exc)
        raise SchemaError(key, msg[len(key) + 2 :] if msg.startswith(key + ":") else msg) from None


def _output(value: Any) -> OutputSpec:
    if not isinstance(value, Mapping):
        raise SchemaError("output", "expected a mapping")
    for k in value:
        if k not in _OUTPUT_KEYS:
            raise SchemaError(f"output.{k}", "unknown key")
    if "points" in value and "grid" in value:
        raise SchemaError("output", "give either points or grid, not both")
    points = None
    if "points" in value:
        if not isinstance(value["points"], list) or not value["points"]:
            raise SchemaError("output.points", "expected a non-empty list of numbers")
        points = tuple(_number("output.points", p) for p in value["points"])
        if any(not 0.0 < p <= 1.0 for p in points):
            raise SchemaError("output.points", "points must lie in (0, 1]")
    grid = _int("output.grid", value["grid"], 1) if "grid" in value else None
    fmt = value.get("format", "csv")
    if fmt not in FORMATS:
        raise SchemaError("output.format", f"expected one of {FORMATS}, got {fmt!r}")
    return OutputSpec(points=points, grid=grid, format=fmt)


def parse_problem(data: Any, default_name: str = "problem") -> ProblemFile:
    """Validate a problem mapping and build the solver-level problem."""
    if not isinstance(data, Mapping):
        raise SchemaError("<root>", "problem file must be a mapping")
    for k in data:
        if k not in _KEYS:
            raise SchemaError(str(k), "unknown key")
    for k in _REQUIRED:
        if k not in data:
            raise SchemaError(k, "missing required key")

    name = str(data.get("name", default_name))
    n = _int("n", data["n"], 1)
    alpha = _order("alpha", data["alpha"], n)

    raw_terms = data.get("term_orders", [])
    if not isinstance(raw_terms, list):
        raise SchemaError("term_orders", "expected a list of expressions")
    terms = [_order(f"term_orders[{i}]", v) for i, v in enumerate(raw_terms)]

    raw_def = data.get("deformed_args", {}) or {}
    if not isinstance(raw_def, Mapping):
        raise SchemaError("deformed_args", "expected a mapping of name -> expression")
    reserved = {"t", "y"} | {term_name(j + 1) for j in range(len(terms))}
    deformed = {}
    for key, value in raw_def.items():
        if not isinstance(key, str) or not _IDENT.match(key) or key in reserved:
            raise SchemaError(f"deformed_args.{key}", "invalid or reserved name")
        deformed[key] = _expr(f"deformed_args.{key}", value, {"t"})

    variables = reserved | set(deformed)
    rhs = _expr("rhs", data["rhs"], variables)

    raw_init = data["initial_values"]
    if not isinstance(raw_init, list):
        raise SchemaError("initial_values", "expected a list of numbers")
    init = [_number("initial_values", v) for v in raw_init]
    if len(init) != n:
        raise SchemaError("initial_values", f"expected n = {n} values, got {len(init)}")

    exact = _expr("exact", data["exact"], {"t"}) if data.get("exact") is not None else None

    raw_M = data.get("M", [2, 4, 6])
    Ms = raw_M if isinstance(raw_M, list) else [raw_M]
    if not Ms:
        raise SchemaError("M", "expected at least one degree")
    Ms = tuple(sorted({_int("M", m, 0, MAX_DEGREE) for m in Ms}))

    output = _output(data["output"]) if "output" in data else OutputSpec()

    try:
        problem = FdeProblem(
            alpha=alpha,
            rhs=rhs,
            initial_values=init,
            term_orders=terms,
            deformed_args=deformed,
            name=name,
            exact=exact,
        )
    except (ValueError, EvalError) as exc:
        key, _, detail = str(exc).partition(": ")
        key = re.sub(r"\['(\w+)'\]", r".\1", key)
        raise SchemaError(key if detail else "<problem>", detail or str(exc)) from None
    return ProblemFile(name=name, problem=problem, source=dict(data), M=Ms, output=output)


def load_problem_file(path: str | Path) -> ProblemFile:
    """Read and validate a YAML problem file.

    Raises :class:`OSError` for I/O trouble and :class:`SchemaError` for
    malformed content (including YAML syntax errors).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError("<root>", f"invalid YAML: {exc}") from None
    return parse_problem(data, default_name=Path(path).stem)


# --------------------------------------------------------------------------
# built-in examples


@dataclass(frozen=True)
class ReferenceTable:
    """Published absolute errors, keyed by method label then degree."""

    caption: str
    points: tuple[float, ...]
    #: column label -> values at ``points``; labels of the form "M=6"
    #: belong to this method, anything else is a competing method
    columns: Mapping[str, tuple[float, ...]]


@dataclass(frozen=True)
class ExampleEntry:
    data: Mapping[str, Any]
    description: str
    table: ReferenceTable | None = None
    #: reported coefficient vectors, keyed by M
    coefficients: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    #: reported L2 errors, keyed by M
    l2_errors: Mapping[int, float] = field(default_factory=dict)

    def build(self) -> ProblemFile:
        return parse_problem(self.data, default_name=self.data["name"])


_EX1_G = (
    "-t^(2-2*t)/gamma(3-2*t)"
    " - t^(1/2)*t^(2-t/3)/gamma(3-t/3)"
    " - t^(1/3)*t^(2-t/4)/gamma(3-t/4)"
    " - t^(1/4)*t^(2-t/5)/gamma(3-t/5)"
    " + t^(1/5)*(2-t^2/2)"
)
_EX2_ALPHA = "(1 - 0.5*exp(-t))"
_EX3_G = (
    "gamma(4)/gamma(4-sin(t))*t^(3-sin(t))"
    " + gamma(3)/gamma(3-sin(t))*t^(2-sin(t))"
    " + exp(t)*(t^15 + t^10) + t^3 + t^2"
)
_EX5_ALPHA = "(0.25*(1 + cos(t)^2))"

_DYADIC_POINTS = (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6)

EXAMPLES: dict[str, ExampleEntry] = {
    "example1": ExampleEntry(
        data={
            "name": "example1",
            "alpha": "2*t",
            "n": 2,
            "term_orders": ["t/5", "t/4", "t/3"],
            "rhs": f"{_EX1_G} - t^(1/2)*d3 - t^(1/3)*d2 - t^(1/4)*d1 - t^(1/5)*y",
            "initial_values": [2, 0],
            "exact": "2 - t^2/2",
            "M": [1],
        },
        description="multiterm linear equation of order 2t, exact solution 2 - t^2/2",
        coefficients={1: (-1.0, 0.0)},
    ),
    "example2": ExampleEntry(
        data={
            "name": "example2",
            "alpha": _EX2_ALPHA,
            "n": 1,
            "rhs": (
                f"gamma(4.5)/gamma(4.5 - {_EX2_ALPHA})*t^(3.5 - {_EX2_ALPHA})"
                " + sin(t)*t^7 - sin(t)*y^2"
            ),
            "initial_values": [0],
            "exact": "t^(7/2)",
            "M": [2, 6, 10],
            "output": {"points": [0.2, 0.4, 0.6, 0.8, 1.0]},
        },
        description="nonlinear equation with non-smooth exact solution t^(7/2)",
        table=ReferenceTable(
            caption="absolute errors, alpha(t) = 1 - 0.5 exp(-t)",
            points=(0.2, 0.4, 0.6, 0.8, 1.0),
            columns={
                "M=2": (5.69e-3, 2.34e-3, 2.78e-3, 2.52e-3, 1.66e-2),
                "M=6": (9.75e-6, 8.02e-6, 7.03e-6, 5.97e-6, 2.89e-5),
                "M=10": (8.06e-7, 6.34e-7, 5.53e-7, 4.59e-7, 1.95e-6),
            },
        ),
    ),
    "example3": ExampleEntry(
        data={
            "name": "example3",
            "alpha": "sin(t)",
            "n": 1,
            "rhs": f"{_EX3_G} - y - exp(t)*z",
            "deformed_args": {"z": "t^5"},
            "initial_values": [0],
            "exact": "t^3 + t^2",
            "M": [1, 2],
        },
        description="order sin(t) with deformed argument y(t^5), exact solution t^3 + t^2",
        coefficients={2: (2.0, 5.0, 3.0)},
    ),
    "example4": ExampleEntry(
        data={
            "name": "example4",
            "alpha": "1",
            "n": 1,
            "rhs": "-0.1*exp(-0.2*t) - y + 0.1*z",
            "deformed_args": {"z": "0.2*t"},
            "initial_values": [1],
            "exact": "exp(-t)",
            "M": [6, 8, 10],
            "output": {"points": list(_DYADIC_POINTS)},
        },
        description="pantograph equation with y(0.2 t), alpha = 1, exact solution exp(-t)",
        table=ReferenceTable(
            caption="absolute errors, alpha(t) = 1",
            points=_DYADIC_POINTS,
            columns={
                "modified hat functions n=64": (1.18e-9, 5.39e-10, 1.17e-9, 5.34e-10, 2.27e-9),
                "Bernoulli wavelets k=2 M=6": (1.05e-8, 5.79e-9, 2.00e-8, 3.70e-9, 2.03e-8),
                "M=6": (8.61e-9, 1.01e-8, 9.30e-9, 6.47e-9, 3.83e-9),
                "M=8": (1.37e-11, 1.57e-11, 1.59e-11, 1.21e-11, 7.58e-12),
                "M=10": (5.56e-13, 4.25e-13, 2.42e-13, 1.29e-13, 6.72e-14),
            },
        ),
        coefficients={1: (-0.620328, 0.621053)},
        l2_errors={1: 6.29e-3},
    ),
    "example5": ExampleEntry(
        data={
            "name": "example5",
            "alpha": "1",
            "n": 1,
            "term_orders": [_EX5_ALPHA],
            "rhs": (
                f"(exp(t)*(3 - gammainc_upper(1 - {_EX5_ALPHA}, t)/gamma(1 - {_EX5_ALPHA}))"
                " - d1 + y)/3"
            ),
            "initial_values": [1],
            "exact": "exp(t)",
            "M": [6, 8, 10],
            "output": {"points": [0.1, 0.3, 0.5, 0.7, 0.9]},
        },
        description="D^alpha y + 3y' - y = g with alpha = 0.25(1 + cos^2 t), exact solution exp(t)",
        table=ReferenceTable(
            caption="absolute errors, alpha(t) = 0.25(1 + cos^2 t)",
            points=(0.1, 0.3, 0.5, 0.7, 0.9),
            columns={
                "Lagrange polynomials M=6": (8.66e-9, 1.60e-8, 2.49e-8, 4.19e-8, 5.93e-8),
                "Lagrange polynomials M=10": (1.04e-12, 4.57e-14, 2.82e-11, 3.12e-11, 1.46e-10),
                "M=6": (2.56e-8, 2.43e-8, 2.44e-8, 2.47e-8, 2.56e-8),
                "M=8": (4.12e-11, 3.92e-11, 3.93e-11, 3.98e-11, 4.14e-11),
                "M=10": (4.40e-14, 4.23e-14, 4.24e-14, 4.29e-14, 4.43e-14),
            },
        ),
    ),
}


def get_example(name: str) -> ProblemFile:
    try:
        entry = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None
    return entry.build()

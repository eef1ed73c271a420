import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from varfrac.expr import (
    FUNCTIONS,
    BinOp,
    Call,
    EvalError,
    Expression,
    ExprSyntaxError,
    Neg,
    Num,
    Var,
    evaluate,
    free_variables,
    parse,
    to_source,
)


def ev(source, **env):
    return evaluate(parse(source), env)


@pytest.mark.parametrize(
    "source, env, value",
    [
        ("2 - t^2/2", {"t": 1.0}, 1.5),
        ("1", {}, 1.0),
        ("1 - 0.5*exp(-t)", {"t": 0.0}, 0.5),
        ("gamma(4 - sin(t))", {"t": 0.0}, 6.0),
        ("0.25*(1 + cos(t)^2)", {"t": 0.0}, 0.5),
        ("-0.1*exp(-0.2*t)", {"t": 0.0}, -0.1),
    ],
)
def test_examples(source, env, value):
    assert ev(source, **env) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize(
    "source, value",
    [
        ("2+3*4^2", 50.0),
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("2^-1", 0.5),
        ("8/4/2", 1.0),
        ("10-4-3", 3.0),
        ("--3", 3.0),
        ("2*-3", -6.0),
        ("(1+2)*3", 9.0),
        ("1.5e2 + .5 + 3.", 153.5),
    ],
)
def test_precedence_and_associativity(source, value):
    assert ev(source) == value


def test_parse_tree_shape():
    assert parse("-2^2") == Neg(BinOp("^", Num(2.0), Num(2.0)))
    assert parse("a - b - c") == BinOp("-", BinOp("-", Var("a"), Var("b")), Var("c"))
    assert parse("gammainc_upper(1 - a, t)") == Call("gammainc_upper", (BinOp("-", Num(1.0), Var("a")), Var("t")))


def test_builtin_functions():
    t = 0.3
    for name, fn in [("sin", math.sin), ("cos", math.cos), ("exp", math.exp), ("ln", math.log), ("sqrt", math.sqrt)]:
        assert ev(f"{name}(t)", t=t) == pytest.approx(fn(t), rel=1e-15)
    assert ev("abs(-t)", t=t) == t
    assert ev("floor(2.7) + ceil(2.1)") == 5.0
    assert ev("gamma(0.5)^2") == pytest.approx(math.pi, rel=1e-14)
    assert ev("gammainc_upper(1, 2)") == pytest.approx(math.exp(-2), rel=1e-14)


@pytest.mark.parametrize(
    "source, line, column",
    [
        ("1 +", 1, 4),
        ("(1 + 2", 1, 7),
        ("1 + * 2", 1, 5),
        ("2 $ 3", 1, 3),
        ("t\n+ )", 2, 3),
        ("sin t", 1, 1),
        ("1 2", 1, 3),
    ],
)
def test_syntax_errors_carry_position(source, line, column):
    with pytest.raises(ExprSyntaxError) as info:
        parse(source)
    assert (info.value.line, info.value.column) == (line, column)
    assert f"line {line}, column {column}" in str(info.value)


def test_unknown_identifier_and_function():
    with pytest.raises(ExprSyntaxError, match="unknown identifier 'z'"):
        parse("t + z", variables={"t", "y"})
    with pytest.raises(ExprSyntaxError, match="unknown function 'tan'"):
        parse("tan(t)")
    with pytest.raises(ExprSyntaxError, match="without arguments"):
        parse("sin + 1")


@pytest.mark.parametrize("source", ["sin(1, 2)", "gammainc_upper(1)", "exp(1, 2, 3)"])
def test_arity_mismatch(source):
    with pytest.raises(ExprSyntaxError, match="argument"):
        parse(source)


@pytest.mark.parametrize(
    "source",
    ["gamma(0)", "gamma(-1.5)", "ln(0)", "ln(-1)", "1/0", "sqrt(-1)", "(-8)^(1/3)", "0^-1", "exp(1000)", "t"],
)
def test_domain_errors(source):
    with pytest.raises(EvalError):
        ev(source)


def test_domain_error_on_arrays():
    with pytest.raises(EvalError, match="-0.5"):
        ev("ln(t)", t=np.array([1.0, -0.5, 2.0]))


def test_vectorized_evaluation():
    ts = np.linspace(0.1, 1, 7)
    assert_allclose(ev("t^2 + gamma(1 + t)", t=ts), ts**2 + [math.gamma(1 + v) for v in ts], rtol=1e-14)


def test_free_variables():
    assert free_variables(parse("y^2 + sin(d1) * t + 3")) == {"y", "d1", "t"}


def test_expression_wrapper():
    alpha = Expression("1 - 0.5*exp(-t)")
    assert alpha(0.0) == 0.5
    assert alpha(t=0.0) == 0.5
    assert Expression("y + d1")({"y": 1.0, "d1": 2.0}) == 3.0
    with pytest.raises(TypeError):
        alpha(0.0, 1.0)
    with pytest.raises(ExprSyntaxError):
        Expression("q", variables=frozenset({"t"}))


_NAMES = ["t", "y", "d1", "z"]
_UNARY = [name for name, (arity, _) in FUNCTIONS.items() if arity == 1]


def _random_expr(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            kind = rng.integers(3)
            value = [float(rng.integers(0, 10)), float(rng.uniform(0, 5)), float(10.0 ** rng.uniform(-8, 8))][kind]
            return Num(value)
        return Var(_NAMES[rng.integers(len(_NAMES))])
    r = rng.random()
    if r < 0.15:
        return Neg(_random_expr(rng, depth - 1))
    if r < 0.7:
        op = "+-*/^"[rng.integers(5)]
        return BinOp(op, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if r < 0.95:
        return Call(_UNARY[rng.integers(len(_UNARY))], (_random_expr(rng, depth - 1),))
    return Call("gammainc_upper", (_random_expr(rng, depth - 1), _random_expr(rng, depth - 1)))


def _outcome(e, env):
    try:
        return ("ok", evaluate(e, env))
    except EvalError as exc:
        return ("error", str(exc))


def test_fuzz_print_parse_round_trip():
    rng = np.random.default_rng(2024)
    env = {"t": 0.37, "y": -1.25, "d1": 2.5, "z": 0.0}
    evaluated = 0
    for _ in range(10_000):
        e = _random_expr(rng, int(rng.integers(1, 7)))
        text = to_source(e)
        e2 = parse(text)
        assert e2 == e
        assert to_source(e2) == text
        before, after = _outcome(e, env), _outcome(e2, env)
        if before[0] == "ok":
            evaluated += 1
            assert after[0] == "ok" and before[1] == after[1]  # bit-for-bit
        else:
            assert after == before
    assert evaluated > 2_000

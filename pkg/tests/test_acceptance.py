"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are collected in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np

from varfrac.basis import bernoulli_basis
from varfrac.operators import caputo_oracle, operational_matrix
from varfrac.problems import EXAMPLES, get_example
from varfrac.solver import l2_error, solve
from varfrac.special import gamma


def _table_errors(name, degrees):
    pf = get_example(name)
    table = EXAMPLES[name].table
    pts = np.array(table.points)
    return {M: np.abs(solve(pf.problem, M)(pts) - pf.exact(pts)) for M in degrees}, table


def _fmt(values):
    return "[" + ", ".join(f"{v:.2e}" for v in values) + "]"


def test_criterion_1_example1_exact(acceptance_report):
    pf = get_example("example1")
    start = time.perf_counter()
    sol = solve(pf.problem, 1)
    ts = np.linspace(0, 1, 100)
    linf = float(np.max(np.abs(sol(ts) - (2 - ts**2 / 2))))
    elapsed = time.perf_counter() - start
    coef_err = float(np.max(np.abs(sol.A - [-1.0, 0.0])))
    ok = coef_err <= 1e-9 and linf <= 1e-9 and elapsed < 1.0
    acceptance_report(1, ok, f"A err {coef_err:.1e} (<=1e-9), Linf {linf:.1e} (<=1e-9), {elapsed:.3f}s (<1s)")
    assert ok


def test_criterion_2_example3_exact(acceptance_report):
    pf = get_example("example3")
    start = time.perf_counter()
    sol = solve(pf.problem, 2)
    ts = np.linspace(0, 1, 100)
    linf = float(np.max(np.abs(sol(ts) - (ts**3 + ts**2))))
    elapsed = time.perf_counter() - start
    coef_err = float(np.max(np.abs(sol.A - [2.0, 5.0, 3.0])))
    ok = coef_err <= 1e-8 and linf <= 1e-8 and elapsed < 1.0
    acceptance_report(2, ok, f"A err {coef_err:.1e} (<=1e-8), Linf {linf:.1e}, {elapsed:.3f}s (<1s)")
    assert ok


def test_criterion_3_example4_low_degree(acceptance_report):
    pf = get_example("example4")
    sol = solve(pf.problem, 1)
    coef_err = float(np.max(np.abs(sol.A - [-0.620328, 0.621053])))
    l2 = l2_error(sol, pf.exact)
    ok = coef_err <= 5e-6 and abs(l2 - 6.29e-3) <= 1e-5
    acceptance_report(3, ok, f"A = {sol.A[0]:.6f}, {sol.A[1]:.6f} (err {coef_err:.1e}), L2 = {l2:.4e} (6.29e-3 +- 1e-5)")
    assert ok


def test_criterion_4_example2_errors(acceptance_report):
    start = time.perf_counter()
    errors, table = _table_errors("example2", (2, 6, 10))
    elapsed = time.perf_counter() - start
    worst = 0.0
    for M, got in errors.items():
        ref = np.array(table.columns[f"M={M}"])
        worst = max(worst, float(np.max(np.abs(got / ref - 1))))
    ok = worst <= 0.25 and elapsed < 30.0
    acceptance_report(4, ok, f"worst relative deviation {worst:.3f} (<=0.25), {elapsed:.2f}s (<30s)")
    assert ok


def _order_check(number, name, acceptance_report):
    errors, table = _table_errors(name, (6, 8, 10))
    problems = []
    for M, got in errors.items():
        ref = np.array(table.columns[f"M={M}"])
        decades = np.abs(np.log10(got / ref))
        if np.any(decades > 1.0):
            problems.append(f"M={M} ours {_fmt(got)} vs {_fmt(ref)}")
        if M == 6 and np.any(np.abs(got / ref - 1) > 0.5):
            problems.append(f"M=6 outside +-50%: ours {_fmt(got)} vs {_fmt(ref)}")
    detail = "; ".join(problems) if problems else "all columns within one decade, M=6 within +-50%"
    acceptance_report(number, not problems, detail)
    assert not problems, detail


def test_criterion_5_example4_errors(acceptance_report):
    _order_check(5, "example4", acceptance_report)


def test_criterion_6_example5_errors(acceptance_report):
    _order_check(6, "example5", acceptance_report)


def test_criterion_7_operational_matrix(acceptance_report):
    rng = np.random.default_rng(7)
    tri = 0.0
    for _ in range(200):
        M = int(rng.integers(0, 11))
        P = operational_matrix(bernoulli_basis(M), rng.uniform(1e-3, 2.0), rng.uniform(1e-3, 1.0)).P
        tri = max(tri, float(np.max(np.abs(np.triu(P, 1)), initial=0.0)))
    qq = max(float(np.max(np.abs(bernoulli_basis(M).Q @ bernoulli_basis(M).Qinv - np.eye(M + 1)))) for M in range(13))
    spec = bernoulli_basis(2)
    p1 = 0.0
    for t in rng.uniform(0.01, 1.0, 20):
        want = np.array([[t, 0, 0], [-t / 4, t / 2, 0], [t / 36, -t / 6, t / 3]])
        p1 = max(p1, float(np.max(np.abs(operational_matrix(spec, 1.0, t).P - want))))
    sym = 0.0
    for a, t in zip(rng.uniform(0.05, 2.0, 50), rng.uniform(0.01, 1.0, 50)):
        P = operational_matrix(spec, a, t).P
        s0, s1, s2 = (math.factorial(k) / math.gamma(k + 1 + a) * t**a for k in range(3))
        want = np.array([[s0, 0, 0], [(s1 - s0) / 2, s1, 0], [s0 / 6 - s1 / 2 + s2 / 3, s2 - s1, s2]])
        sym = max(sym, float(np.max(np.abs(P - want))))
    ok = max(tri, qq, p1, sym) <= 1e-10
    acceptance_report(
        7, ok, f"upper triangle {tri:.1e}, Q Qinv - I {qq:.1e}, P_t^1 {p1:.1e}, M=2 entries {sym:.1e} (all <=1e-10)"
    )
    assert ok


def _power(nu):
    def f(s, k):
        c = 1.0
        for j in range(k):
            c *= nu - j
        return c * s ** (nu - k) if c != 0.0 else 0.0

    return f


def _oracle_residual(name, M):
    p = get_example(name).problem
    sol = solve(p, M)

    def f(s, k):
        return sol.derivative(s, k)

    worst = 0.0
    for t in 0.05 + 0.1 * np.arange(10):
        env = {"t": t, "y": sol(t)}
        for j, o in enumerate(p.term_orders, start=1):
            env[f"d{j}"] = caputo_oracle(f, o, t)
        for key, theta in p.deformed_args.items():
            env[key] = sol(float(theta(t)))
        worst = max(worst, abs(caputo_oracle(f, p.alpha, t) - float(p.rhs(env))))
    return worst


def test_criterion_8_oracle_consistency(acceptance_report):
    rng = np.random.default_rng(8)
    power_err = 0.0
    for nu in (1.0, 2.0, 3.5):
        top = min(nu, 2.0)
        for _ in range(20):
            a = rng.uniform(0.05, top - 0.05)
            b = rng.uniform(-1, 1) * min(a - 0.01, top - a - 0.01)
            alpha = lambda t, a=a, b=b: a + b * math.sin(3 * t)  # noqa: E731
            t = rng.uniform(0.05, 1.0)
            al = alpha(t)
            want = gamma(nu + 1) / gamma(nu + 1 - al) * t ** (nu - al)
            power_err = max(power_err, abs(caputo_oracle(_power(nu), alpha, t) - want))
    # each example at its largest registered degree
    residuals = {name: _oracle_residual(name, max(get_example(name).M)) for name in EXAMPLES}
    ok = power_err <= 1e-8 and all(r <= 1e-4 for r in residuals.values())
    res = ", ".join(f"{k} {v:.1e}" for k, v in residuals.items())
    acceptance_report(8, ok, f"power rule {power_err:.1e} (<=1e-8); off-grid residuals {res} (<=1e-4)")
    assert ok


def test_criterion_9_convergence_trend(acceptance_report):
    degrees = (2, 4, 6, 8, 10)
    ex2, ex5 = get_example("example2"), get_example("example5")
    e2 = [l2_error(solve(ex2.problem, M), ex2.exact) for M in degrees]
    e5 = [l2_error(solve(ex5.problem, M), ex5.exact) for M in degrees]
    decreasing = all(b < a for a, b in zip(e2, e2[1:]))
    ratios = [b / a for a, b in zip(e5, e5[1:])]
    # geometric decay pinned as: every step of 2 in M cuts the error at least tenfold
    geometric = all(r <= 0.1 for r in ratios)
    ok = decreasing and geometric
    acceptance_report(
        9, ok, f"example2 L2 {_fmt(e2)} strictly decreasing; example5 step ratios {_fmt(ratios)} (each <=0.1)"
    )
    assert ok


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

"""Collocation solver for multiterm variable-order fractional IVPs.

The problem is

    D^alpha(t) y(t) = F(t, y(t), D^alpha_1(t) y(t), ..., D^alpha_k(t) y(t), y(theta(t)), ...)

on ``0 < t <= 1`` with ``y^(i)(0) = y0[i]`` for ``i < n``. The unknown is
the coefficient vector ``A`` of ``y^(n)(t) = A @ B(t)``; ``y`` and every
Caputo derivative of it are then affine in ``A`` through operational
matrices, and the equation is collocated at ``t_j = (j + 1) / (M + 2)``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

import numpy as np
from scipy import integrate

from .basis import BasisSpec, basis_vector, bernoulli_basis
from .operators import (
    INTEGER_ORDER_TOL,
    Order,
    OrderFunction,
    ceil_order,
    operational_matrix,
    order_value,
)
from .special import gamma

__all__ = [
    "ConvergenceError",
    "FdeProblem",
    "RhsEvaluationError",
    "SingularJacobianError",
    "SolverError",
    "SpectralSolution",
    "assemble_residual",
    "collocation_points",
    "eval_caputo_of_solution",
    "eval_solution",
    "l2_error",
    "solve",
    "theorem1_bound",
    "theorem2_bound",
]

_RESERVED = {"t", "y"}
_ORDER_CHECK_POINTS = 1000


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    """Newton did not reach the tolerance; ``solution`` holds the last iterate."""

    def __init__(self, message: str, solution: SpectralSolution | None = None) -> None:
        super().__init__(message)
        self.solution = solution


class SingularJacobianError(SolverError):
    def __init__(self, message: str, iteration: int) -> None:
        super().__init__(message)
        self.iteration = iteration


class RhsEvaluationError(SolverError):
    def __init__(self, message: str, t: float) -> None:
        super().__init__(message)
        self.t = t


def term_name(j: int) -> str:
    """Variable name bound to the ``j``-th (1-based) term derivative inside ``F``."""
    return f"d{j}"


@dataclass(frozen=True, eq=False)
class FdeProblem:
    """Data of a multiterm variable-order fractional initial value problem.

    ``rhs`` receives a mapping with keys ``t``, ``y``, ``d1 .. dk`` (the
    Caputo derivatives of orders ``term_orders``) and one key per entry of
    ``deformed_args`` holding ``y(theta(t))``. Values may be numpy arrays
    (one entry per collocation point), so ``rhs`` should be elementwise.
    """

    alpha: OrderFunction
    rhs: Callable[[Mapping[str, Any]], Any]
    initial_values: Sequence[float]
    term_orders: Sequence[OrderFunction] = ()
    deformed_args: Mapping[str, Callable[[float], float]] = field(default_factory=dict)
    name: str = ""
    exact: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "initial_values", tuple(float(v) for v in self.initial_values))
        object.__setattr__(self, "term_orders", tuple(self.term_orders))
        object.__setattr__(self, "deformed_args", MappingProxyType(dict(self.deformed_args)))
        if not isinstance(self.alpha, OrderFunction):
            raise TypeError("alpha must be an OrderFunction")
        if len(self.initial_values) != self.n:
            raise ValueError(
                f"initial_values: expected n = {self.n} values for max ceil(alpha) = {self.n}, "
                f"got {len(self.initial_values)}"
            )

        ts = np.arange(1, _ORDER_CHECK_POINTS + 1) / _ORDER_CHECK_POINTS
        chain = [*self.term_orders, self.alpha]
        samples = [np.array([order_value(o, t) for t in ts]) for o in chain]
        for j in range(len(chain) - 1):
            bad = samples[j] >= samples[j + 1]
            if np.any(bad):
                t_bad = ts[bad][0]
                upper = "alpha" if j + 1 == len(chain) - 1 else f"term_orders[{j + 1}]"
                raise ValueError(
                    f"term_orders[{j}]: orders must increase strictly up to alpha; "
                    f"fails against {upper} at t={t_bad:g}"
                )

        names = {term_name(j + 1) for j in range(len(self.term_orders))} | _RESERVED
        for key, theta in self.deformed_args.items():
            if key in names:
                raise ValueError(f"deformed_args: name {key!r} clashes with a reserved variable")
            vals = np.array([float(theta(t)) for t in ts])
            if not np.all(np.isfinite(vals)) or vals.min() < 0.0 or vals.max() > 1.0:
                raise ValueError(f"deformed_args[{key!r}]: theta(t) must map (0, 1] into [0, 1]")

    @property
    def n(self) -> int:
        return self.alpha.n_bound


def collocation_points(M: int) -> np.ndarray:
    """``t_j = (j + 1) / (M + 2)`` for ``j = 0 .. M``."""
    return np.arange(1, M + 2) / (M + 2)


def _snap(a: float) -> float:
    r = round(a)
    return float(r) if abs(a - r) <= INTEGER_ORDER_TOL else a


def _caputo_pieces(spec: BasisSpec, y0: Sequence[float], a: float, t: float) -> tuple[np.ndarray, float]:
    """Affine form ``(v, c)`` of the order-``a`` Caputo derivative: ``v @ A + c``."""
    n = len(y0)
    a = _snap(a)
    v = operational_matrix(spec, n - a, t).P @ basis_vector(spec, t)
    c = 0.0
    for i in range(ceil_order(a), n):
        c += y0[i] * t ** (i - a) / gamma(i + 1 - a)
    return v, c


def _value_pieces(spec: BasisSpec, y0: Sequence[float], t: float) -> tuple[np.ndarray, float]:
    n = len(y0)
    v = operational_matrix(spec, n, t).P @ basis_vector(spec, t)
    c = sum(y0[i] * t**i / math.factorial(i) for i in range(n))
    return v, c


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Converged coefficients ``A`` with ``y^(n)(t) = A @ B(t)``."""

    A: np.ndarray
    problem: FdeProblem
    spec: BasisSpec
    iterations: int = 0
    residual_norm: float = 0.0
    converged: bool = True

    @property
    def M(self) -> int:
        return self.spec.M

    def __call__(self, t):
        return eval_solution(self, t)

    def derivative(self, t: float, k: int) -> float:
        """``k``-th classical derivative of the reconstruction, ``0 <= k <= n``."""
        return eval_caputo_of_solution(self, float(k), t)


def eval_solution(sol: SpectralSolution, t):
    """``y(t) = A @ P_t^n B(t) + sum_i y0[i] t^i / i!``; accepts arrays."""
    if np.ndim(t):
        return np.array([eval_solution(sol, float(s)) for s in np.ravel(t)]).reshape(np.shape(t))
    v, c = _value_pieces(sol.spec, sol.problem.initial_values, float(t))
    return float(sol.A @ v + c)


def eval_caputo_of_solution(sol: SpectralSolution, order: Order, t: float) -> float:
    """Caputo derivative of the reconstruction of order ``order(t) <= n`` at ``t``.

    Order zero gives back :func:`eval_solution`.
    """
    a = order_value(order, t)
    n = sol.problem.n
    if a < 0 or a > n + INTEGER_ORDER_TOL:
        raise ValueError(f"order {a!r} at t={t!r} is outside [0, n={n}]")
    v, c = _caputo_pieces(sol.spec, sol.problem.initial_values, a, float(t))
    return float(sol.A @ v + c)


@dataclass(frozen=True)
class _Affine:
    """Stacked affine maps ``V @ A + c`` over the collocation points."""

    V: np.ndarray
    c: np.ndarray

    def __call__(self, A: np.ndarray) -> np.ndarray:
        return self.V @ A + self.c


def _stack(pieces: list[tuple[np.ndarray, float]]) -> _Affine:
    return _Affine(np.array([v for v, _ in pieces]), np.array([c for _, c in pieces]))


class _System:
    """Collocation system with every operational-matrix product precomputed.

    None of the affine maps depend on ``A``, so they are built once per
    solve and reused by every residual and Jacobian evaluation.
    """

    def __init__(self, problem: FdeProblem, spec: BasisSpec) -> None:
        self.problem = problem
        self.ts = ts = collocation_points(spec.M)
        y0 = problem.initial_values
        self.lhs = _stack([_caputo_pieces(spec, y0, order_value(problem.alpha, t), t) for t in ts])
        # arguments of F, in the order they are bound in its environment
        self.args: dict[str, _Affine] = {"y": _stack([_value_pieces(spec, y0, t) for t in ts])}
        for j, o in enumerate(problem.term_orders, start=1):
            self.args[term_name(j)] = _stack([_caputo_pieces(spec, y0, order_value(o, t), t) for t in ts])
        for key, theta in problem.deformed_args.items():
            self.args[key] = _stack([_value_pieces(spec, y0, float(theta(t))) for t in ts])

    def arg_values(self, A: np.ndarray) -> dict[str, np.ndarray]:
        return {k: aff(A) for k, aff in self.args.items()}

    def rhs(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        m = len(self.ts)
        try:
            out = np.asarray(self.problem.rhs({"t": self.ts, **values}), dtype=float)
            if out.ndim == 0:
                out = np.full(m, float(out))
            if out.shape == (m,) and np.all(np.isfinite(out)):
                return out
        except Exception:
            pass
        # evaluate one collocation point at a time to name the offending t_j
        out = np.empty(m)
        for j in range(m):
            t_j = float(self.ts[j])
            env = {"t": t_j, **{k: float(v[j]) for k, v in values.items()}}
            try:
                val = float(np.asarray(self.problem.rhs(env), dtype=float))
            except Exception as exc:
                raise RhsEvaluationError(f"rhs evaluation failed at t={t_j:g}: {exc}", t_j) from exc
            if not math.isfinite(val):
                raise RhsEvaluationError(f"rhs is not finite at t={t_j:g}", t_j)
            out[j] = val
        return out

    def residual(self, A: np.ndarray) -> np.ndarray:
        return self.lhs(A) - self.rhs(self.arg_values(A))

    def jacobian(self, A: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Chain-rule Jacobian; only the partials of ``F`` are differenced.

        ``F`` acts pointwise on its scalar arguments, so one perturbed call
        per argument yields that partial at every collocation point.
        """
        values = self.arg_values(A)
        f0 = self.rhs(values)
        J = self.lhs.V.copy()
        for key, aff in self.args.items():
            v = values[key]
            h = _SQRT_EPS * np.maximum(1.0, np.abs(v))
            vh = v + h
            h = vh - v
            dF = (self.rhs({**values, key: vh}) - f0) / h
            J -= dF[:, None] * aff.V
        return J


_SQRT_EPS = math.sqrt(np.finfo(float).eps)
_STEP_STOP_FACTOR = 1e4
_STALL_ITERATIONS = 3


def assemble_residual(problem: FdeProblem, spec: BasisSpec, A) -> np.ndarray:
    """Collocation residual (derivative side minus ``F``) at the ``M + 1`` points."""
    A = np.asarray(A, dtype=float)
    if A.shape != (spec.size,):
        raise ValueError(f"A must have length {spec.size}, got shape {A.shape}")
    return _System(problem, spec).residual(A)


def _fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    """Forward differences in coefficient space, step ``sqrt(eps) * max(1, |x_i|)``."""
    J = np.empty((fx.size, x.size))
    for i in range(x.size):
        xh = x.copy()
        xh[i] += _SQRT_EPS * max(1.0, abs(x[i]))
        J[:, i] = (fun(xh) - fx) / (xh[i] - x[i])
    return J


def _newton(fun, jac, x0: np.ndarray, tol: float, max_iter: int, damped: bool):
    x = x0.astype(float).copy()
    r = fun(x)
    rnorm = float(np.max(np.abs(r)))
    best = (x, rnorm)
    stalled = 0
    for it in range(1, max_iter + 1):
        if rnorm <= tol:
            return x, rnorm, it - 1, True
        J = jac(x, r)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1.0 / np.finfo(float).eps:
            raise SingularJacobianError(f"singular Jacobian at Newton iteration {it}", it)
        delta = np.linalg.solve(J, -r)
        step = 1.0
        x_new = x + delta
        r_new = fun(x_new)
        if damped:
            while not float(np.max(np.abs(r_new))) <= (1.0 - 1e-4 * step) * rnorm and step > 2.0**-20:
                step *= 0.5
                x_new = x + step * delta
                r_new = fun(x_new)
        x, r = x_new, r_new
        rnorm = float(np.max(np.abs(r)))
        if not math.isfinite(rnorm):
            raise ConvergenceError(f"residual became non-finite at Newton iteration {it}")
        tiny_step = np.max(np.abs(step * delta)) <= 1e-14 * max(1.0, float(np.max(np.abs(x))))
        # a vanishing step only counts as convergence near the rounding floor of the residual
        if rnorm <= tol or (tiny_step and rnorm <= _STEP_STOP_FACTOR * tol):
            x, rnorm, extra = _polish(fun, jac, x, r, rnorm)
            return x, rnorm, it + extra, True
        # Stagnation at the rounding floor (large M): stop once the best
        # residual is near tol and has not halved for a few iterations.
        if rnorm < 0.5 * best[1]:
            stalled = 0
        else:
            stalled += 1
        if rnorm < best[1]:
            best = (x, rnorm)
        if stalled >= _STALL_ITERATIONS and best[1] <= _STEP_STOP_FACTOR * tol:
            return best[0], best[1], it, True
    return x, rnorm, max_iter, False


def _polish(fun, jac, x: np.ndarray, r: np.ndarray, rnorm: float, max_steps: int = 3):
    # The first iterate under tol can still sit well above the rounding
    # floor; keep stepping while each step cuts the residual tenfold.
    steps = 0
    while steps < max_steps and rnorm > 0.0:
        try:
            x_new = x + np.linalg.solve(jac(x, r), -r)
        except np.linalg.LinAlgError:
            break
        r_new = fun(x_new)
        rn = float(np.max(np.abs(r_new)))
        if not rn <= 0.1 * rnorm:
            break
        x, r, rnorm = x_new, r_new, rn
        steps += 1
    return x, rnorm, steps


def solve(
    problem: FdeProblem,
    M: int,
    *,
    tol: float = 1e-12,
    max_iter: int = 100,
    initial_guess: Sequence[float] | None = None,
    jacobian: str = "chain",
) -> SpectralSolution:
    """Solve the collocation system for ``A`` by Newton's method.

    ``jacobian="chain"`` (default) differences only ``F`` with respect to its
    scalar arguments and applies the exact affine maps; ``"coefficients"``
    differences the whole residual in each coefficient. Convergence is
    declared when the max-norm residual drops below ``tol``, or when the
    Newton step falls below ``1e-14`` relative to ``A`` while the residual
    is within ``1e4 * tol``, or when the residual has stagnated at that level
    for three iterations (the rounding floor at large ``M``; the best
    iterate is returned and ``residual_norm`` reports its residual). If plain Newton from the
    initial guess (zeros by default) fails, a damped Newton with
    backtracking is retried from zero before giving up.
    """
    spec = bernoulli_basis(M)
    system = _System(problem, spec)
    fun = system.residual
    if jacobian == "chain":
        jac = system.jacobian
    elif jacobian == "coefficients":
        def jac(x, r):
            return _fd_jacobian(fun, x, r)
    else:
        raise ValueError(f"unknown jacobian mode {jacobian!r}")

    x0 = np.zeros(spec.size) if initial_guess is None else np.asarray(initial_guess, dtype=float)
    try:
        x, rnorm, its, ok = _newton(fun, jac, x0, tol, max_iter, damped=False)
    except (SingularJacobianError, ConvergenceError):
        ok = False
    if not ok:
        x, rnorm, its, ok = _newton(fun, jac, np.zeros(spec.size), tol, max_iter, damped=True)
    sol = SpectralSolution(A=x, problem=problem, spec=spec, iterations=its, residual_norm=rnorm, converged=ok)
    if not ok:
        raise ConvergenceError(
            f"Newton did not converge in {max_iter} iterations (final residual {rnorm:.3e})", sol
        )
    return sol


def theorem1_bound(M: int, kappa: float) -> float:
    """Projection error bound ``kappa / (2^(2M+1) (M+1)!)``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return kappa / (2.0 ** (2 * M + 1) * math.factorial(M + 1))


def theorem2_bound(M: int, n: int, kappa: float) -> float:
    """Solution error bound: the projection bound scaled by ``||I^n||_2 <= 1/((n-1)! sqrt(2n(2n-1)))``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return theorem1_bound(M, kappa) / (math.factorial(n - 1) * math.sqrt(2 * n * (2 * n - 1)))


def l2_error(sol: SpectralSolution, exact: Callable[[float], float], *, tol: float = 1e-12) -> float:
    """``||y_M - exact||_2`` on [0, 1] by adaptive quadrature."""
    val, _ = integrate.quad(
        lambda t: (eval_solution(sol, t) - float(exact(t))) ** 2, 0.0, 1.0, epsabs=tol**2, epsrel=tol, limit=200
    )
    return math.sqrt(max(val, 0.0))

"""Bernoulli polynomial basis on [0, 1].

The basis vector is ``B(t) = Q T(t)`` with ``T(t) = [1, t, ..., t^M]``;
row ``m`` of ``Q`` holds the monomial coefficients of ``beta_m``. Both
``Q`` and its inverse are built in exact rational arithmetic and rounded
to float once.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .special import bernoulli_numbers, binomial

__all__ = [
    "MAX_DEGREE",
    "BasisSpec",
    "basis_vector",
    "bernoulli_basis",
    "eval_poly",
    "gram_matrix",
    "project",
]

MAX_DEGREE = 30


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Bernoulli basis of degree ``M`` (``M + 1`` functions)."""

    M: int
    #: exact Bernoulli numbers ``b_0 .. b_M``
    bern: tuple[Fraction, ...]
    #: unit lower-triangular change of basis, ``B(t) = Q T(t)``
    Q: np.ndarray
    Qinv: np.ndarray

    @property
    def size(self) -> int:
        return self.M + 1


@lru_cache(maxsize=None)
def bernoulli_basis(M: int) -> BasisSpec:
    """Build (and cache) the basis of degree ``M``, ``0 <= M <= 30``."""
    if not isinstance(M, (int, np.integer)) or M < 0:
        raise ValueError(f"basis degree must be a non-negative integer, got {M!r}")
    if M > MAX_DEGREE:
        raise ValueError(
            f"basis degree {M} exceeds the supported maximum {MAX_DEGREE}; "
            "the monomial change of basis is too ill-conditioned beyond that"
        )
    M = int(M)
    bern = bernoulli_numbers(M)
    q = [[Fraction(0)] * (M + 1) for _ in range(M + 1)]
    for m in range(M + 1):
        for i in range(m + 1):
            q[m][i] = binomial(m, i) * bern[m - i]

    # forward substitution on the unit lower-triangular Q, column by column
    qinv = [[Fraction(0)] * (M + 1) for _ in range(M + 1)]
    for j in range(M + 1):
        qinv[j][j] = Fraction(1)
        for i in range(j + 1, M + 1):
            qinv[i][j] = -sum(q[i][k] * qinv[k][j] for k in range(j, i))

    return BasisSpec(
        M=M,
        bern=bern,
        Q=_frozen(np.array(q, dtype=float)),
        Qinv=_frozen(np.array(qinv, dtype=float)),
    )


def eval_poly(spec: BasisSpec, m: int, t):
    """Evaluate ``beta_m(t)`` by Horner's rule on row ``m`` of ``Q``."""
    if not 0 <= m <= spec.M:
        raise IndexError(f"polynomial index {m} outside 0..{spec.M}")
    t = np.asarray(t, dtype=float)
    acc = np.zeros_like(t)
    for c in spec.Q[m, m::-1]:
        acc = acc * t + c
    return float(acc) if acc.ndim == 0 else acc


def _taylor(M: int, t: np.ndarray) -> np.ndarray:
    return np.power.outer(t, np.arange(M + 1)).T if t.ndim else t ** np.arange(M + 1)


def basis_vector(spec: BasisSpec, t) -> np.ndarray:
    """``B(t) = [beta_0(t), ..., beta_M(t)]``.

    For array ``t`` the result has shape ``(M + 1, len(t))``.
    """
    t = np.asarray(t, dtype=float)
    return spec.Q @ _taylor(spec.M, t)


@lru_cache(maxsize=None)
def _gram_exact(M: int) -> tuple[tuple[Fraction, ...], ...]:
    b = bernoulli_numbers(2 * M)
    D = [[Fraction(0)] * (M + 1) for _ in range(M + 1)]
    D[0][0] = Fraction(1)
    # integral of beta_j over [0, 1] vanishes for j >= 1, so row/column 0 is e_0
    for i in range(1, M + 1):
        for j in range(1, M + 1):
            sign = -1 if (i - 1) % 2 else 1
            D[i][j] = sign * Fraction(math.factorial(i) * math.factorial(j), math.factorial(i + j)) * b[i + j]
    return tuple(tuple(row) for row in D)


@lru_cache(maxsize=None)
def _legendre_to_bernoulli(M: int) -> np.ndarray:
    """Row ``k``: coefficients of the shifted Legendre polynomial ``P_k(2t - 1)`` in the Bernoulli basis."""
    spec_q = [[binomial(m, i) * b for i, b in enumerate(reversed(bernoulli_numbers(m)))] for m in range(M + 1)]
    # t^j = sum_i qinv[j][i] beta_i(t), by forward substitution on the unit lower-triangular Q
    qinv = [[Fraction(0)] * (M + 1) for _ in range(M + 1)]
    for j in range(M + 1):
        qinv[j][j] = Fraction(1)
        for i in range(j + 1, M + 1):
            qinv[i][j] = -sum(spec_q[i][k] * qinv[k][j] for k in range(j, i))
    rows = []
    for k in range(M + 1):
        mono = [(-1) ** (k + j) * binomial(k, j) * binomial(k + j, j) for j in range(k + 1)]
        rows.append([sum(mono[j] * qinv[j][i] for j in range(k + 1)) for i in range(M + 1)])
    return _frozen(np.array(rows, dtype=float))


def gram_matrix(spec: BasisSpec) -> np.ndarray:
    """Gram matrix ``D[i, j] = <beta_i, beta_j>`` on ``L^2[0, 1]``."""
    return _frozen(np.array(_gram_exact(spec.M), dtype=float))


def project(spec: BasisSpec, f: Callable[[float], float], *, tol: float = 1e-12) -> np.ndarray:
    """Coefficients ``A`` of the ``L^2`` projection of ``f``, so ``f ~ A @ B(t)``.

    Mathematically ``A = D^-1 <f, B>``. Forming that product in floats loses
    up to ``cond(D)`` (about 1e10 at ``M = 8``), so the projection is taken
    onto the orthogonal shifted Legendre polynomials, which span the same
    space, and mapped to Bernoulli coefficients by an exact change of basis.
    The inner products use adaptive quadrature with absolute tolerance ``tol``.
    """
    coeffs = np.empty(spec.size)
    for k in range(spec.size):
        unit = np.zeros(k + 1)
        unit[k] = 1.0

        def integrand(s, unit=unit):
            return f(s) * np.polynomial.legendre.legval(2.0 * s - 1.0, unit)

        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=0.0, limit=200)
        coeffs[k] = (2 * k + 1) * val
    return coeffs @ _legendre_to_bernoulli(spec.M)

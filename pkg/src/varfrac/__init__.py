"""Bernoulli-polynomial collocation for multiterm variable-order fractional IVPs."""

from .basis import BasisSpec, basis_vector, bernoulli_basis, eval_poly, gram_matrix, project
from .expr import EvalError, Expression, ExprSyntaxError, evaluate, parse, to_source
from .operators import (
    OperationalMatrix,
    OrderFunction,
    apply_rl_to_basis,
    caputo_oracle,
    operational_matrix,
    rl_integral_power,
    s_matrix,
)
from .problems import EXAMPLES, SchemaError, get_example, load_problem_file, parse_problem
from .solver import (
    ConvergenceError,
    FdeProblem,
    SingularJacobianError,
    SolverError,
    SpectralSolution,
    assemble_residual,
    collocation_points,
    eval_caputo_of_solution,
    eval_solution,
    l2_error,
    solve,
    theorem1_bound,
    theorem2_bound,
)
from .special import bernoulli_numbers, binomial, gamma, gammainc_upper

__version__ = "0.1.0"

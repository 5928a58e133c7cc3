"""Small dense LMI feasibility / linear-objective SDP engine.

Expressions are affine symmetric-matrix-valued maps of a handful of decision
variables (scalars, rectangular matrices, symmetric matrices), organized as a
list of blocks.  Each block carries a sense:

  "nsd"  -- a goal block, driven to be (strictly) negative definite,
  "psd"  -- a side constraint, required positive semidefinite as written.

Solving is delegated to a conic interior-point solver (CLARABEL via cvxpy);
every instance in scope is tiny and dense.  The same builder callback is
evaluated both with cvxpy variables (to solve) and with plain numpy arrays
(to independently confirm the achieved margin).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import cvxpy as cp
import numpy as np

from .errors import InvalidInputError

__all__ = [
    "VarSpec",
    "LinearMatrixExpr",
    "SdpSolution",
    "feasibility",
    "maximize",
    "schur_embed",
    "s_procedure_embed",
    "bmat",
]

_SOLVER = cp.CLARABEL


def bmat(rows):
    """Block-matrix assembly working for both numpy arrays and cvxpy exprs."""
    has_expr = any(isinstance(b, cp.expressions.expression.Expression)
                   for row in rows for b in row)
    if has_expr:
        return cp.bmat(rows)
    return np.block([[np.atleast_2d(np.asarray(b, dtype=float)) for b in row]
                     for row in rows])


@dataclass(frozen=True)
class VarSpec:
    name: str
    shape: tuple[int, int]
    symmetric: bool = False


@dataclass(frozen=True)
class LinearMatrixExpr:
    """Affine symmetric-matrix-valued map of the decision variables."""

    variables: tuple
    build: Callable[[dict], Sequence]
    senses: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.senses) == 0:
            raise InvalidInputError("expression must have at least one block")
        for s in self.senses:
            if s not in ("nsd", "psd"):
                raise InvalidInputError(f"unknown block sense {s!r}")

    def evaluate(self, assignment: dict) -> list[np.ndarray]:
        """Numeric blocks at a decision-variable assignment."""
        vals = {}
        for spec in self.variables:
            if spec.name not in assignment:
                raise InvalidInputError(f"missing value for variable {spec.name!r}")
            v = np.atleast_2d(np.asarray(assignment[spec.name], dtype=float))
            if v.shape != spec.shape:
                raise InvalidInputError(
                    f"variable {spec.name!r} has shape {v.shape}, want {spec.shape}")
            vals[spec.name] = v
        blocks = self.build(vals)
        return [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]


@dataclass(frozen=True)
class SdpSolution:
    status: str                       # feasible | infeasible-to-tolerance | unbounded | unknown
    values: dict = field(default_factory=dict)
    margin: float = float("nan")      # smallest eigenvalue of -(goal blocks)
    objective: float = float("nan")
    solver_status: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _make_cvxpy_vars(specs) -> dict:
    out = {}
    for spec in specs:
        r, c = spec.shape
        if spec.symmetric:
            if r != c:
                raise InvalidInputError(f"symmetric variable {spec.name!r} must be square")
            out[spec.name] = cp.Variable((r, c), symmetric=True, name=spec.name)
        else:
            out[spec.name] = cp.Variable((r, c), name=spec.name)
    return out


def _eval_margin(expr: LinearMatrixExpr, values: dict) -> float:
    """Independent numeric check: min over goal blocks of -lambda_max(block)."""
    blocks = expr.evaluate(values)
    margins = []
    for blk, sense in zip(blocks, expr.senses):
        if sense == "nsd":
            margins.append(-float(np.max(np.linalg.eigvalsh(0.5 * (blk + blk.T)))))
    return min(margins) if margins else float("inf")


def _extract(values: dict) -> dict:
    return {k: np.atleast_2d(np.asarray(v.value, dtype=float)) for k, v in values.items()
            if v.value is not None}


def feasibility(expr: LinearMatrixExpr, goal: str = "strict-negative",
                margin_cap: float = 1e3) -> SdpSolution:
    """Margin-maximization feasibility for the goal blocks of the expression.

    strict-negative:         feasible iff the best margin is > 0,
    nonpositive-with-slack:  feasible iff the best margin is >= -1e-9.
    """
    if goal not in ("strict-negative", "nonpositive-with-slack"):
        raise InvalidInputError(f"unknown goal {goal!r}")
    cvars = _make_cvxpy_vars(expr.variables)
    blocks = expr.build(cvars)
    if len(blocks) != len(expr.senses):
        raise InvalidInputError("builder returned wrong number of blocks")
    t = cp.Variable(name="margin")
    cons = [t <= margin_cap]
    for blk, sense in zip(blocks, expr.senses):
        if sense == "nsd":
            d = blk.shape[0]
            cons.append(blk << -t * np.eye(d))
        else:
            cons.append(blk >> 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    try:
        prob.solve(solver=_SOLVER)
    except cp.error.SolverError:
        return SdpSolution(status="unknown", solver_status="solver-error")
    if prob.status not in ("optimal", "optimal_inaccurate"):
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return SdpSolution(status="infeasible-to-tolerance",
                               solver_status=prob.status)
        return SdpSolution(status="unknown", solver_status=prob.status)
    values = _extract(cvars)
    if len(values) < len(expr.variables):
        return SdpSolution(status="unknown", solver_status=prob.status)
    margin = _eval_margin(expr, values)
    threshold = 0.0 if goal == "strict-negative" else -1e-9
    status = "feasible" if margin > threshold else "infeasible-to-tolerance"
    return SdpSolution(status=status, values=values, margin=margin,
                       solver_status=prob.status)


def maximize(objective: Callable[[dict], object], expr: LinearMatrixExpr) -> SdpSolution:
    """Maximize a linear objective over the feasible set of the expression.

    Goal ("nsd") blocks are constrained <= 0 and "psd" blocks >= 0.
    """
    cvars = _make_cvxpy_vars(expr.variables)
    blocks = expr.build(cvars)
    cons = []
    for blk, sense in zip(blocks, expr.senses):
        cons.append(blk << 0 if sense == "nsd" else blk >> 0)
    prob = cp.Problem(cp.Maximize(objective(cvars)), cons)
    try:
        prob.solve(solver=_SOLVER)
    except cp.error.SolverError:
        return SdpSolution(status="unknown", solver_status="solver-error")
    if prob.status in ("unbounded", "unbounded_inaccurate"):
        return SdpSolution(status="unbounded", solver_status=prob.status)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return SdpSolution(status="infeasible-to-tolerance",
                               solver_status=prob.status)
        return SdpSolution(status="unknown", solver_status=prob.status)
    values = _extract(cvars)
    return SdpSolution(status="feasible", values=values,
                       margin=_eval_margin(expr, values),
                       objective=float(prob.value), solver_status=prob.status)


def schur_embed(M, N, R_block) -> LinearMatrixExpr:
    """Block form [[M, N], [N', R]]; its positivity is equivalent to
    R > 0 and M - N R^-1 N' > 0."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    R = np.atleast_2d(np.asarray(R_block, dtype=float))
    if M.shape[0] != M.shape[1] or R.shape[0] != R.shape[1]:
        raise InvalidInputError("M and R must be square")
    if N.shape != (M.shape[0], R.shape[0]):
        raise InvalidInputError(
            f"N must be {M.shape[0]} x {R.shape[0]}, got {N.shape}")
    block = np.block([[M, N], [N.T, R]])
    return LinearMatrixExpr(variables=(), build=lambda _vals: [block],
                            senses=("psd",), name="schur")


def s_procedure_embed(Y_block, H, E) -> LinearMatrixExpr:
    """Robust inequality Y + HFE + E'F'H' < 0 for all F'F <= I, as an LMI in
    an auxiliary scalar eps > 0:  [[Y + eps HH', E'], [E, -eps I]] < 0."""
    Y = np.atleast_2d(np.asarray(Y_block, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    ny = Y.shape[0]
    if Y.shape != (ny, ny) or H.shape[0] != ny or E.shape[1] != ny:
        raise InvalidInputError("shapes of Y, H, E are inconsistent")
    j = E.shape[0]

    def build(vals):
        eps = vals["eps"][0, 0]
        main = bmat([[Y + eps * (H @ H.T), E.T],
                     [E, -eps * np.eye(j)]])
        return [main, vals["eps"]]

    return LinearMatrixExpr(
        variables=(VarSpec("eps", (1, 1)),),
        build=build, senses=("nsd", "psd"), name="s-procedure")

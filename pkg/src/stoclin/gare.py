"""Generalized algebraic Riccati equation: solving, classification, comparison.

The equation is

    PA + A'P + C'PC + Q - (PB + C'PD)(R + D'PD)^-1 (B'P + D'PC) = 0,
    R + D'PD > 0,

solved for its maximal solution by trace maximization over the associated
block LMI followed by damped Newton refinement on the residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .lift import SystemQuad, build_closed_loop_operator, build_drift_operator, smat, svec
from .lmi import LinearMatrixExpr, VarSpec, bmat, maximize
from .spectra import TOL_MARGIN, is_weakly_stable, spectral_abscissa
from .stabilizability import is_stabilizable

__all__ = [
    "GareProblem",
    "GareSolution",
    "gare_residual",
    "solve_gare_maximal",
    "classify_solution",
    "epsilon_homotopy_strong",
    "compare_gare",
    "DEFAULT_EPS_SCHEDULE",
]

DEFAULT_EPS_SCHEDULE = tuple(10.0 ** (-k) for k in range(1, 9))


@dataclass(frozen=True)
class GareProblem:
    sys: SystemQuad
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n, m = self.sys.n, self.sys.m
        if Q.shape != (n, n) or np.linalg.norm(Q - Q.T) > 1e-9 * max(1, np.linalg.norm(Q)):
            raise InvalidInputError(f"Q must be symmetric {n} x {n}")
        if R.shape != (m, m) or np.linalg.norm(R - R.T) > 1e-9 * max(1, np.linalg.norm(R)):
            raise InvalidInputError(f"R must be symmetric {m} x {m}")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "R", 0.5 * (R + R.T))

    @property
    def tol_gare(self) -> float:
        return 1e-8 * (1.0 + float(np.linalg.norm(self.Q)))


@dataclass(frozen=True)
class GareSolution:
    P: np.ndarray
    K: np.ndarray
    residual: float
    classification: str
    maximal: bool = False
    abscissa: float = float("nan")


def _gain(prob: GareProblem, P: np.ndarray) -> np.ndarray:
    sys = prob.sys
    W = prob.R + sys.D.T @ P @ sys.D
    S = P @ sys.B + sys.C.T @ P @ sys.D
    return -np.linalg.solve(W, S.T)


def _residual_matrix(prob: GareProblem, P: np.ndarray) -> np.ndarray:
    sys = prob.sys
    W = prob.R + sys.D.T @ P @ sys.D
    w = np.linalg.eigvalsh(0.5 * (W + W.T))
    if np.min(w) <= 1e-12 * (1.0 + np.max(np.abs(w))):
        raise InvalidInputError(
            "R + D'PD is not positive definite at the given P")
    S = P @ sys.B + sys.C.T @ P @ sys.D
    return (P @ sys.A + sys.A.T @ P + sys.C.T @ P @ sys.C + prob.Q
            - S @ np.linalg.solve(W, S.T))


def gare_residual(prob: GareProblem, P) -> float:
    """Frobenius norm of the Riccati residual at P (requires R + D'PD > 0)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    return float(np.linalg.norm(_residual_matrix(prob, P)))


def _newton_refine(prob: GareProblem, P0: np.ndarray, max_iter: int = 50) -> np.ndarray:
    """Damped Newton iteration on the Riccati residual, on svec coordinates."""
    sys = prob.sys
    P = 0.5 * (P0 + P0.T)
    res = _residual_matrix(prob, P)
    rnorm = np.linalg.norm(res)
    for _ in range(max_iter):
        if rnorm <= 1e-14 * (1.0 + np.linalg.norm(prob.Q)):
            break
        K = _gain(prob, P)
        Ac, Cc = sys.closed_loop(K)
        # Frechet derivative of the residual at P is the adjoint closed-loop
        # Lyapunov operator: Delta -> Delta Ac + Ac' Delta + Cc' Delta Cc
        L = build_drift_operator(Ac, [Cc], adjoint=True).M
        rhs = -svec(res, tol_sym=np.inf)
        try:
            step = smat(np.linalg.solve(L, rhs))
        except np.linalg.LinAlgError:
            step = smat(np.linalg.lstsq(L, rhs, rcond=None)[0])
        if not np.all(np.isfinite(step)):
            break
        alpha = 1.0
        improved = False
        for _ in range(30):
            try:
                cand = P + alpha * step
                cres = _residual_matrix(prob, cand)
            except InvalidInputError:
                alpha *= 0.5
                continue
            cnorm = np.linalg.norm(cres)
            if cnorm < rnorm:
                P, res, rnorm = cand, cres, cnorm
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return P


def _gare_lmi_expr(prob: GareProblem, eps_shift: float = 0.0) -> LinearMatrixExpr:
    sys = prob.sys
    n, m = sys.n, sys.m
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    Q = prob.Q + eps_shift * np.eye(n)
    R = prob.R

    def build(vals):
        P = vals["P"]
        top = P @ A + A.T @ P + C.T @ P @ C + Q
        S = P @ B + C.T @ P @ D
        W = R + D.T @ P @ D
        main = bmat([[top, S], [S.T, W]])
        return [main, W - 1e-9 * np.eye(m)]

    return LinearMatrixExpr(variables=(VarSpec("P", (n, n), symmetric=True),),
                            build=build, senses=("psd", "psd"), name="gare")


def solve_gare_maximal(prob: GareProblem, eps_shift: float = 0.0,
                       _skip_precondition: bool = False) -> GareSolution:
    """Maximal solution via SDP trace maximization plus Newton refinement.

    Requires the system to be stabilizable (Theorem-6-type hypothesis); the
    returned solution carries the closed-loop classification.
    """
    if not _skip_precondition:
        report = is_stabilizable(prob.sys)
        if report.decision != "stabilizable":
            raise InvalidInputError(
                f"system is not stabilizable (decision: {report.decision}); "
                "the maximal-solution route does not apply")
    sol = maximize(lambda v: cp.trace(v["P"]), _gare_lmi_expr(prob, eps_shift))
    if sol.status != "feasible":
        raise NumericalFailureError(
            f"GARE trace-maximization SDP returned status {sol.status}")
    P = _newton_refine(prob if eps_shift == 0.0 else
                       GareProblem(sys=prob.sys,
                                   Q=prob.Q + eps_shift * np.eye(prob.sys.n),
                                   R=prob.R),
                       sol.values["P"])
    shifted = (prob if eps_shift == 0.0 else
               GareProblem(sys=prob.sys, Q=prob.Q + eps_shift * np.eye(prob.sys.n),
                           R=prob.R))
    resid = gare_residual(shifted, P)
    if resid > shifted.tol_gare:
        raise NumericalFailureError(
            f"Newton refinement stalled at residual {resid:.3e} "
            f"(tolerance {shifted.tol_gare:.3e})")
    K = _gain(shifted, P)
    cls, a = _classify(shifted, P, K)
    return GareSolution(P=P, K=K, residual=resid, classification=cls,
                        maximal=True, abscissa=a)


def _classify(prob: GareProblem, P: np.ndarray, K: np.ndarray) -> tuple[str, float]:
    L = build_closed_loop_operator(prob.sys, K, variant="adjoint")
    a = spectral_abscissa(L)
    if a < -TOL_MARGIN:
        return "feedback-stabilizing", a
    if a <= TOL_MARGIN:
        if is_weakly_stable(L).weakly_stable:
            return "weakly-stabilizing", a
        return "strong", a
    return "indefinite-class", a


def classify_solution(prob: GareProblem, P) -> str:
    """Classification of a residual-zero solution per the closed-loop lift."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    resid = gare_residual(prob, P)
    if resid > prob.tol_gare:
        raise InvalidInputError(
            f"P is not a solution: residual {resid:.3e} > {prob.tol_gare:.3e}")
    cls, _ = _classify(prob, P, _gain(prob, P))
    return cls


def epsilon_homotopy_strong(prob: GareProblem,
                            eps_schedule=DEFAULT_EPS_SCHEDULE) -> GareSolution:
    """Track the maximal solution of the Q + eps*I family down the schedule;
    the limit is the maximal (strong) solution of the original equation."""
    report = is_stabilizable(prob.sys)
    if report.decision != "stabilizable":
        raise InvalidInputError("system is not stabilizable")
    iterates = []
    prev = None
    for eps in eps_schedule:
        sol = solve_gare_maximal(prob, eps_shift=eps, _skip_precondition=True)
        iterates.append((eps, sol.P))
        prev = sol
    if len(iterates) >= 2:
        d_last = np.linalg.norm(iterates[-1][1] - iterates[-2][1])
        if d_last > 1e-5 * (1.0 + np.linalg.norm(iterates[-1][1])):
            raise NumericalFailureError(
                "epsilon schedule exhausted without Cauchy convergence; "
                f"last step moved {d_last:.3e}; iterates: "
                + ", ".join(f"eps={e:g}" for e, _ in iterates))
    # polish the limit on the unshifted equation
    P = _newton_refine(prob, iterates[-1][1])
    resid = gare_residual(prob, P)
    K = _gain(prob, P)
    cls, a = _classify(prob, P, K)
    return GareSolution(P=P, K=K, residual=resid, classification=cls,
                        maximal=True, abscissa=a)


def compare_gare(prob: GareProblem, prob_hat: GareProblem, P_hat,
                 tol: float = 1e-7) -> dict:
    """Comparison check: with R >= R_hat, Q >= Q_hat and P_hat solving the
    hat equation, the maximal solution of prob dominates P_hat."""
    P_hat = np.atleast_2d(np.asarray(P_hat, dtype=float))
    if not prob.sys.same_data(prob_hat.sys):
        raise InvalidInputError("both problems must share the same system")
    for name, M, M_hat in (("Q", prob.Q, prob_hat.Q), ("R", prob.R, prob_hat.R)):
        w = np.linalg.eigvalsh(M - M_hat)
        if np.min(w) < -1e-9 * (1.0 + np.max(np.abs(w))):
            raise InvalidInputError(f"{name} does not dominate the hat weight")
    r_hat = gare_residual(prob_hat, P_hat)
    if r_hat > prob_hat.tol_gare:
        raise InvalidInputError(
            f"P_hat is not a solution of the hat equation (residual {r_hat:.3e})")
    sol = solve_gare_maximal(prob)
    gap = np.min(np.linalg.eigvalsh(sol.P - P_hat))
    return {"result": "verified" if gap >= -tol else "violated",
            "P_max": sol.P, "min_eig_gap": float(gap)}

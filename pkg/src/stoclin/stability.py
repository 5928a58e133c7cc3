"""Generalized Lyapunov equations PA + A'P + sum_i Ci' P Ci = -Q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .lift import build_drift_operator, smat, svec

__all__ = [
    "GenLyapProblem",
    "SingularReport",
    "solve_gen_lyapunov",
    "classify_lyapunov_solution",
    "sym_sqrt_psd",
]


@dataclass(frozen=True)
class GenLyapProblem:
    A: np.ndarray
    Cs: tuple
    Q: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        Cs = tuple(np.atleast_2d(np.asarray(Ci, dtype=float)) for Ci in self.Cs)
        n = A.shape[0]
        if A.shape != (n, n) or Q.shape != (n, n):
            raise InvalidInputError("A and Q must be square of the same order")
        if np.linalg.norm(Q - Q.T) > 1e-9 * max(1.0, np.linalg.norm(Q)):
            raise InvalidInputError("Q must be symmetric")
        for Ci in Cs:
            if Ci.shape != (n, n):
                raise InvalidInputError("every diffusion matrix must be n x n")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "Cs", Cs)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SingularReport:
    """Returned when the lifted system matrix is rank deficient."""

    null_basis: np.ndarray      # columns are svec coordinates of null matrices
    rank: int
    order: int

    def null_matrices(self) -> list[np.ndarray]:
        return [smat(v) for v in self.null_basis.T]


def solve_gen_lyapunov(prob: GenLyapProblem):
    """Solve the lifted linear system for P; returns P or a SingularReport.

    The residual ||PA + A'P + sum Ci'PCi + Q||_F of a returned solution is
    bounded by 1e-9 * (1 + ||Q||_F) for well-conditioned instances.
    """
    L = build_drift_operator(prob.A, prob.Cs, adjoint=True)
    M = L.M
    rhs = -svec(prob.Q)
    U, s, Vt = np.linalg.svd(M)
    tol_rank = M.shape[0] * np.finfo(float).eps * (s[0] if s.size else 0.0) * 10
    rank = int(np.sum(s > tol_rank))
    if rank < M.shape[0]:
        return SingularReport(null_basis=Vt[rank:].T, rank=rank, order=M.shape[0])
    p = Vt.T @ ((U.T @ rhs) / s)
    return smat(p)


def sym_sqrt_psd(Q, tol_neg: float = 1e-10):
    """Symmetric PSD square root; eigenvalues in (-tol_neg, 0) are clipped."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if np.min(w) < -tol_neg * scale:
        raise InvalidInputError(
            f"matrix is indefinite: min eigenvalue {np.min(w):.3e}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def classify_lyapunov_solution(prob: GenLyapProblem, P) -> str:
    """Interpret a solution P of the Lyapunov-type equation with Q >= 0.

    stability-certificate:      P > 0 and [A, C1, ... | Q^(1/2)] exactly observable
    detectability-conditional:  P >= 0 and [A, C1, ... | Q^(1/2)] stochastically
                                detectable
    inconclusive:               otherwise
    """
    from .observability import OutputSystem, is_exactly_observable, is_stochastically_detectable

    P = np.atleast_2d(np.asarray(P, dtype=float))
    Qh = sym_sqrt_psd(prob.Q)        # raises on indefinite Q
    osys = OutputSystem(A=prob.A, Cs=prob.Cs, Q=Qh)
    w = np.linalg.eigvalsh(0.5 * (P + P.T))
    pd_tol = 1e-9 * (1.0 + np.linalg.norm(P, 2))
    if np.min(w) > pd_tol and is_exactly_observable(osys)["verdict"] == "observable":
        return "stability-certificate"
    if np.min(w) >= -pd_tol and is_stochastically_detectable(osys)["verdict"] == "detectable":
        return "detectability-conditional"
    return "inconclusive"

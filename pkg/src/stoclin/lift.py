"""Symmetric-matrix coordinates and lifted operator construction.

A symmetric n x n matrix is identified with a vector of length n(n+1)/2 by
stacking the upper triangle row by row (X11, X12, ..., X1n, X22, ..., Xnn).
Every generalized Lyapunov operator used in this package is represented as a
real square matrix acting on those coordinates, so that spectra, stability
verdicts and linear solves all reduce to dense matrix computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "SystemQuad",
    "SvecIndexMap",
    "LiftedOperator",
    "KronOperator",
    "OutputLift",
    "svec",
    "smat",
    "svec_dim",
    "build_closed_loop_operator",
    "build_drift_operator",
    "build_kron_operator",
    "build_output_lift",
    "classify_extra_spectrum",
]


def _as_matrix(M, name: str) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d array, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True)
class SystemQuad:
    """Plant data (A, B, C, D) of dx = (Ax+Bu)dt + (Cx+Du)dw."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidInputError(f"A must be square, got {A.shape}")
        if n < 1:
            raise InvalidInputError("state dimension must be >= 1")
        m = B.shape[1]
        if B.shape != (n, m) or m < 1:
            raise InvalidInputError(f"B must be n x m with m >= 1, got {B.shape}")
        if C.shape != (n, n):
            raise InvalidInputError(f"C must be {n} x {n}, got {C.shape}")
        if D.shape != (n, m):
            raise InvalidInputError(f"D must be {n} x {m}, got {D.shape}")
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, M)
        object.__setattr__(self, "_frozen_hash", None)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def closed_loop(self, K) -> tuple[np.ndarray, np.ndarray]:
        """Return (A+BK, C+DK) for an m x n gain K."""
        K = _as_matrix(K, "K")
        if K.shape != (self.m, self.n):
            raise InvalidInputError(
                f"gain must be {self.m} x {self.n}, got {K.shape}")
        return self.A + self.B @ K, self.C + self.D @ K

    def same_data(self, other: "SystemQuad") -> bool:
        return (
            self.A.shape == other.A.shape
            and self.B.shape == other.B.shape
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.D, other.D)
        )


@dataclass(frozen=True)
class SvecIndexMap:
    """Row-major upper-triangle enumeration of a symmetric n x n matrix."""

    n: int

    @property
    def size(self) -> int:
        return self.n * (self.n + 1) // 2

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i, self.n)]


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def _triangular_root(length: int) -> int:
    n = int((np.sqrt(8 * length + 1) - 1) / 2)
    if n * (n + 1) // 2 != length:
        raise InvalidInputError(
            f"vector length {length} is not a triangular number")
    return n


def svec(X, tol_sym: float | None = None) -> np.ndarray:
    """Upper-triangle coordinates of a symmetric matrix (unweighted).

    Inputs asymmetric beyond tol_sym = 1e-9 * max(1, ||X||_F) are rejected;
    smaller asymmetry is removed by symmetrization.
    """
    X = _as_matrix(X, "X")
    n = X.shape[0]
    if X.shape != (n, n):
        raise InvalidInputError(f"X must be square, got {X.shape}")
    if tol_sym is None:
        tol_sym = 1e-9 * max(1.0, float(np.linalg.norm(X)))
    skew = np.linalg.norm(X - X.T)
    if skew > tol_sym:
        raise InvalidInputError(
            f"X is not symmetric: ||X - X'|| = {skew:.3e} > tol {tol_sym:.3e}")
    if skew > 0:
        X = 0.5 * (X + X.T)
    iu = np.triu_indices(n)
    return X[iu]


def smat(v) -> np.ndarray:
    """Inverse of svec: rebuild the symmetric matrix from its coordinates."""
    v = np.asarray(v, dtype=float).ravel()
    n = _triangular_root(v.size)
    X = np.zeros((n, n))
    iu = np.triu_indices(n)
    X[iu] = v
    X = X + X.T - np.diag(np.diag(X))
    return X


def _operator_matrix(n: int, op: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Matrix of a linear symmetric-to-symmetric map on svec coordinates."""
    d = svec_dim(n)
    M = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        Bk = smat(e)
        Y = op(Bk)
        M[:, k] = svec(0.5 * (Y + Y.T), tol_sym=np.inf)
    return M


@dataclass(frozen=True)
class LiftedOperator:
    """Real matrix of order n(n+1)/2 acting on svec coordinates."""

    M: np.ndarray
    kind: str
    system: SystemQuad | None = None
    gain: np.ndarray | None = None
    drift: np.ndarray | None = None
    diffusions: tuple[np.ndarray, ...] = field(default_factory=tuple)

    @property
    def order(self) -> int:
        return self.M.shape[0]

    @property
    def n(self) -> int:
        return _triangular_root(self.order)


@dataclass(frozen=True)
class KronOperator:
    """The n^2-order Kronecker lift acting on vec coordinates."""

    M0: np.ndarray
    system: SystemQuad | None = None
    gain: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.M0.shape[0])))


@dataclass(frozen=True)
class OutputLift:
    """Matrix sending svec(X) to vec(QX) (row-major vec), for an output map Q."""

    M: np.ndarray
    Q: np.ndarray


def build_closed_loop_operator(sys: SystemQuad, K, variant: str = "direct") -> LiftedOperator:
    """Lift of the closed-loop generalized Lyapunov operator.

    direct:  X -> (A+BK)X + X(A+BK)' + (C+DK)X(C+DK)'
    adjoint: X -> X(A+BK) + (A+BK)'X + (C+DK)'X(C+DK)
    """
    if variant not in ("direct", "adjoint"):
        raise InvalidInputError(f"unknown variant {variant!r}")
    Ac, Cc = sys.closed_loop(K)
    if variant == "direct":
        op = lambda X: Ac @ X + X @ Ac.T + Cc @ X @ Cc.T
    else:
        op = lambda X: X @ Ac + Ac.T @ X + Cc.T @ X @ Cc
    M = _operator_matrix(sys.n, op)
    return LiftedOperator(M=M, kind=f"closed-loop-{variant}", system=sys,
                          gain=np.asarray(K, dtype=float))


def build_drift_operator(A, Cs: Sequence, adjoint: bool = False) -> LiftedOperator:
    """Lift of X -> AX + XA' + sum_i Ci X Ci' (or its adjoint).

    An empty diffusion list gives the classical Lyapunov lift.
    """
    A = _as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidInputError(f"A must be square, got {A.shape}")
    Cs = tuple(_as_matrix(Ci, f"Cs[{i}]") for i, Ci in enumerate(Cs))
    for i, Ci in enumerate(Cs):
        if Ci.shape != (n, n):
            raise InvalidInputError(f"Cs[{i}] must be {n} x {n}, got {Ci.shape}")
    if adjoint:
        op = lambda X: X @ A + A.T @ X + sum(Ci.T @ X @ Ci for Ci in Cs)
    else:
        op = lambda X: A @ X + X @ A.T + sum(Ci @ X @ Ci.T for Ci in Cs)
    M = _operator_matrix(n, op)
    kind = "drift-adjoint" if adjoint else "drift"
    return LiftedOperator(M=M, kind=kind, drift=A, diffusions=Cs)


def build_kron_operator(sys: SystemQuad, K) -> KronOperator:
    """(A+BK) kron I + I kron (A+BK) + (C+DK) kron (C+DK)."""
    Ac, Cc = sys.closed_loop(K)
    I = np.eye(sys.n)
    M0 = np.kron(Ac, I) + np.kron(I, Ac) + np.kron(Cc, Cc)
    return KronOperator(M0=M0, system=sys, gain=np.asarray(K, dtype=float))


def build_output_lift(Q, n: int) -> OutputLift:
    """Matrix M with vec(Q X) = M svec(X) for every symmetric X (row-major vec)."""
    Q = _as_matrix(Q, "Q")
    if Q.shape[1] != n:
        raise InvalidInputError(f"Q must have {n} columns, got {Q.shape}")
    l = Q.shape[0]
    d = svec_dim(n)
    M = np.empty((l * n, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        M[:, k] = (Q @ smat(e)).reshape(-1)
    return OutputLift(M=M, Q=Q)


def _default_tol_eig(M: np.ndarray) -> float:
    rho = float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0
    return 1e-7 * (1.0 + rho)


def classify_extra_spectrum(L: LiftedOperator, L0: KronOperator,
                            tol_eig: float | None = None) -> list[dict]:
    """Account for every eigenvalue of the Kronecker lift.

    Each eigenvalue of L0 either already belongs to sigma(L) or is certified
    by a (numerically) skew-symmetric eigenvector of the n x n eigenproblem.
    """
    if L.system is None or L0.system is None or not L.system.same_data(L0.system):
        raise InvalidInputError("operators were not built from the same system")
    if L.gain is None or L0.gain is None or not np.array_equal(L.gain, L0.gain):
        raise InvalidInputError("operators were not built from the same gain")
    if tol_eig is None:
        tol_eig = max(_default_tol_eig(L.M), _default_tol_eig(L0.M0))
    eig_L = np.linalg.eigvals(L.M)
    w0, V0 = np.linalg.eig(L0.M0)
    n = L0.n
    report = []
    for lam, v in zip(w0, V0.T):
        in_L = bool(np.min(np.abs(eig_L - lam)) <= tol_eig)
        item = {"eigenvalue": lam, "in_sigma_L": in_L}
        if not in_L:
            X = v.reshape(n, n)
            skew_defect = np.linalg.norm(X + X.T) / np.linalg.norm(X)
            item["skew_defect"] = float(skew_defect)
            item["witness"] = X
            item["skew_certified"] = bool(skew_defect <= 1e-6)
        report.append(item)
    return report

"""Spectral analysis of lifted operators and stability verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InternalConsistencyError, InvalidInputError, NumericalFailureError
from .lift import KronOperator, LiftedOperator, build_drift_operator

__all__ = [
    "Spectrum",
    "StabilityVerdict",
    "spectrum",
    "spectral_abscissa",
    "is_ms_stable",
    "is_weakly_stable",
    "TOL_MARGIN",
]

TOL_MARGIN = 1e-8


def _to_matrix(L) -> np.ndarray:
    if isinstance(L, LiftedOperator):
        return L.M
    if isinstance(L, KronOperator):
        return L.M0
    M = np.asarray(L, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    return M


def _schur_eigenvalues(M: np.ndarray) -> np.ndarray:
    """Eigenvalues from the real Schur form, read off the diagonal blocks."""
    if M.shape[0] == 0:
        return np.array([], dtype=complex)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        T, _ = scipy.linalg.schur(M, output="real")
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailureError(f"Schur reduction failed: {exc}") from exc
    n = T.shape[0]
    vals = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 0.0:
            a, b = T[i, i], T[i, i + 1]
            c, d = T[i + 1, i], T[i + 1, i + 1]
            re = 0.5 * (a + d)
            disc = 0.25 * (a - d) ** 2 + b * c
            if disc < 0:
                im = np.sqrt(-disc)
                vals.extend([re + 1j * im, re - 1j * im])
            else:  # split real pair (can occur for nearly reducible blocks)
                r = np.sqrt(disc)
                vals.extend([re + r, re - r])
            i += 2
        else:
            vals.append(complex(T[i, i]))
            i += 1
    return np.array(vals)


def _rank(M: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol))


@dataclass(frozen=True)
class Spectrum:
    """Multiset of eigenvalues with algebraic/geometric multiplicities."""

    eigenvalues: np.ndarray          # all eigenvalues, deterministically sorted
    groups: tuple = field(default_factory=tuple)   # (value, alg_mult, geo_mult)
    tol_eig: float = 0.0

    @property
    def abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def values(self) -> np.ndarray:
        return self.eigenvalues


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str                     # stable | weakly-stable | unstable
    abscissa: float
    witnesses: tuple = field(default_factory=tuple)  # critical (value, semisimple)

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    @property
    def weakly_stable(self) -> bool:
        return self.verdict in ("stable", "weakly-stable")


def spectrum(L, tol_eig: float | None = None) -> Spectrum:
    """Eigenvalues of a lifted operator, clustered with multiplicities."""
    M = _to_matrix(L)
    vals = _schur_eigenvalues(M)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    if tol_eig is None:
        rho = float(np.max(np.abs(vals))) if vals.size else 0.0
        tol_eig = 1e-7 * (1.0 + rho)
    # cluster eigenvalues within tol_eig into multiplicity groups
    groups = []
    used = np.zeros(vals.size, dtype=bool)
    norm2 = np.linalg.norm(M, 2) if M.size else 0.0
    rank_tol = M.shape[0] * np.finfo(float).eps * norm2 * 10 + 1e-300
    for i in range(vals.size):
        if used[i]:
            continue
        cluster = [i]
        used[i] = True
        for j in range(i + 1, vals.size):
            if not used[j] and abs(vals[j] - vals[i]) <= tol_eig:
                cluster.append(j)
                used[j] = True
        lam = vals[cluster].mean()
        alg = len(cluster)
        geo = M.shape[0] - _rank(M - lam * np.eye(M.shape[0], dtype=complex),
                                 max(rank_tol, tol_eig * 1e-2))
        geo = max(1, min(geo, alg))
        groups.append((lam, alg, geo))
    return Spectrum(eigenvalues=vals, groups=tuple(groups), tol_eig=tol_eig)


def spectral_abscissa(L) -> float:
    """Maximum real part of the spectrum."""
    return spectrum(L).abscissa


def is_weakly_stable(L, tol_margin: float = TOL_MARGIN) -> StabilityVerdict:
    """Weak (marginal) stability: closed left half plane with semisimple
    critical eigenvalues."""
    spec = spectrum(L)
    a = spec.abscissa
    witnesses = []
    all_semisimple = True
    for lam, alg, geo in spec.groups:
        if abs(lam.real) <= tol_margin:
            semisimple = geo == alg
            witnesses.append((lam, semisimple))
            all_semisimple = all_semisimple and semisimple
    if a < -tol_margin:
        verdict = "stable"
    elif a <= tol_margin and all_semisimple:
        verdict = "weakly-stable"
    else:
        verdict = "unstable"
    return StabilityVerdict(verdict=verdict, abscissa=a, witnesses=tuple(witnesses))


def is_ms_stable(A, Cs, tol_margin: float = TOL_MARGIN) -> StabilityVerdict:
    """Mean-square stability of dx = Ax dt + sum_i Ci x dw_i.

    Decided spectrally and cross-checked against the existence of P > 0
    solving the Lyapunov-type equation with Q = I; a disagreement between
    the two criteria raises InternalConsistencyError.
    """
    from .stability import GenLyapProblem, solve_gen_lyapunov

    L = build_drift_operator(A, Cs)
    verdict = is_weakly_stable(L, tol_margin=tol_margin)
    # cross-check away from the stability boundary
    if abs(verdict.abscissa) > 10 * tol_margin:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        sol = solve_gen_lyapunov(GenLyapProblem(A=A, Cs=tuple(
            np.atleast_2d(np.asarray(Ci, dtype=float)) for Ci in Cs), Q=np.eye(n)))
        if isinstance(sol, np.ndarray):
            eigmin = float(np.min(np.linalg.eigvalsh(sol)))
            lyap_stable = eigmin > 1e-9 * (1.0 + np.linalg.norm(sol, 2))
            if lyap_stable != verdict.stable:
                raise InternalConsistencyError(
                    "spectral and Lyapunov stability criteria disagree: "
                    f"abscissa={verdict.abscissa:.3e}, min eig(P)={eigmin:.3e}")
        elif verdict.stable:
            raise InternalConsistencyError(
                "abscissa < 0 but Lyapunov-type equation is singular")
    return verdict

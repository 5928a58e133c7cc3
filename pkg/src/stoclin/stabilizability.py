"""Mean-square stabilizability decisions, gain synthesis, unremovable spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InternalConsistencyError, InvalidInputError
from .lift import (SystemQuad, build_closed_loop_operator, build_drift_operator,
                   smat, svec_dim)
from .lmi import LinearMatrixExpr, VarSpec, bmat, feasibility
from .spectra import is_weakly_stable, spectral_abscissa, spectrum

__all__ = [
    "StabilizabilityReport",
    "UnremovableSpectrumItem",
    "is_stabilizable",
    "stabilizing_gain",
    "unremovable_spectra",
    "deterministic_pbh",
    "find_c1_representation",
    "stochastic_pbh",
    "is_weakly_stabilizable",
    "scalar_analysis",
]

TOL_UNREM = 1e-7


@dataclass(frozen=True)
class StabilizabilityReport:
    decision: str                    # stabilizable | not-stabilizable | unknown
    witness_gain: np.ndarray | None = None
    witness_certificate: np.ndarray | None = None   # P from the LMI
    method: str = ""
    margin: float = float("nan")
    diagnostics: str = ""


@dataclass(frozen=True)
class UnremovableSpectrumItem:
    eigenvalue: complex
    X: np.ndarray                    # nonzero symmetric (possibly complex)
    residuals: dict = field(default_factory=dict)
    is_real: bool = True


def stabilizability_lmi_expr(A, B, pairs, beta: float = 1e6) -> LinearMatrixExpr:
    """Strict stabilizability LMI in (P > 0, Y): feasibility of

      [[AP + PA' + BY + Y'B',  C1 P + D1 Y, ...],
       [(C1 P + D1 Y)',        -P,          ...],  ...] < 0

    with normalization I <= P <= beta I.  K = Y P^-1 on feasibility.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    pairs = [(np.atleast_2d(np.asarray(Ci, dtype=float)),
              np.atleast_2d(np.asarray(Di, dtype=float))) for Ci, Di in pairs]
    k = len(pairs)

    def build(vals):
        P, Y = vals["P"], vals["Y"]
        top = A @ P + P @ A.T + B @ Y + Y.T @ B.T
        offs = [Ci @ P + Di @ Y for Ci, Di in pairs]
        rows = [[top] + offs]
        for i in range(k):
            row = [offs[i].T]
            for j in range(k):
                row.append(-P if i == j else np.zeros((n, n)))
            rows.append(row)
        main = bmat(rows) if k else top
        return [main, P - np.eye(n), beta * np.eye(n) - P]

    return LinearMatrixExpr(
        variables=(VarSpec("P", (n, n), symmetric=True), VarSpec("Y", (m, n))),
        build=build, senses=("nsd", "psd", "psd"), name="stabilizability")


def _is_stabilizable_pairs(A, B, pairs) -> StabilizabilityReport:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    sol = feasibility(stabilizability_lmi_expr(A, B, pairs), "strict-negative")
    if sol.status == "unknown":
        return StabilizabilityReport(decision="unknown", method="lmi",
                                     diagnostics=f"solver: {sol.solver_status}")
    if not sol.feasible:
        return StabilizabilityReport(decision="not-stabilizable", method="lmi",
                                     margin=sol.margin)
    P, Y = sol.values["P"], sol.values["Y"]
    K = Y @ np.linalg.inv(P)
    Ac = A + B @ K
    L = build_drift_operator(Ac, [Ci + Di @ K for Ci, Di in pairs])
    a = spectral_abscissa(L)
    if a < 0:
        return StabilizabilityReport(decision="stabilizable", witness_gain=K,
                                     witness_certificate=P, method="lmi",
                                     margin=sol.margin)
    return StabilizabilityReport(
        decision="unknown", method="lmi", margin=sol.margin,
        diagnostics=f"LMI feasible but closed-loop abscissa {a:.3e} >= 0")


def scalar_analysis(a: float, b: float, c: float, d: float) -> dict:
    """Closed-form scalar analysis: the stabilizability criterion
    b^2 + 2bcd - 2ad^2, the minimal closed-loop spectrum of
    lambda(k) = d^2 k^2 + 2(b + cd) k + 2a + c^2, and its minimizer."""
    criterion = b * b + 2 * b * c * d - 2 * a * d * d
    if d != 0.0:
        k_min = -(b + c * d) / (d * d)
        min_spectrum = 2 * a + c * c - (b + c * d) ** 2 / (d * d)
    elif b != 0.0:
        k_min = None
        min_spectrum = -np.inf
    else:
        k_min = None
        min_spectrum = 2 * a + c * c
    return {"criterion": criterion, "min_spectrum": min_spectrum,
            "minimizing_k": k_min}


def _scalar_report(sys: SystemQuad) -> StabilizabilityReport:
    a, b = sys.A[0, 0], sys.B[0, 0]
    c, d = sys.C[0, 0], sys.D[0, 0]
    res = scalar_analysis(a, b, c, d)
    if res["min_spectrum"] < 0:
        if res["minimizing_k"] is not None:
            k = res["minimizing_k"]
        elif b != 0.0:    # d = 0: spectrum 2(a+bk) + c^2, any low enough k
            k = -(2 * a + c * c + 1.0) / (2 * b)
        else:             # b = d = 0 and already stable
            k = 0.0
        return StabilizabilityReport(
            decision="stabilizable", witness_gain=np.array([[k]]),
            method="scalar-criterion", margin=-res["min_spectrum"])
    return StabilizabilityReport(decision="not-stabilizable",
                                 method="scalar-criterion",
                                 margin=-res["min_spectrum"])


def is_stabilizable(sys: SystemQuad) -> StabilizabilityReport:
    """Decide mean-square stabilizability constructively via the strict LMI.

    Scalar systems are decided by the exact closed-form criterion; the LMI
    route is cross-checked against it.
    """
    if sys.n == 1 and sys.m == 1:
        report = _scalar_report(sys)
        lmi_report = _is_stabilizable_pairs(sys.A, sys.B, [(sys.C, sys.D)])
        if (lmi_report.decision != "unknown"
                and lmi_report.decision != report.decision):
            # exact scalar criterion wins; keep the discrepancy visible
            report = StabilizabilityReport(
                decision=report.decision, witness_gain=report.witness_gain,
                method="scalar-criterion",
                margin=report.margin,
                diagnostics=f"LMI route disagreed ({lmi_report.decision})")
        return report
    return _is_stabilizable_pairs(sys.A, sys.B, [(sys.C, sys.D)])


def stabilizing_gain(sys: SystemQuad) -> np.ndarray | None:
    """A gain K with spectral abscissa of the closed-loop lift < 0, or None."""
    report = is_stabilizable(sys)
    if report.decision != "stabilizable":
        return None
    K = report.witness_gain
    if spectral_abscissa(build_closed_loop_operator(sys, K)) >= 0:
        raise InternalConsistencyError(
            "returned gain failed independent spectral verification")
    return K


def _smat_complex(v: np.ndarray) -> np.ndarray:
    return smat(v.real) + 1j * smat(v.imag)


def unremovable_spectra(sys: SystemQuad, tol_unrem: float = TOL_UNREM) -> list[UnremovableSpectrumItem]:
    """All eigenvalues lambda of X -> XA + A'X + C'XC whose eigenspace meets
    {X : XB + C'XD = 0 and D'XD = 0} nontrivially, with a witness X each."""
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    L = build_drift_operator(A, [C], adjoint=True)
    M = L.M
    w = np.linalg.eigvals(M)
    rho = float(np.max(np.abs(w))) if w.size else 0.0
    tol_eig = 1e-7 * (1.0 + rho)
    scale = max(1.0, np.linalg.norm(M, 2))
    items: list[UnremovableSpectrumItem] = []
    done: list[complex] = []
    for lam in w:
        if any(abs(lam - mu) <= tol_eig for mu in done):
            continue
        done.append(lam)
        # eigenspace basis via SVD null space of (M - lam I)
        Mc = M.astype(complex) - lam * np.eye(M.shape[0])
        U, s, Vt = np.linalg.svd(Mc)
        null_mask = s <= max(tol_eig, 1e2 * np.finfo(float).eps * scale)
        basis = Vt.conj()[null_mask]
        if basis.size == 0:
            basis = Vt.conj()[-1:]
        Xs = [_smat_complex(v) for v in basis]
        # linear constraints XB + C'XD = 0, D'XD = 0 restricted to the span
        cols = []
        for X in Xs:
            c1 = (X @ B + C.T @ X @ D).reshape(-1)
            c2 = (D.T @ X @ D).reshape(-1)
            cols.append(np.concatenate([c1, c2]))
        T = np.array(cols).T
        if T.shape[0] == 0:
            coeff = np.zeros(len(Xs), dtype=complex)
            coeff[0] = 1.0
        else:
            Ut, st, Vtt = np.linalg.svd(T)
            tolT = max(T.shape) * np.finfo(float).eps * (st[0] if st.size else 0.0)
            tolT = max(tolT, tol_unrem)
            rank_T = int(np.sum(st > tolT))
            if rank_T >= T.shape[1]:
                continue    # constraints cut the eigenspace down to {0}
            coeff = Vtt.conj()[-1]
        X = sum(c * Xi for c, Xi in zip(coeff, Xs))
        nX = np.linalg.norm(X)
        if nX == 0:
            continue
        X = X / nX
        r1 = np.linalg.norm(X @ A + A.T @ X + C.T @ X @ C - lam * X)
        r2 = np.linalg.norm(X @ B + C.T @ X @ D)
        r3 = np.linalg.norm(D.T @ X @ D)
        if max(r1, r2, r3) > tol_unrem * max(1.0, abs(lam)) * 10:
            continue
        is_real = bool(abs(lam.imag) <= tol_eig and np.max(np.abs(X.imag)) <= tol_unrem)
        items.append(UnremovableSpectrumItem(
            eigenvalue=lam, X=X,
            residuals={"operator": float(r1), "gain_channel": float(r2),
                       "diffusion_channel": float(r3)},
            is_real=is_real))
    return items


def _vector_pbh_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -1e-9:
            M = np.hstack([lam * np.eye(n) - A, B])
            s = np.linalg.svd(M, compute_uv=False)
            if np.sum(s > max(M.shape) * np.finfo(float).eps * s[0] * 10) < n:
                return False
    return True


def deterministic_pbh(A, B) -> dict:
    """PBH stabilizability test via unremovable spectra of (A, B, 0, 0),
    cross-checked against the classical vector PBH test."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sys = SystemQuad(A=A, B=B, C=np.zeros_like(A), D=np.zeros_like(B))
    items = unremovable_spectra(sys)
    bad = [it for it in items if it.eigenvalue.real >= -1e-9]
    verdict = "not-stabilizable" if bad else "stabilizable"
    vec_ok = _vector_pbh_stabilizable(A, B)
    if vec_ok != (verdict == "stabilizable"):
        raise InternalConsistencyError(
            "matrix and vector PBH stabilizability tests disagree")
    return {"verdict": verdict, "witnesses": bad}


def find_c1_representation(C, tol: float = 1e-9) -> np.ndarray | None:
    """Solve C'XC = X C1 + C1'X for C1 over the full symmetric basis,
    least squares; None when no exact representation exists."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[0]
    if C.shape != (n, n):
        raise InvalidInputError("C must be square")
    d = svec_dim(n)
    basis = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        basis.append(smat(e))
    # columns indexed by entries of C1
    Mlin = np.zeros((d * d, n * n))
    rhs = np.zeros(d * d)
    from .lift import svec as _svec
    for k, Xk in enumerate(basis):
        rhs[k * d:(k + 1) * d] = _svec(C.T @ Xk @ C, tol_sym=np.inf)
        for p in range(n):
            for q in range(n):
                E = np.zeros((n, n))
                E[p, q] = 1.0
                col = Xk @ E + E.T @ Xk
                Mlin[k * d:(k + 1) * d, p * n + q] = _svec(col, tol_sym=np.inf)
    x, *_ = np.linalg.lstsq(Mlin, rhs, rcond=None)
    resid = np.linalg.norm(Mlin @ x - rhs) / max(1.0, np.linalg.norm(rhs))
    if resid > tol:
        return None
    return x.reshape(n, n)


def stochastic_pbh(sys: SystemQuad) -> dict:
    """PBH criterion for stochastic stabilizability; applicable only when
    D = 0 and C'XC admits the representation X C1 + C1'X."""
    if np.linalg.norm(sys.D) > 0:
        return {"verdict": "not-applicable", "reason": "D != 0"}
    C1 = find_c1_representation(sys.C)
    if C1 is None:
        return {"verdict": "not-applicable",
                "reason": "no C1 representation of C'XC"}
    det = deterministic_pbh(sys.A + C1, sys.B)
    verdict = det["verdict"]
    full = is_stabilizable(sys)
    if full.decision != "unknown" and full.decision != verdict:
        raise InternalConsistencyError(
            f"stochastic PBH ({verdict}) disagrees with the LMI decision "
            f"({full.decision})")
    return {"verdict": verdict, "c1": C1, "witnesses": det["witnesses"]}


def is_weakly_stabilizable(sys: SystemQuad) -> dict:
    """Tri-state weak stabilizability.

    yes:     a gain with weakly stable closed-loop lift was found (or the
             system is outright stabilizable);
    no:      only certified in the scalar case and the B = 0, D = 0 case,
             where the closed-loop spectrum does not depend on the gain;
    unknown: otherwise (the sufficient conditions are not known to be
             necessary in general).
    """
    report = is_stabilizable(sys)
    if report.decision == "stabilizable":
        return {"verdict": "yes", "gain": report.witness_gain,
                "method": "stabilizable"}
    if sys.n == 1 and sys.m == 1:
        res = scalar_analysis(sys.A[0, 0], sys.B[0, 0], sys.C[0, 0], sys.D[0, 0])
        if res["min_spectrum"] <= 0:
            k = res["minimizing_k"] if res["minimizing_k"] is not None else 0.0
            return {"verdict": "yes", "gain": np.array([[k]]),
                    "method": "scalar-minimum"}
        return {"verdict": "no", "method": "scalar-minimum",
                "diagnostics": f"min closed-loop spectrum {res['min_spectrum']:.3e} > 0"}
    if np.linalg.norm(sys.B) == 0 and np.linalg.norm(sys.D) == 0:
        v = is_weakly_stable(build_closed_loop_operator(sys, np.zeros((sys.m, sys.n))))
        if v.weakly_stable:
            return {"verdict": "yes", "gain": np.zeros((sys.m, sys.n)),
                    "method": "gain-independent"}
        return {"verdict": "no", "method": "gain-independent"}
    # K = 0 shortcut
    v0 = is_weakly_stable(build_closed_loop_operator(sys, np.zeros((sys.m, sys.n))))
    if v0.weakly_stable:
        return {"verdict": "yes", "gain": np.zeros((sys.m, sys.n)),
                "method": "zero-gain"}
    # non-strict LMI with a slack schedule
    expr = stabilizability_lmi_expr(sys.A, sys.B, [(sys.C, sys.D)])
    sol = feasibility(expr, "nonpositive-with-slack")
    if sol.feasible:
        P, Y = sol.values["P"], sol.values["Y"]
        K = Y @ np.linalg.inv(P)
        if is_weakly_stable(build_closed_loop_operator(sys, K)).weakly_stable:
            return {"verdict": "yes", "gain": K, "method": "lmi-slack"}
    return {"verdict": "unknown"}

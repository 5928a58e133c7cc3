"""Quadratic stabilization of norm-bounded uncertain stochastic systems.

Uncertainty enters as Delta A = E F G (optionally Delta B = E F G2 and
Delta C = E F G3) with F ranging over the spectral-norm unit ball F'F <= I.
Synthesis is by LMI feasibility with the S-procedure scalar kept as an
explicit decision variable; certificates are re-verified exactly (via the
same S-procedure bound with the gain frozen) and spot-checked by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalConsistencyError, InvalidInputError
from .lift import SystemQuad
from .lmi import LinearMatrixExpr, VarSpec, bmat, feasibility
from .stabilizability import is_stabilizable

__all__ = [
    "UncertaintyModel",
    "QuadStabCertificate",
    "assemble_qs_lmi",
    "synthesize_quadratic_stabilizer",
    "synthesize_extended",
    "verify_quadratic_stability",
    "sample_f_ball",
]


@dataclass(frozen=True)
class UncertaintyModel:
    """Matching-condition uncertainty Delta A = E F G with F'F <= I.

    The extended form [Delta A, Delta B, Delta C] = E F [G1, G2, G3] is
    expressed by passing G2 and/or G3; G plays the role of G1.
    """

    E: np.ndarray
    G: np.ndarray
    G2: np.ndarray | None = None
    G3: np.ndarray | None = None

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "G", G)
        for name in ("G2", "G3"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.atleast_2d(np.asarray(v, dtype=float)))

    def validate(self, sys: SystemQuad):
        n, m = sys.n, sys.m
        if self.E.shape[0] != n:
            raise InvalidInputError(f"E must have {n} rows, got {self.E.shape}")
        j = self.G.shape[0]
        if self.G.shape[1] != n:
            raise InvalidInputError(f"G must have {n} columns, got {self.G.shape}")
        if self.G2 is not None and self.G2.shape != (j, m):
            raise InvalidInputError(f"G2 must be {j} x {m}, got {self.G2.shape}")
        if self.G3 is not None and self.G3.shape != (j, n):
            raise InvalidInputError(f"G3 must be {j} x {n}, got {self.G3.shape}")

    @property
    def k(self) -> int:
        return self.E.shape[1]

    @property
    def j(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True)
class QuadStabCertificate:
    P: np.ndarray
    K: np.ndarray
    alpha: float


def assemble_qs_lmi(sys: SystemQuad, unc: UncertaintyModel,
                    include_ee: bool = True) -> LinearMatrixExpr:
    """Three-block synthesis LMI in (X > 0, Y):

      [[AX+XA'+BY+Y'B'+CXC'+CY'D'+DYC' (+ EE'),  DY,  XG'],
       [Y'D',                                    -X,   0 ],
       [GX,                                       0,  -I ]]  < 0.

    include_ee keeps the EE' constant block the derivation produces; the
    variant without it reproduces the theorem's printed display.
    """
    unc.validate(sys)
    n, m = sys.n, sys.m
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    E, G = unc.E, unc.G
    j = unc.j
    EE = E @ E.T if include_ee else np.zeros((n, n))

    def build(vals):
        X, Y = vals["X"], vals["Y"]
        top = (A @ X + X @ A.T + B @ Y + Y.T @ B.T + C @ X @ C.T
               + C @ Y.T @ D.T + D @ Y @ C.T + EE)
        main = bmat([
            [top, D @ Y, X @ G.T],
            [Y.T @ D.T, -X, np.zeros((n, j))],
            [G @ X, np.zeros((j, n)), -np.eye(j)],
        ])
        return [main, X - 1e-9 * np.eye(n)]

    return LinearMatrixExpr(
        variables=(VarSpec("X", (n, n), symmetric=True), VarSpec("Y", (m, n))),
        build=build, senses=("nsd", "psd"), name="quad-stab")


def _synthesis_expr(sys: SystemQuad, unc: UncertaintyModel) -> LinearMatrixExpr:
    """Dual synthesis LMI with the S-procedure scalar explicit:

      [[Z(X,Y) + eps H H',  Ebar(X,Y)'],
       [Ebar(X,Y),          -eps I    ]] < 0,

    where Z is the congruence (by X = P^-1) of the closed-loop generator
    inequality, H routes the uncertainty into the drift row ([E; 0]) and,
    when G3 is present, into the diffusion row as well, and
    Ebar stacks [G X + G2 Y] and [G3 X].  Feasibility yields the gain
    K = Y X^-1 together with the common certificate P = X^-1."""
    unc.validate(sys)
    n, m = sys.n, sys.m
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    E, G = unc.E, unc.G
    G2 = unc.G2 if unc.G2 is not None else np.zeros((unc.j, m))
    G3 = unc.G3 if unc.G3 is not None else np.zeros((unc.j, n))
    has_g3 = np.linalg.norm(G3) > 0
    j = unc.j
    EE = E @ E.T

    def build(vals):
        X, Y, eps = vals["X"], vals["Y"], vals["eps"][0, 0]
        z11 = A @ X + X @ A.T + B @ Y + Y.T @ B.T + eps * EE
        z12 = (C @ X + D @ Y).T
        z22 = -X + (eps * EE if has_g3 else np.zeros((n, n)))
        e1 = G @ X + G2 @ Y
        rows = [
            [z11, z12, e1.T],
            [z12.T, z22, np.zeros((n, j))],
            [e1, np.zeros((j, n)), -eps * np.eye(j)],
        ]
        if has_g3:
            e2 = G3 @ X
            rows[0].append(np.zeros((n, j)))
            rows[1].append(e2.T)
            rows[2].append(np.zeros((j, j)))
            rows.append([np.zeros((j, n)), e2, np.zeros((j, j)),
                         -eps * np.eye(j)])
        main = bmat(rows)
        return [main, X - 1e-6 * np.eye(n), vals["eps"]]

    return LinearMatrixExpr(
        variables=(VarSpec("X", (n, n), symmetric=True), VarSpec("Y", (m, n)),
                   VarSpec("eps", (1, 1))),
        build=build, senses=("nsd", "psd", "psd"), name="quad-stab-eps")


def _certificate_main_block(sys: SystemQuad, unc: UncertaintyModel, K,
                            P, tau):
    """S-procedure certificate block for the closed-loop generator over the
    whole uncertainty ball, affine in (P, tau):

      [[P Ac + Ac'P + tau Gd'Gd,  Cc'P,             P E,   0  ],
       [P Cc,                     -P + tau G3'G3,   0,     P E],
       [E'P,                      0,                -tau I, 0 ],
       [0,                        E'P,              0, -tau I]]  < 0

    (the G3 row/column pair is dropped when G3 = 0).  This is exactly the
    congruence image (by diag(X^-1, X^-1, I, I)) of the synthesis LMI, so
    dual feasibility transfers to P = X^-1; its negativity implies
    P Ac_F + Ac_F'P + Cc_F'P Cc_F < 0 for every F with F'F <= I.
    """
    n = sys.n
    Ac, Cc = sys.closed_loop(K)
    E = unc.E
    G2 = unc.G2 if unc.G2 is not None else np.zeros((unc.j, sys.m))
    G3 = unc.G3 if unc.G3 is not None else np.zeros((unc.j, n))
    Gd = unc.G + G2 @ K
    has_g3 = np.linalg.norm(G3) > 0
    k = unc.k
    Znk = np.zeros((n, k))
    Zkk = np.zeros((k, k))
    r1 = [P @ Ac + Ac.T @ P + tau * (Gd.T @ Gd), Cc.T @ P, P @ E]
    r2 = [P @ Cc, -P + (tau * (G3.T @ G3) if has_g3 else np.zeros((n, n))),
          Znk]
    r3 = [E.T @ P, Znk.T, -tau * np.eye(k)]
    rows = [r1, r2, r3]
    if has_g3:
        r1.append(Znk)
        r2.append(P @ E)
        r3.append(Zkk)
        rows.append([Znk.T, E.T @ P, Zkk, -tau * np.eye(k)])
    return bmat(rows)


def _primal_certificate(sys: SystemQuad, unc: UncertaintyModel,
                        K: np.ndarray, beta: float = 1e8):
    """Common quadratic Lyapunov matrix P for the closed loop over the whole
    uncertainty ball, via the tau-parameterized S-procedure LMI."""
    n = sys.n

    def build(vals):
        P, tau = vals["P"], vals["tau"][0, 0]
        main = _certificate_main_block(sys, unc, K, P, tau)
        return [main, P - np.eye(n), beta * np.eye(n) - P, vals["tau"]]

    expr = LinearMatrixExpr(
        variables=(VarSpec("P", (n, n), symmetric=True), VarSpec("tau", (1, 1))),
        build=build, senses=("nsd", "psd", "psd", "psd"),
        name="quad-stab-primal")
    sol = feasibility(expr, "strict-negative")
    if not sol.feasible:
        return None
    P = sol.values["P"]
    # decay rate in ||x||^2 units: matrix margin relative to the top of P
    alpha = sol.margin / float(np.max(np.linalg.eigvalsh(P)))
    return P, alpha


def synthesize_quadratic_stabilizer(sys: SystemQuad, unc: UncertaintyModel,
                                    seed: int = 0):
    """Quadratically stabilizing gain and certificate, or None if the
    synthesis LMI is infeasible."""
    if np.linalg.norm(unc.E) == 0 or np.linalg.norm(unc.G) == 0:
        # no effective uncertainty: fall back to nominal stabilization
        if unc.G2 is None or np.linalg.norm(unc.G2) == 0:
            report = is_stabilizable(sys)
            if report.decision != "stabilizable":
                return None
            K = report.witness_gain
            res = _primal_certificate(sys, unc, K)
            if res is None:
                raise InternalConsistencyError(
                    "nominal stabilizer failed certificate extraction")
            P, alpha = res
            return QuadStabCertificate(P=P, K=K, alpha=alpha)
    sol = feasibility(_synthesis_expr(sys, unc), "strict-negative")
    if not sol.feasible:
        return None
    X, Y = sol.values["X"], sol.values["Y"]
    K = Y @ np.linalg.inv(X)
    res = _primal_certificate(sys, unc, K)
    if res is None:
        # fall back on the congruence certificate P = X^-1 directly
        P = np.linalg.inv(0.5 * (X + X.T))
        P = 0.5 * (P + P.T) / np.min(np.linalg.eigvalsh(P))
        check = verify_quadratic_stability(sys, unc, K, P, seed=seed)
        if check["status"] != "certified":
            raise InternalConsistencyError(
                "synthesis LMI feasible but no certificate validated")
        return QuadStabCertificate(P=P, K=K, alpha=check["alpha"])
    P, alpha = res
    check = verify_quadratic_stability(sys, unc, K, P, seed=seed)
    if check["status"] != "certified":
        raise InternalConsistencyError(
            f"synthesized certificate failed verification: {check}")
    return QuadStabCertificate(P=P, K=K, alpha=max(alpha, check["alpha"]))


def synthesize_extended(sys: SystemQuad, unc: UncertaintyModel, seed: int = 0):
    """Extended-uncertainty synthesis ([dA, dB, dC] = E F [G1, G2, G3]);
    reduces exactly to the single-block routine when G2 = G3 = 0."""
    return synthesize_quadratic_stabilizer(sys, unc, seed=seed)


def sample_f_ball(rng: np.random.Generator, k: int, j: int) -> np.ndarray:
    """Uniform-ish sample of F with spectral norm <= 1: random orthogonal
    factors times singular values in [0, 1]."""
    U, _ = np.linalg.qr(rng.standard_normal((k, k)))
    V, _ = np.linalg.qr(rng.standard_normal((j, j)))
    r = min(k, j)
    S = np.zeros((k, j))
    S[:r, :r] = np.diag(rng.uniform(0.0, 1.0, size=r))
    return U @ S @ V.T


def _generator(sys: SystemQuad, unc: UncertaintyModel, K, P, F) -> np.ndarray:
    Ac, Cc = sys.closed_loop(K)
    G2 = unc.G2 if unc.G2 is not None else np.zeros((unc.j, sys.m))
    G3 = unc.G3 if unc.G3 is not None else np.zeros((unc.j, sys.n))
    Af = Ac + unc.E @ F @ (unc.G + G2 @ K)
    Cf = Cc + unc.E @ F @ G3
    return P @ Af + Af.T @ P + Cf.T @ P @ Cf


def _search_refuting_f(sys, unc, K, P, rng, iters: int = 50) -> tuple[np.ndarray, float]:
    """Alternating ascent for the worst-case F (drift channel only)."""
    Ac, Cc = sys.closed_loop(K)
    G2 = unc.G2 if unc.G2 is not None else np.zeros((unc.j, sys.m))
    Gd = unc.G + G2 @ K
    E = unc.E
    best_F = np.zeros((unc.k, unc.j))
    best_val = float(np.max(np.linalg.eigvalsh(_generator(sys, unc, K, P, best_F))))
    for _ in range(4):
        F = sample_f_ball(rng, unc.k, unc.j)
        for _ in range(iters):
            W = _generator(sys, unc, K, P, F)
            w, V = np.linalg.eigh(0.5 * (W + W.T))
            x = V[:, -1]
            u = E.T @ P @ x
            v = Gd @ x
            nu, nv = np.linalg.norm(u), np.linalg.norm(v)
            if nu * nv == 0:
                break
            F_new = np.outer(u / nu, v / nv)
            if np.allclose(F_new, F, atol=1e-12):
                F = F_new
                break
            F = F_new
        val = float(np.max(np.linalg.eigvalsh(_generator(sys, unc, K, P, F))))
        if val > best_val:
            best_val, best_F = val, F
    return best_F, best_val


def verify_quadratic_stability(sys: SystemQuad, unc: UncertaintyModel, K, P,
                               samples: int = 100, seed: int = 0) -> dict:
    """Certify (exact S-procedure LMI in the scalar multiplier) or refute
    (concrete F) quadratic stability of the closed loop under the gain K.

    With a nonzero G3 the certification bound is sufficient only; the
    sampled refutation search remains exact either way.
    """
    unc.validate(sys)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    wP = np.linalg.eigvalsh(0.5 * (P + P.T))
    if np.min(wP) <= 0:
        raise InvalidInputError("P must be positive definite")
    rng = np.random.default_rng(seed)
    # sampled refutation first: any violating F settles the matter
    worst = -np.inf
    for _ in range(samples):
        F = sample_f_ball(rng, unc.k, unc.j)
        v = float(np.max(np.linalg.eigvalsh(_generator(sys, unc, K, P, F))))
        if v > worst:
            worst = v
        if v > 1e-10 * (1.0 + np.linalg.norm(P)):
            return {"status": "refuted", "F": F, "generator_max_eig": v}
    # certification with P and K frozen (exact for G3 = 0, sufficient
    # otherwise): only the S-procedure scalar is a decision variable
    def build(vals):
        tau = vals["tau"][0, 0]
        main = _certificate_main_block(sys, unc, K, P, tau)
        return [main, vals["tau"]]

    expr = LinearMatrixExpr(variables=(VarSpec("tau", (1, 1)),), build=build,
                            senses=("nsd", "psd"), name="quad-stab-verify")
    sol = feasibility(expr, "strict-negative")
    if sol.feasible:
        alpha = sol.margin / float(np.max(np.linalg.eigvalsh(P)))
        return {"status": "certified", "alpha": alpha,
                "sampled_max_eig": worst}
    # LMI says no common bound: hunt for a concrete violator
    F, val = _search_refuting_f(sys, unc, K, P, rng)
    if val > 0:
        return {"status": "refuted", "F": F, "generator_max_eig": val}
    return {"status": "refuted", "F": F, "generator_max_eig": val,
            "note": "certification LMI infeasible; best sampled F attached"}

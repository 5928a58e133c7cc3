import numpy as np
import pytest

from stoclin import (GareProblem, InvalidInputError, SystemQuad, compare_gare,
                     epsilon_homotopy_strong, gare_residual, is_stabilizable,
                     solve_gare_maximal)


def random_stabilizable(rng, nmax=3):
    while True:
        n = int(rng.integers(1, nmax + 1))
        m = int(rng.integers(1, 3))
        sys = SystemQuad(A=rng.standard_normal((n, n)),
                         B=rng.standard_normal((n, m)),
                         C=0.4 * rng.standard_normal((n, n)),
                         D=0.4 * rng.standard_normal((n, m)))
        if is_stabilizable(sys).decision == "stabilizable":
            return sys


def random_weights(rng, n, m, shift=0.2):
    M = rng.standard_normal((n, n))
    Q = M @ M.T + shift * np.eye(n)
    Mr = rng.standard_normal((m, m))
    R = Mr @ Mr.T + shift * np.eye(m)
    return Q, R


def test_scalar_two_solution_structure():
    # q = 0, r = 1, d != 0, stabilizable: solutions are 0 and
    # (2a + c^2) / (b^2 + 2bcd - 2ad^2); the maximal one is their max
    rng = np.random.default_rng(0)
    count = 0
    while count < 40:
        a, b, c, d = rng.standard_normal(4)
        if abs(d) < 0.05:
            continue
        crit = b * b + 2 * b * c * d - 2 * a * d * d
        if crit <= 1e-3:
            continue
        count += 1
        sys = SystemQuad(A=[[a]], B=[[b]], C=[[c]], D=[[d]])
        prob = GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]])
        p2 = (2 * a + c * c) / crit
        assert gare_residual(prob, [[0.0]]) <= 1e-12
        assert gare_residual(prob, [[p2]]) <= 1e-10 * (1 + abs(p2))
        sol = solve_gare_maximal(prob)
        assert abs(sol.P[0, 0] - max(0.0, p2)) <= 1e-8


def test_scalar_classification_cases():
    # stabilizable with 2a + c^2 < 0: p = 0 is the maximal solution and the
    # zero gain already stabilizes
    sys = SystemQuad(A=[[-1.0]], B=[[1.0]], C=[[0.5]], D=[[1.0]])
    sol = solve_gare_maximal(GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]]))
    assert abs(sol.P[0, 0]) <= 1e-8
    assert sol.classification == "feedback-stabilizing"

    # 2a + c^2 > 0: the maximal solution is p2 > 0
    sys = SystemQuad(A=[[1.0]], B=[[2.0]], C=[[0.0]], D=[[1.0]])
    sol = solve_gare_maximal(GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]]))
    assert abs(sol.P[0, 0] - 1.0) <= 1e-8
    assert sol.classification in ("strong", "weakly-stabilizing",
                                  "feedback-stabilizing")


def test_maximal_dominates_other_solutions():
    # every residual-zero P we can find satisfies P <= P_max
    sys = SystemQuad(A=[[1.0]], B=[[2.0]], C=[[0.0]], D=[[1.0]])
    prob = GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]])
    sol = solve_gare_maximal(prob)
    assert sol.P[0, 0] >= 0.0 - 1e-10
    assert sol.P[0, 0] >= 1.0 - 1e-8


def test_newton_polish_reaches_tolerance():
    rng = np.random.default_rng(1)
    for _ in range(15):
        sys = random_stabilizable(rng)
        Q, R = random_weights(rng, sys.n, sys.m)
        prob = GareProblem(sys=sys, Q=Q, R=R)
        sol = solve_gare_maximal(prob)
        assert sol.residual <= prob.tol_gare
        # gain consistency: K = -(R + D'PD)^-1 (B'P + D'PC)
        W = R + sys.D.T @ sol.P @ sys.D
        S = sol.P @ sys.B + sys.C.T @ sol.P @ sys.D
        assert np.allclose(sol.K, -np.linalg.solve(W, S.T), atol=1e-8)


def test_positive_definite_weights_give_stabilizing_solution():
    rng = np.random.default_rng(2)
    for _ in range(10):
        sys = random_stabilizable(rng)
        Q, R = random_weights(rng, sys.n, sys.m, shift=0.5)
        sol = solve_gare_maximal(GareProblem(sys=sys, Q=Q, R=R))
        assert sol.classification == "feedback-stabilizing"
        assert np.min(np.linalg.eigvalsh(sol.P)) > 0


def test_homotopy_limit_matches_direct_solution():
    rng = np.random.default_rng(3)
    for _ in range(8):
        sys = random_stabilizable(rng)
        Q, R = random_weights(rng, sys.n, sys.m)
        prob = GareProblem(sys=sys, Q=Q, R=R)
        direct = solve_gare_maximal(prob)
        hom = epsilon_homotopy_strong(prob)
        assert np.linalg.norm(hom.P - direct.P) <= 1e-6 * (1 + np.linalg.norm(direct.P))
        assert hom.abscissa <= 1e-8


def test_compare_respects_weight_ordering():
    rng = np.random.default_rng(4)
    for _ in range(8):
        sys = random_stabilizable(rng)
        Q, R = random_weights(rng, sys.n, sys.m, shift=0.4)
        Qh = Q - 0.2 * np.eye(sys.n)
        Rh = R - 0.2 * np.eye(sys.m)
        prob = GareProblem(sys=sys, Q=Q, R=R)
        prob_hat = GareProblem(sys=sys, Q=Qh, R=Rh)
        P_hat = solve_gare_maximal(prob_hat).P
        res = compare_gare(prob, prob_hat, P_hat)
        assert res["result"] == "verified"
        assert res["min_eig_gap"] >= -1e-7


def test_compare_rejects_wrong_preconditions():
    sys = SystemQuad(A=[[1.0]], B=[[2.0]], C=[[0.0]], D=[[1.0]])
    prob = GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]])
    bigger = GareProblem(sys=sys, Q=[[1.0]], R=[[1.0]])
    with pytest.raises(InvalidInputError):
        compare_gare(prob, bigger, [[0.0]])   # hat weights dominate
    with pytest.raises(InvalidInputError):
        compare_gare(bigger, prob, [[123.0]])  # P_hat is not a solution


def test_maximal_route_requires_stabilizability():
    sys = SystemQuad(A=[[1.0]], B=[[0.0]], C=[[0.0]], D=[[0.0]])
    with pytest.raises(InvalidInputError):
        solve_gare_maximal(GareProblem(sys=sys, Q=[[1.0]], R=[[1.0]]))


def test_residual_requires_well_posed_inner_inverse():
    sys = SystemQuad(A=[[0.0]], B=[[1.0]], C=[[0.0]], D=[[1.0]])
    prob = GareProblem(sys=sys, Q=[[0.0]], R=[[1.0]])
    with pytest.raises(InvalidInputError):
        gare_residual(prob, [[-2.0]])   # r + d^2 p = -1 < 0

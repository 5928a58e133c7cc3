import numpy as np
import pytest

from stoclin import (InternalConsistencyError, build_drift_operator,
                     is_ms_stable, is_weakly_stable, spectral_abscissa,
                     spectrum)


def test_spectrum_matches_numpy_eigvals():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        M = rng.standard_normal((n, n))
        ours = np.sort_complex(spectrum(M).eigenvalues)
        ref = np.sort_complex(np.linalg.eigvals(M))
        assert np.allclose(ours, ref, atol=1e-8 * (1 + np.abs(ref).max()))


def test_spectrum_multiplicities_jordan_block():
    # 2x2 Jordan block: algebraic 2, geometric 1
    J = np.array([[0.0, 1.0], [0.0, 0.0]])
    groups = spectrum(J).groups
    assert len(groups) == 1
    lam, alg, geo = groups[0]
    assert abs(lam) <= 1e-8 and alg == 2 and geo == 1


def test_spectrum_multiplicities_semisimple():
    groups = spectrum(np.zeros((3, 3))).groups
    assert groups == ((0j, 3, 3),)


def test_weak_stability_semisimple_critical():
    assert is_weakly_stable(np.diag([-1.0, 0.0])).verdict == "weakly-stable"
    J = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    assert is_weakly_stable(J).verdict == "unstable"
    assert is_weakly_stable(np.diag([-1.0, -2.0])).verdict == "stable"
    assert is_weakly_stable(np.diag([1.0, -2.0])).verdict == "unstable"


def test_spectral_abscissa():
    M = np.array([[-3.0, 10.0], [0.0, -0.5]])
    assert abs(spectral_abscissa(M) + 0.5) <= 1e-9


def test_is_ms_stable_scalar_criterion():
    # scalar dx = a x dt + c x dw is ms-stable iff 2a + c^2 < 0
    for a, c in [(-1.0, 1.0), (-1.0, 1.5), (-0.4, 1.0), (0.1, 0.0)]:
        verdict = is_ms_stable(np.array([[a]]), [np.array([[c]])])
        assert verdict.stable == (2 * a + c * c < 0)
        assert abs(verdict.abscissa - (2 * a + c * c)) <= 1e-8


def test_is_ms_stable_noise_can_destabilize():
    A = -np.eye(2)
    C = np.diag([3.0, 4.0])
    verdict = is_ms_stable(A, [C])
    assert verdict.verdict == "unstable"
    assert abs(verdict.abscissa - 14.0) <= 1e-8


def test_ms_stability_lyapunov_cross_check_agrees_on_random_systems():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        A = rng.standard_normal((n, n)) - 2.0 * np.eye(n)
        C = 0.4 * rng.standard_normal((n, n))
        # must not raise InternalConsistencyError
        is_ms_stable(A, [C])


def test_drift_lift_spectrum_known_diagonal():
    # A = diag(a1, a2), C = diag(c1, c2): lift eigenvalues are
    # 2 a_i + c_i^2 on the diagonal entries and a1 + a2 + c1 c2 on the cross
    a1, a2, c1, c2 = -1.0, -2.0, 0.5, 0.7
    L = build_drift_operator(np.diag([a1, a2]), [np.diag([c1, c2])])
    vals = np.sort(np.linalg.eigvals(L.M).real)
    expected = np.sort([2 * a1 + c1 ** 2, a1 + a2 + c1 * c2, 2 * a2 + c2 ** 2])
    assert np.allclose(vals, expected, atol=1e-10)

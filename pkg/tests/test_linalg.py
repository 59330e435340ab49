"""Dense-kernel tests: exact small cases plus residual oracles."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopftc.errors import NotHurwitzError, NotSymmetricError, \
    SingularMatrixError
from coopftc.linalg import (is_hurwitz, is_negative_definite, kron,
                            solve_linear, solve_lyapunov, sym_eigendecomp)


# --- solve_linear -----------------------------------------------------------

def test_solve_identity_returns_rhs():
    b = np.array([[1.0], [-2.0], [3.5]])
    npt.assert_allclose(solve_linear(np.eye(3), b), b, rtol=0, atol=0)


def test_solve_diagonal():
    X = solve_linear(np.diag([2.0, 4.0]), np.array([[2.0], [4.0]]))
    npt.assert_allclose(X, np.array([[1.0], [1.0]]), atol=1e-14)


def test_solve_residual_random_5x5():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    B = rng.normal(size=(5, 3))
    X = solve_linear(A, B)
    assert np.linalg.norm(A @ X - B) <= 1e-9 * (1 + np.linalg.norm(B))


def test_solve_singular_raises():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve_linear(A, np.eye(2))


def test_solve_vector_rhs():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    x = solve_linear(A, np.array([4.0, 3.0]))
    npt.assert_allclose(A @ x, [4.0, 3.0], atol=1e-12)


# --- sym_eigendecomp --------------------------------------------------------

def test_eig_identity():
    eig = sym_eigendecomp(np.eye(4))
    npt.assert_allclose(eig.eigenvalues, np.ones(4), atol=1e-12)


def test_eig_diagonal_sorted_ascending():
    eig = sym_eigendecomp(np.diag([3.0, 1.0, 2.0]))
    npt.assert_allclose(eig.eigenvalues, [1.0, 2.0, 3.0], atol=1e-12)


def test_eig_reconstruction_random_6x6():
    rng = np.random.default_rng(2)
    S = rng.normal(size=(6, 6))
    S = S + S.T
    eig = sym_eigendecomp(S)
    recon = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
    assert np.linalg.norm(recon - S) <= 1e-9 * np.linalg.norm(S)
    assert np.linalg.norm(eig.eigenvectors.T @ eig.eigenvectors
                          - np.eye(6)) <= 1e-10


def test_eig_rejects_asymmetric():
    with pytest.raises(NotSymmetricError):
        sym_eigendecomp(np.array([[1.0, 2.0], [0.0, 1.0]]))


# --- kron -------------------------------------------------------------------

def test_kron_identity_blocks():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    K = kron(np.eye(2), B)
    npt.assert_allclose(K[:2, :2], B)
    npt.assert_allclose(K[2:, 2:], B)
    npt.assert_allclose(K[:2, 2:], 0 * B)


def test_kron_scalar():
    B = np.arange(6.0).reshape(2, 3)
    npt.assert_allclose(kron(np.array([[2.5]]), B), 2.5 * B)


def test_kron_index_formula():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(2, 3))
    B = rng.normal(size=(3, 2))
    K = kron(A, B)
    p, q = B.shape
    for i in range(2):
        for j in range(3):
            for k in range(p):
                for l in range(q):
                    assert K[i * p + k, j * q + l] == A[i, j] * B[k, l]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_kron_mixed_product(seed):
    rng = np.random.default_rng(seed)
    n, m, r = rng.integers(1, 4, size=3)
    A = rng.normal(size=(n, m))
    C = rng.normal(size=(m, r))
    B = rng.normal(size=(m, n))
    D = rng.normal(size=(n, m))
    lhs = kron(A, B) @ kron(C, D)
    rhs = kron(A @ C, B @ D)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


# --- solve_lyapunov ---------------------------------------------------------

def test_lyapunov_minus_identity():
    P = solve_lyapunov(-np.eye(3), 2 * np.eye(3))
    npt.assert_allclose(P, np.eye(3), atol=1e-12)


def test_lyapunov_diagonal():
    P = solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2))
    npt.assert_allclose(P, np.diag([0.5, 0.25]), atol=1e-12)


def test_lyapunov_residual_random_hurwitz():
    rng = np.random.default_rng(4)
    Phi = rng.normal(size=(4, 4)) - 4 * np.eye(4)
    Q = rng.normal(size=(4, 4))
    Q = Q @ Q.T + np.eye(4)
    P = solve_lyapunov(Phi, Q)
    res = np.linalg.norm(Phi.T @ P + P @ Phi + Q)
    assert res <= 1e-8 * np.linalg.norm(Q)
    npt.assert_allclose(P, P.T, atol=1e-10 * np.abs(P).max())
    assert sym_eigendecomp(P).eigenvalues[0] > 0


def test_lyapunov_rejects_unstable():
    with pytest.raises(NotHurwitzError):
        solve_lyapunov(np.array([[1.0]]), np.array([[1.0]]))


# --- is_hurwitz -------------------------------------------------------------

def test_hurwitz_minus_identity():
    assert is_hurwitz(-np.eye(2))


def test_hurwitz_rejects_marginal_rotation():
    assert not is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _char_poly_max_real(A):
    """Max real part of eigenvalues via characteristic-polynomial roots."""
    n = A.shape[0]
    if n == 2:
        coeffs = [1.0, -np.trace(A), np.linalg.det(A)]
    elif n == 3:
        minors = sum(np.linalg.det(A[np.ix_(rows, rows)])
                     for rows in ([0, 1], [0, 2], [1, 2]))
        coeffs = [1.0, -np.trace(A), minors, -np.linalg.det(A)]
    else:
        raise ValueError(n)
    return max(r.real for r in np.roots(coeffs))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_hurwitz_matches_char_poly_roots(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    top = _char_poly_max_real(A)
    if abs(top) < 1e-6:  # too close to the axis to classify reliably
        return
    assert is_hurwitz(A) == (top < 0)


# --- is_negative_definite ---------------------------------------------------

def test_nd_minus_identity_with_margin():
    assert is_negative_definite(-np.eye(3), margin=0.5)


def test_nd_zero_matrix_is_not_strict():
    assert not is_negative_definite(np.zeros((2, 2)), margin=0.0)


def test_nd_margin_boundary():
    S = -0.4 * np.eye(2)
    assert is_negative_definite(S, margin=0.3)
    assert not is_negative_definite(S, margin=0.5)


def test_nd_propagates_asymmetry():
    with pytest.raises(NotSymmetricError):
        is_negative_definite(np.array([[0.0, 1.0], [-1.0, 0.0]]))

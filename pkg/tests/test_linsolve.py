import numpy as np
import pytest
import scipy.sparse as sp

from qvi_lab.core.errors import SingularMatrixError
from qvi_lab.core.linsolve import factorize, solve_dense, solve_linear, solve_sparse


def test_cg_on_symmetric_operator(laplace20):
    b = np.ones(laplace20.size)
    x, report = solve_sparse(laplace20.matrix, b, tol=1e-12)
    assert report.converged
    assert report.method == "cg"
    np.testing.assert_allclose(x, np.linalg.solve(laplace20.to_dense(), b), rtol=1e-9)


def test_gmres_on_advection(advection2d):
    b = np.linspace(-1.0, 1.0, advection2d.size)
    x, report = solve_sparse(advection2d.matrix, b, tol=1e-12)
    assert report.converged
    assert report.method in ("gmres", "dense_lu")
    np.testing.assert_allclose(advection2d.matrix @ x, b, atol=1e-9)


def test_zero_diagonal_falls_back_to_lu():
    matrix = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    x, report = solve_sparse(matrix, np.array([2.0, 3.0]))
    assert report.method == "dense_lu"
    np.testing.assert_allclose(x, [3.0, 2.0])


def test_dense_singular():
    with pytest.raises(SingularMatrixError):
        solve_dense(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_solve_linear_dispatch(laplace5):
    b = np.arange(5.0)
    dense = laplace5.to_dense()
    np.testing.assert_allclose(solve_linear(dense, b), solve_linear(laplace5.matrix, b, tol=1e-12), rtol=1e-8)


def test_bad_tolerance(laplace5):
    with pytest.raises(ValueError):
        solve_sparse(laplace5.matrix, np.ones(5), tol=0.0)


def test_factorize_reuses_lu(laplace5):
    solve = factorize(laplace5.matrix)
    rhs = np.eye(5)
    np.testing.assert_allclose(solve(rhs), np.linalg.inv(laplace5.to_dense()), atol=1e-12)

"""Linear solves: preconditioned Krylov for sparse systems, pivoted LU for dense ones."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qvi_lab.core.errors import ConvergenceError, SingularMatrixError

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
PIVOT_THRESHOLD = 1e-14
GMRES_RESTART = 30


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a linear solve."""

    iterations: int
    final_residual: float
    converged: bool
    method: str = "cg"


def _is_symmetric(matrix: sp.spmatrix) -> bool:
    scale = abs(matrix).max() if matrix.nnz else 0.0
    if scale == 0.0:
        return True
    diff = matrix - matrix.T
    return (abs(diff).max() if diff.nnz else 0.0) <= 1e-14 * scale


def solve_dense(matrix, b) -> np.ndarray:
    """
    Solve a dense system by LU with partial pivoting.

    Raises:
        SingularMatrixError: If a pivot falls below 1e-14 in magnitude
        ValueError: If the system is not square or exceeds the dense limit
    """
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    n = dense.shape[0]
    if dense.ndim != 2 or dense.shape[1] != n:
        raise ValueError(f"Matrix must be square, got shape {dense.shape}")
    if n > DENSE_LIMIT:
        raise ValueError(f"Dense solves are limited to {DENSE_LIMIT} unknowns, got {n}")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(dense, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if n and pivots.min() < PIVOT_THRESHOLD:
        raise SingularMatrixError(
            f"Matrix is singular to working precision (min pivot {pivots.min():.3e})",
            iterations=0,
        )
    return sla.lu_solve((lu, piv), np.asarray(b, dtype=float))


def solve_sparse(matrix, b, tol: float = 1e-10, x0=None) -> tuple[np.ndarray, SolveReport]:
    """
    Solve M x = b with a Krylov method, falling back to dense LU at desk scale.

    CG with a Jacobi preconditioner is used for symmetric matrices with a positive
    diagonal, restarted GMRES otherwise. The true residual is re-checked against
    tol * (1 + ||b||).

    Args:
        matrix: Square sparse (or dense) matrix
        b: Right-hand side
        tol: Relative tolerance, must be positive
        x0: Optional initial guess

    Returns:
        Tuple of (solution, SolveReport)

    Raises:
        ConvergenceError: If no method reaches the tolerance within 10*n iterations
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    matrix = sp.csr_matrix(matrix)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"Matrix must be square, got shape {matrix.shape}")
    b = np.asarray(b, dtype=float)
    bound = tol * (1.0 + np.linalg.norm(b))
    max_iter = 10 * max(n, 1)

    diag = matrix.diagonal()
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x = None
    method = "cg"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if np.all(diag > 0) and _is_symmetric(matrix):
            precond = spla.LinearOperator((n, n), matvec=lambda r: r / diag)
            x, _ = spla.cg(
                matrix, b, x0=x0, rtol=tol, atol=tol, maxiter=max_iter, M=precond, callback=count
            )
        elif np.all(diag != 0):
            method = "gmres"
            restart = min(GMRES_RESTART, max(n, 1))
            x, _ = spla.gmres(
                matrix,
                b,
                x0=x0,
                rtol=tol,
                atol=tol,
                restart=restart,
                maxiter=max(1, max_iter // restart),
                callback=count,
                callback_type="pr_norm",
            )

    residual = np.linalg.norm(b - matrix @ x) if x is not None else np.inf
    if np.isfinite(residual) and residual <= bound:
        return x, SolveReport(iterations, float(residual), True, method)

    if n <= DENSE_LIMIT:
        logger.warning(
            f"{method} stopped at residual {residual:.3e} > {bound:.3e}; falling back to dense LU"
        )
        try:
            x = solve_dense(matrix, b)
        except SingularMatrixError as e:
            raise ConvergenceError(
                f"Linear solve did not converge: {e}", iterations=iterations, residual=residual
            ) from e
        residual = np.linalg.norm(b - matrix @ x)
        if residual <= bound:
            return x, SolveReport(iterations, float(residual), True, "dense_lu")

    raise ConvergenceError(
        f"Linear solve did not converge after {iterations} iterations "
        f"(residual {residual:.3e}, required {bound:.3e})",
        iterations=iterations,
        residual=float(residual),
    )


def solve_linear(matrix, b, tol: float = 1e-10) -> np.ndarray:
    """Dispatch to the sparse or dense path depending on the matrix type."""
    if sp.issparse(matrix):
        x, _ = solve_sparse(matrix, b, tol)
        return x
    x = solve_dense(matrix, b)
    residual = np.linalg.norm(np.asarray(matrix) @ x - b)
    if not np.isfinite(residual):
        raise ConvergenceError("Dense solve produced a non-finite solution", residual=residual)
    return x


def factorize(matrix):
    """
    Sparse LU factorization for repeated solves with one matrix.

    Returns:
        Callable mapping right-hand sides (vector or matrix) to solutions

    Raises:
        SingularMatrixError: If the matrix is exactly singular
    """
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as e:
        raise SingularMatrixError(f"Sparse LU failed: {e}") from e
    return lu.solve

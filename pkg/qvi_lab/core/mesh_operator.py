"""
Uniform finite-difference grids and elliptic operators on the unit interval/square.

Nodes are the interior points of (0, 1)^dim with homogeneous Dirichlet boundary
values. In 2D the node index is ``i + n*j`` (x runs fastest). StateVector and
DualVector are plain float64 arrays; their pairing is the Euclidean dot product.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from qvi_lab.core.errors import ConfigError, ConvergenceError, GridMismatchError

logger = logging.getLogger(__name__)

StateVector = NDArray[np.float64]
DualVector = NDArray[np.float64]

# Exact dense eigen-solves below this size, ARPACK above it
DENSE_SPECTRUM_LIMIT = 500
SPECTRAL_MAX_ITER = 200
SPECTRAL_TOL = 1e-10
# Relative margin applied to certified spectral constants
CERTIFICATE_MARGIN = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform grid of interior nodes."""

    dim: int
    n_per_axis: int
    h: float
    node_count: int

    @property
    def weight(self) -> float:
        """Lumped L2 weight of one node (h^dim)."""
        return self.h**self.dim

    def coordinates(self) -> NDArray[np.float64]:
        """Node coordinates, shape (node_count, dim)."""
        axis = self.h * np.arange(1, self.n_per_axis + 1)
        if self.dim == 1:
            return axis[:, None]
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def zeros(self) -> StateVector:
        return np.zeros(self.node_count)


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse elliptic operator with certified coercivity and boundedness constants."""

    matrix: sp.csr_matrix
    c_a: float
    c_b: float
    is_t_monotone: bool
    grid: Grid

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: StateVector) -> DualVector:
        check_same_grid(u, size=self.size)
        return self.matrix @ u

    def apply_transpose(self, v: StateVector) -> DualVector:
        check_same_grid(v, size=self.size)
        return self.matrix.T @ v

    def transpose(self) -> "DiscreteOperator":
        """Adjoint operator; symmetric part, norm and sign pattern are unchanged."""
        return DiscreteOperator(
            matrix=self.matrix.T.tocsr(),
            c_a=self.c_a,
            c_b=self.c_b,
            is_t_monotone=self.is_t_monotone,
            grid=self.grid,
        )

    def to_dense(self) -> NDArray[np.float64]:
        return self.matrix.toarray()


def build_grid(dim: int, n_per_axis: int) -> Grid:
    """
    Build the uniform grid of interior nodes.

    Args:
        dim: Spatial dimension (1 or 2)
        n_per_axis: Interior nodes per axis

    Returns:
        Grid with h = 1/(n_per_axis + 1)

    Raises:
        ConfigError: If dim is not 1 or 2, or n_per_axis < 1
    """
    if dim not in (1, 2):
        raise ConfigError(f"Grid dimension must be 1 or 2, got {dim}")
    if int(n_per_axis) != n_per_axis or n_per_axis < 1:
        raise ConfigError(f"n_per_axis must be a positive integer, got {n_per_axis}")
    n = int(n_per_axis)
    return Grid(dim=dim, n_per_axis=n, h=1.0 / (n + 1), node_count=n**dim)


def _axis_stencil(n: int, h: float, diffusion: float, velocity: float) -> sp.csr_matrix:
    """Second differences plus first-order upwind differences along one axis."""
    main = np.full(n, 2.0 * diffusion / h**2 + abs(velocity) / h)
    if n == 1:
        return sp.csr_matrix(main.reshape(1, 1))
    # backward difference for positive velocity, forward for negative
    lower = np.full(n - 1, -diffusion / h**2 - max(velocity, 0.0) / h)
    upper = np.full(n - 1, -diffusion / h**2 + min(velocity, 0.0) / h)
    return sp.diags([lower, main, upper], [-1, 0, 1], shape=(n, n), format="csr")


def _off_diagonals_nonpositive(matrix: sp.spmatrix) -> bool:
    coo = matrix.tocoo()
    off = coo.row != coo.col
    return bool(np.all(coo.data[off] <= 0.0))


def symmetric_eigenvalue(matrix, which: str) -> float:
    """
    Smallest ("min") or largest ("max") eigenvalue of a symmetric matrix.

    Dense ``eigvalsh`` at desk scale; ARPACK Lanczos otherwise (shift-invert about
    zero for the smallest eigenvalue), with a deterministic start vector.
    """
    n = matrix.shape[0]
    if n <= DENSE_SPECTRUM_LIMIT:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        idx = 0 if which == "min" else n - 1
        return float(sla.eigvalsh(dense, subset_by_index=[idx, idx])[0])

    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        if which == "min":
            vals = spla.eigsh(
                sp.csc_matrix(matrix),
                k=1,
                sigma=0.0,
                which="LM",
                v0=v0,
                maxiter=SPECTRAL_MAX_ITER,
                tol=SPECTRAL_TOL,
                return_eigenvectors=False,
            )
        else:
            vals = spla.eigsh(
                matrix,
                k=1,
                which="LA",
                v0=v0,
                maxiter=SPECTRAL_MAX_ITER,
                tol=SPECTRAL_TOL,
                return_eigenvectors=False,
            )
    except spla.ArpackNoConvergence as e:
        raise ConvergenceError(
            f"Eigenvalue estimate ({which}) did not converge in {SPECTRAL_MAX_ITER} iterations",
            iterations=SPECTRAL_MAX_ITER,
        ) from e
    return float(vals[0])


def spectral_constants(matrix: sp.spmatrix) -> tuple[float, float]:
    """
    Certified coercivity and boundedness constants of a sparse matrix.

    Returns:
        (c_a, c_b) with c_a = lambda_min((M + M^T)/2) and c_b = ||M||_2
    """
    sym = ((matrix + matrix.T) * 0.5).tocsr()
    lam_min = symmetric_eigenvalue(sym, "min")
    gram = (matrix.T @ matrix).tocsr()
    lam_max = symmetric_eigenvalue(gram, "max")
    c_a = lam_min * (1.0 - CERTIFICATE_MARGIN) if lam_min > 0 else lam_min
    c_b = np.sqrt(max(lam_max, 0.0)) * (1.0 + CERTIFICATE_MARGIN)
    return c_a, float(c_b)


def inverse_norm(matrix) -> float:
    """Spectral norm of the inverse, 1 / sigma_min(M)."""
    n = matrix.shape[0]
    if n <= DENSE_SPECTRUM_LIMIT:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        sigma_min = float(sla.svdvals(dense)[-1])
    else:
        gram = (matrix.T @ matrix).tocsr()
        sigma_min = float(np.sqrt(max(symmetric_eigenvalue(gram, "min"), 0.0)))
    if sigma_min <= 0.0:
        return float("inf")
    return 1.0 / sigma_min


def assemble_operator(
    grid: Grid,
    diffusion: float = 1.0,
    advection: Optional[Sequence[float]] = None,
    reaction: float = 0.0,
    require_t_monotone: bool = True,
) -> DiscreteOperator:
    """
    Assemble -diffusion*Laplace + advection.grad + reaction on the grid.

    Args:
        grid: Grid to discretize on
        diffusion: Positive diffusion coefficient
        advection: Velocity per axis (upwinded); zeros if None
        reaction: Nonnegative reaction coefficient
        require_t_monotone: Reject operators whose off-diagonals are not all <= 0

    Returns:
        DiscreteOperator with certified c_a, c_b

    Raises:
        ConfigError: Invalid coefficients, c_a <= 0, or failed sign test
    """
    if not diffusion > 0:
        raise ConfigError(f"diffusion must be positive, got {diffusion}")
    if reaction < 0:
        raise ConfigError(f"reaction must be nonnegative, got {reaction}")
    velocity = list(advection) if advection is not None else [0.0] * grid.dim
    if len(velocity) != grid.dim:
        raise ConfigError(f"advection needs {grid.dim} components, got {len(velocity)}")

    n, h = grid.n_per_axis, grid.h
    if grid.dim == 1:
        matrix = _axis_stencil(n, h, diffusion, velocity[0])
    else:
        eye = sp.identity(n, format="csr")
        matrix = sp.kron(eye, _axis_stencil(n, h, diffusion, velocity[0])) + sp.kron(
            _axis_stencil(n, h, diffusion, velocity[1]), eye
        )
    if reaction:
        matrix = matrix + reaction * sp.identity(grid.node_count)
    matrix = sp.csr_matrix(matrix)
    matrix.eliminate_zeros()

    is_t_monotone = _off_diagonals_nonpositive(matrix)
    if require_t_monotone and not is_t_monotone:
        raise ConfigError("Off-diagonal sign test failed: operator is not T-monotone")

    c_a, c_b = spectral_constants(matrix)
    if c_a <= 0:
        raise ConfigError(f"Operator is not coercive (c_a = {c_a:.3e})")
    logger.debug(f"Assembled operator on {grid.node_count} nodes: c_a={c_a:.6e}, c_b={c_b:.6e}")

    return DiscreteOperator(
        matrix=matrix, c_a=c_a, c_b=c_b, is_t_monotone=is_t_monotone, grid=grid
    )


def check_same_grid(*vectors: NDArray, size: Optional[int] = None) -> None:
    """Raise GridMismatchError unless all vectors have the same length (and ``size``)."""
    shapes = {np.shape(v) for v in vectors}
    if size is not None:
        shapes.add((size,))
    if len(shapes) > 1:
        raise GridMismatchError(f"Grid mismatch between vectors of shapes {sorted(shapes)}")


def positive_part(v: StateVector) -> StateVector:
    return np.maximum(v, 0.0)


def negative_part(v: StateVector) -> StateVector:
    """max(-v, 0), so that v = v+ - v-."""
    return np.maximum(-v, 0.0)


def lattice_sup(v: StateVector, w: StateVector) -> StateVector:
    check_same_grid(v, w)
    return np.maximum(v, w)


def lattice_inf(v: StateVector, w: StateVector) -> StateVector:
    check_same_grid(v, w)
    return np.minimum(v, w)


def pair(f: DualVector, v: StateVector) -> float:
    """Duality pairing <f, v> (dot product of nodal coefficients)."""
    check_same_grid(f, v)
    return float(np.dot(f, v))


def h_inner(grid: Grid, v: StateVector, w: StateVector) -> float:
    """Lumped L2(Omega) inner product."""
    check_same_grid(v, w, size=grid.node_count)
    return grid.weight * float(np.dot(v, w))


def h_norm(grid: Grid, v: StateVector) -> float:
    return float(np.sqrt(h_inner(grid, v, v)))

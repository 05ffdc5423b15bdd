"""
Obstacle-problem VIs with a fixed upper obstacle and VIs over discrete critical cones.

The VI solution map S(f, psi) returns y <= psi with xi = f - Ay >= 0 and
xi_i * (psi_i - y_i) = 0. The default solver is a primal-dual active set method
(semismooth Newton on min(psi - y, xi / c) = 0); projected SOR is the fallback.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from qvi_lab.core.errors import ConfigError, ConvergenceError
from qvi_lab.core.linsolve import solve_sparse
from qvi_lab.core.mesh_operator import DiscreteOperator, DualVector, StateVector, check_same_grid

logger = logging.getLogger(__name__)

COMPLEMENTARITY_PARAMETER = 1.0
SOR_OMEGA = 1.5
SOR_MAX_SWEEPS = 100_000
THRESHOLD_SCALE = 1e-8
INNER_SOLVE_TOL = 1e-12


@dataclass(frozen=True)
class ResidualReport:
    """Feasibility, dual sign and complementarity residuals of a (Q)VI candidate."""

    feasibility: float
    dual: float
    complementarity: float

    @property
    def worst(self) -> float:
        return max(self.feasibility, self.dual, self.complementarity)

    def passes(self, tol: float) -> bool:
        return self.worst <= tol

    def to_dict(self) -> dict[str, float]:
        return {
            "feasibility": self.feasibility,
            "dual": self.dual,
            "complementarity": self.complementarity,
        }


@dataclass(frozen=True)
class ViReport:
    iterations: int
    method: str
    residuals: ResidualReport


@dataclass(frozen=True)
class ViSolution:
    """Solution of the obstacle problem y = S(f, psi)."""

    y: StateVector
    xi: DualVector
    active: np.ndarray
    report: ViReport
    thresholds: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CriticalConeSpec:
    """
    Discrete critical cone shifted by an affine offset.

    Members v satisfy v - shift = 0 on strongly_active, v - shift <= 0 on
    biactive and are free on inactive.
    """

    strongly_active: np.ndarray
    biactive: np.ndarray
    inactive: np.ndarray
    shift: StateVector

    def __post_init__(self):
        n = len(self.shift)
        joined = np.concatenate(
            [np.asarray(s, dtype=int) for s in (self.strongly_active, self.biactive, self.inactive)]
        )
        if len(joined) != n or not np.array_equal(np.sort(joined), np.arange(n)):
            raise ConfigError("Critical cone index sets must partition the nodes")

    def with_shift(self, shift: StateVector) -> "CriticalConeSpec":
        return replace(self, shift=np.asarray(shift, dtype=float))


def _as_matrix(A) -> sp.csr_matrix:
    if isinstance(A, DiscreteOperator):
        return A.matrix
    return sp.csr_matrix(A)


def thresholds_for(f: DualVector, psi: StateVector) -> dict[str, float]:
    """Active-set, strong-activity and complementarity thresholds."""
    finite = psi[np.isfinite(psi)]
    psi_scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    f_scale = float(np.max(np.abs(f))) if len(f) else 0.0
    tol_act = THRESHOLD_SCALE * (1.0 + psi_scale)
    tol_str = THRESHOLD_SCALE * (1.0 + f_scale)
    return {
        "tol_act": tol_act,
        "tol_str": tol_str,
        "tol_comp": THRESHOLD_SCALE * (1.0 + psi_scale) * (1.0 + f_scale),
    }


def complementarity_products(xi: DualVector, gap: StateVector) -> np.ndarray:
    """|xi_i * gap_i|, with infinite gaps contributing only where xi_i != 0."""
    finite = np.isfinite(gap)
    out = np.zeros(len(xi))
    out[finite] = np.abs(xi[finite] * gap[finite])
    out[~finite & (xi != 0)] = np.inf
    return out


def vi_residual(A, f: DualVector, psi: StateVector, y: StateVector) -> ResidualReport:
    """Residual triple of the complementarity system for y = S(f, psi)."""
    matrix = _as_matrix(A)
    check_same_grid(f, psi, y, size=matrix.shape[0])
    xi = f - matrix @ y
    excess = y - psi
    feasibility = float(np.max(excess, initial=0.0))
    dual = float(np.max(-xi, initial=0.0))
    products = complementarity_products(xi, psi - y)
    return ResidualReport(
        feasibility=max(feasibility, 0.0),
        dual=max(dual, 0.0),
        complementarity=float(np.max(products, initial=0.0)),
    )


def _pdas(matrix: sp.csr_matrix, f, psi, tol: float) -> tuple[np.ndarray, int, bool]:
    """Primal-dual active set iteration; the flag is False when it cycles or stalls."""
    n = len(f)
    y, _ = solve_sparse(matrix, f, tol)
    xi = np.zeros(n)
    active = xi + COMPLEMENTARITY_PARAMETER * (y - psi) > 0
    seen = {active.tobytes()}
    max_iter = max(50, 2 * n)

    for iteration in range(1, max_iter + 1):
        inactive = ~active
        y = np.where(active, psi, 0.0)
        if inactive.any():
            idx = np.flatnonzero(inactive)
            rhs = f[idx] - matrix[idx] @ y
            sub = matrix[idx][:, idx]
            y[idx], _ = solve_sparse(sub, rhs, tol)
        xi = f - matrix @ y

        new_active = xi + COMPLEMENTARITY_PARAMETER * (y - psi) > 0
        logger.debug(f"PDAS iteration {iteration}: {int(new_active.sum())} active nodes")
        if np.array_equal(new_active, active):
            return y, iteration, True
        key = new_active.tobytes()
        if key in seen:
            logger.warning(f"PDAS cycled after {iteration} iterations")
            return y, iteration, False
        seen.add(key)
        active = new_active

    return y, max_iter, False


def projected_sor(
    A,
    f: DualVector,
    psi: StateVector,
    omega: float = SOR_OMEGA,
    tol: float = 1e-13,
    max_sweeps: int = SOR_MAX_SWEEPS,
    y0: Optional[StateVector] = None,
) -> tuple[StateVector, int]:
    """
    Projected successive over-relaxation for y <= psi, xi = f - Ay >= 0.

    Returns:
        Tuple of (iterate, sweeps used)

    Raises:
        ConvergenceError: If the update size stays above tol after max_sweeps
    """
    matrix = _as_matrix(A)
    n = matrix.shape[0]
    diag = matrix.diagonal()
    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    y = np.minimum(np.zeros(n) if y0 is None else np.array(y0, dtype=float), psi)

    delta = np.inf
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            r = f[i] - data[lo:hi] @ y[indices[lo:hi]]
            new = min(psi[i], y[i] + omega * r / diag[i])
            delta = max(delta, abs(new - y[i]))
            y[i] = new
        if delta <= tol * (1.0 + np.max(np.abs(y), initial=0.0)):
            return y, sweep
    raise ConvergenceError(
        f"Projected SOR did not converge in {max_sweeps} sweeps (last update {delta:.3e})",
        iterations=max_sweeps,
        residual=delta,
    )


def _solve_vi_matrix(matrix: sp.csr_matrix, f, psi, tol: float) -> tuple[np.ndarray, ViReport]:
    limits = thresholds_for(f, psi)

    def acceptable(y) -> tuple[bool, ResidualReport]:
        res = vi_residual(matrix, f, psi, y)
        ok = (
            res.feasibility <= limits["tol_act"]
            and res.dual <= limits["tol_str"]
            and res.complementarity <= limits["tol_comp"]
        )
        return ok, res

    y, iterations, settled = _pdas(matrix, f, psi, min(tol, INNER_SOLVE_TOL))
    ok, res = acceptable(y)
    if ok:
        return y, ViReport(iterations, "pdas", res)
    logger.warning(
        f"PDAS result rejected (settled={settled}, worst residual {res.worst:.3e}); "
        "falling back to projected SOR"
    )
    y, sweeps = projected_sor(matrix, f, psi, y0=y)
    ok, res = acceptable(y)
    if not ok:
        raise ConvergenceError(
            f"VI solvers failed: worst residual {res.worst:.3e}",
            iterations=sweeps,
            residual=res.worst,
        )
    return y, ViReport(sweeps, "psor", res)


def solve_vi_upper(A: DiscreteOperator, f: DualVector, psi: StateVector, tol: float = 1e-10) -> ViSolution:
    """
    Solve the obstacle problem y = S(f, psi).

    Args:
        A: Coercive operator
        f: Source (dual vector)
        psi: Upper obstacle; +inf entries are unconstrained nodes
        tol: Linear solver tolerance

    Returns:
        ViSolution with the active set {|psi - y| <= tol_act}

    Raises:
        ConfigError: If psi is -inf or NaN anywhere
        ConvergenceError: If both PDAS and projected SOR fail
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    matrix = _as_matrix(A)
    f = np.asarray(f, dtype=float)
    psi = np.asarray(psi, dtype=float)
    check_same_grid(f, psi, size=matrix.shape[0])
    if np.any(np.isnan(psi)) or np.any(psi == -np.inf):
        raise ConfigError("Infeasible obstacle: psi is -inf or NaN at some node")

    y, report = _solve_vi_matrix(matrix, f, psi, tol)
    limits = thresholds_for(f, psi)
    gap = psi - y
    active = np.flatnonzero(np.isfinite(gap) & (np.abs(gap) <= limits["tol_act"]))
    return ViSolution(y=y, xi=f - matrix @ y, active=active, report=report, thresholds=limits)


def solve_vi_cone(A, d: DualVector, cone: CriticalConeSpec, tol: float = 1e-10) -> StateVector:
    """
    Solve the VI over the shifted critical cone.

    Finds beta = shift + w with w = 0 on strongly_active, w <= 0 on biactive and
    w free on inactive such that <A beta - d, beta - v> <= 0 for all admissible v.
    """
    matrix = _as_matrix(A)
    d = np.asarray(d, dtype=float)
    shift = np.asarray(cone.shift, dtype=float)
    check_same_grid(d, shift, size=matrix.shape[0])

    beta = shift.copy()
    reduced = np.ones(len(d), dtype=bool)
    reduced[np.asarray(cone.strongly_active, dtype=int)] = False
    idx = np.flatnonzero(reduced)
    if idx.size == 0:
        return beta

    g = d - matrix @ shift
    psi = np.full(len(d), np.inf)
    psi[np.asarray(cone.biactive, dtype=int)] = 0.0
    sub = matrix[idx][:, idx]
    w, _ = _solve_vi_matrix(sub, g[idx], psi[idx], tol)
    beta[idx] += w
    return beta

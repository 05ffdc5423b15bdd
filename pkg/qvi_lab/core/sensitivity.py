"""
Directional derivatives of the QVI solution map and their validation.

The derivative alpha(d) solves a QVI over the critical cone of the base
solution, shifted by Phi'(y)(alpha). It is computed by a fixed-point iteration
whose inner problems are cone VIs.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from qvi_lab.core.errors import CertificateError, ConfigError, ConvergenceError, SolverError
from qvi_lab.core.mesh_operator import DiscreteOperator, DualVector, StateVector, check_same_grid
from qvi_lab.core.obstacle_maps import ObstacleMap
from qvi_lab.core.qvi_solver import QviSolution, solve_qvi_iteration
from qvi_lab.core.vi_solver import CriticalConeSpec, solve_vi_cone

logger = logging.getLogger(__name__)

DERIVATIVE_TOL_SCALE = 1e-8
CONTINUITY_SAFETY = 2.0
DEFAULT_STEPS = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class DerivativeResiduals:
    """Audit of the derivative complementarity system."""

    cone_equality: float
    cone_sign: float
    polar_inactive: float
    polar_biactive: float
    orthogonality: float

    @property
    def worst(self) -> float:
        return max(
            self.cone_equality, self.cone_sign, self.polar_inactive, self.polar_biactive, self.orthogonality
        )

    def passes(self, tol: float) -> bool:
        return self.worst <= tol

    def to_dict(self) -> dict[str, float]:
        return {
            "cone_equality": self.cone_equality,
            "cone_sign": self.cone_sign,
            "polar_inactive": self.polar_inactive,
            "polar_biactive": self.polar_biactive,
            "orthogonality": self.orthogonality,
        }


@dataclass(frozen=True)
class Sensitivity:
    alpha: StateVector
    cone: CriticalConeSpec
    xi_d: DualVector
    iterations: int
    contraction_ratio: Optional[float]
    residuals: DerivativeResiduals
    threshold: float
    certificate: float


@dataclass(frozen=True)
class FdReport:
    """Finite-difference check of y(f + s d) = y + s alpha + o(s)."""

    steps: tuple[float, ...]
    ratios: tuple[float, ...]
    slope: float
    errors: tuple[tuple[float, str], ...] = ()
    max_distance: float = 0.0

    def is_decreasing(self, floor: float = 1e-9) -> bool:
        """Each ratio is below its predecessor or below the noise floor."""
        if any(not np.isfinite(r) for r in self.ratios):
            return False
        return all(b < a or b <= floor for a, b in zip(self.ratios, self.ratios[1:]))

    def rows(self) -> list[dict]:
        return [{"step": s, "ratio": r} for s, r in zip(self.steps, self.ratios)]


@dataclass(frozen=True)
class ContinuityReport:
    pairs: tuple[tuple[int, int, float, float], ...]
    constant: float
    passed: bool
    alphas: tuple[StateVector, ...] = field(default=(), repr=False)


def derivative_threshold(d: DualVector, alpha: StateVector, scale: float = DERIVATIVE_TOL_SCALE) -> float:
    return scale * (1.0 + np.max(np.abs(d), initial=0.0)) * (
        1.0 + np.max(np.abs(alpha), initial=0.0)
    )


def build_critical_cone(sol: QviSolution, obstacle: ObstacleMap) -> CriticalConeSpec:
    """
    Critical cone of sol: zero on strongly active, nonpositive on biactive nodes, shift 0.

    Raises:
        GridMismatchError: If the obstacle map acts on another grid than sol
    """
    check_same_grid(sol.y, size=obstacle.size)
    return CriticalConeSpec(
        strongly_active=sol.sets.strongly_active,
        biactive=sol.sets.biactive,
        inactive=sol.sets.inactive,
        shift=np.zeros(len(sol.y)),
    )


def derivative_residuals(
    A: DiscreteOperator, d: DualVector, sol: QviSolution, obstacle: ObstacleMap, alpha: StateVector
) -> DerivativeResiduals:
    """
    Residuals of alpha - Phi'(y)alpha in the cone, xi_d = d - A alpha in its polar,
    and <xi_d, Phi'(y)alpha - alpha> = 0.
    """
    check_same_grid(d, alpha, size=A.size)
    xi_d = d - A.matrix @ alpha
    w = alpha - obstacle.deriv(sol.y, alpha)
    s, b, i = sol.sets.strongly_active, sol.sets.biactive, sol.sets.inactive
    return DerivativeResiduals(
        cone_equality=float(np.max(np.abs(w[s]), initial=0.0)),
        cone_sign=float(np.max(w[b], initial=0.0)),
        polar_inactive=float(np.max(np.abs(xi_d[i]), initial=0.0)),
        polar_biactive=float(np.max(-xi_d[b], initial=0.0)),
        orthogonality=abs(float(np.dot(xi_d, -w))),
    )


def solve_derivative_qvi(
    A: DiscreteOperator,
    d: DualVector,
    sol: QviSolution,
    obstacle: ObstacleMap,
    tol: float = 1e-10,
    max_iter: int = 200,
    force: bool = False,
) -> Sensitivity:
    """
    Directional derivative alpha(d) of the QVI solution map at sol.

    Iterates alpha_n = beta where beta solves the cone VI shifted by Phi'(y)alpha_{n-1}.

    Args:
        A: Operator
        d: Direction (dual vector)
        sol: Base solution
        obstacle: Obstacle map
        tol: Stopping tolerance on ||alpha_n - alpha_{n-1}||_inf, relative to 1 + ||alpha||
        max_iter: Outer iteration cap
        force: Skip the C_L < c_a / c_b certificate

    Raises:
        CertificateError: If ||Phi'(y)|| >= c_a / c_b and force is False
        ConvergenceError: If max_iter is reached
    """
    d = np.asarray(d, dtype=float)
    check_same_grid(d, sol.y, size=A.size)
    c_l = obstacle.deriv_norm(sol.y)
    limit = A.c_a / A.c_b
    if c_l >= limit:
        if not force:
            raise CertificateError(
                f"Derivative certificate fails: ||Phi'(y)|| = {c_l:.6e} >= c_a/c_b = {limit:.6e}"
            )
        logger.warning(f"Forcing derivative iteration with ||Phi'(y)|| = {c_l:.3e} >= {limit:.3e}")

    cone = build_critical_cone(sol, obstacle)
    alpha = np.zeros(A.size)
    iterations = 0
    ratios: list[float] = []

    if c_l == 0.0:
        alpha = solve_vi_cone(A, d, cone, tol)
        iterations = 1
    else:
        last_step = None
        for n in range(1, max_iter + 1):
            new = solve_vi_cone(A, d, cone.with_shift(obstacle.deriv(sol.y, alpha)), tol)
            step = float(np.max(np.abs(new - alpha), initial=0.0))
            if last_step:
                ratios.append(step / last_step)
            alpha = new
            iterations = n
            if step <= tol * (1.0 + np.max(np.abs(alpha))):
                break
            last_step = step
        else:
            raise ConvergenceError(
                f"Derivative iteration did not converge in {max_iter} iterations",
                iterations=max_iter,
                residual=step,
                ratio=ratios[-1] if ratios else None,
            )

    return Sensitivity(
        alpha=alpha,
        cone=cone.with_shift(obstacle.deriv(sol.y, alpha)),
        xi_d=d - A.matrix @ alpha,
        iterations=iterations,
        contraction_ratio=max(ratios) if ratios else None,
        residuals=derivative_residuals(A, d, sol, obstacle, alpha),
        threshold=derivative_threshold(d, alpha),
        certificate=c_l,
    )


def fd_validate(
    A: DiscreteOperator,
    f: DualVector,
    obstacle: ObstacleMap,
    d: DualVector,
    sol: QviSolution,
    s_list: Sequence[float] = DEFAULT_STEPS,
    sensitivity: Optional[Sensitivity] = None,
    tol: float = 1e-12,
    max_iter: int = 500,
    force: bool = False,
) -> FdReport:
    """
    Compare (y(f + s d) - y)/s with alpha for decreasing s.

    Each perturbed QVI is warm-started at sol.y. Inner failures are recorded per
    step (ratio NaN) instead of aborting the report.
    """
    steps = tuple(float(s) for s in s_list)
    if not steps or any(s <= 0 for s in steps) or any(b >= a for a, b in zip(steps, steps[1:])):
        raise ConfigError("Finite-difference steps must be positive and strictly decreasing")
    f = np.asarray(f, dtype=float)
    d = np.asarray(d, dtype=float)
    if sensitivity is None:
        sensitivity = solve_derivative_qvi(A, d, sol, obstacle, force=force)

    ratios, errors, distances = [], [], []
    for s in steps:
        try:
            ys = solve_qvi_iteration(A, f + s * d, obstacle, y0=sol.y, tol=tol, max_iter=max_iter).y
        except SolverError as e:
            logger.warning(f"Perturbed QVI failed at s={s:g}: {e}")
            errors.append((s, str(e)))
            ratios.append(float("nan"))
            continue
        ratios.append(float(np.max(np.abs((ys - sol.y) / s - sensitivity.alpha), initial=0.0)))
        distances.append(float(np.sqrt(A.grid.weight * np.sum((ys - sol.y) ** 2))))

    good = [(s, r) for s, r in zip(steps, ratios) if np.isfinite(r) and r > 0]
    if len(good) >= 2:
        logs, logr = np.log10([g[0] for g in good]), np.log10([g[1] for g in good])
        slope = float(np.polyfit(logs, logr, 1)[0])
    else:
        slope = float("nan")
    return FdReport(
        steps=steps,
        ratios=tuple(ratios),
        slope=slope,
        errors=tuple(errors),
        max_distance=max(distances, default=0.0),
    )


def derivative_direction_continuity(
    A: DiscreteOperator,
    sol: QviSolution,
    obstacle: ObstacleMap,
    d_list: Sequence[DualVector],
    tol: float = 1e-10,
    force: bool = False,
) -> ContinuityReport:
    """
    Check ||alpha(d_i) - alpha(d_j)|| <= 2 K ||d_i - d_j|| with K = (1 + C_L)/(c_a - c_b C_L).

    Raises:
        ConfigError: If fewer than two directions are given
        CertificateError: If c_a - c_b C_L <= 0
    """
    if len(d_list) < 2:
        raise ConfigError("Continuity check needs at least two directions")
    c_l = obstacle.deriv_norm(sol.y)
    denom = A.c_a - A.c_b * c_l
    if denom <= 0 and not force:
        raise CertificateError(f"Continuity constant undefined: c_a - c_b C_L = {denom:.3e} <= 0")
    constant = (1.0 + c_l) / denom if denom > 0 else float("inf")

    alphas = [solve_derivative_qvi(A, np.asarray(d, dtype=float), sol, obstacle, tol, force=force).alpha for d in d_list]
    pairs = []
    passed = True
    for i in range(len(d_list)):
        for j in range(i + 1, len(d_list)):
            dist = float(np.linalg.norm(alphas[i] - alphas[j]))
            bound = CONTINUITY_SAFETY * constant * float(np.linalg.norm(np.asarray(d_list[i]) - np.asarray(d_list[j])))
            if dist > bound + 1e-12:
                logger.warning(f"Continuity bound violated for pair ({i}, {j}): {dist:.3e} > {bound:.3e}")
                passed = False
            pairs.append((i, j, dist, bound))
    return ContinuityReport(pairs=tuple(pairs), constant=constant, passed=passed, alphas=tuple(alphas))

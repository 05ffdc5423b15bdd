"""
Quasi-variational inequalities y <= Phi(y), xi = f - Ay >= 0, <xi, Phi(y) - y> = 0.

Three routes are provided: the fixed-point iteration y_n = S(f, Phi(y_{n-1})),
the monotone interval method between a sub- and a supersolution, and a path of
smoothed penalty problems solved by semismooth Newton.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from qvi_lab.core.errors import (
    ConfigError,
    ConvergenceError,
    InvariantError,
    MonotonicityError,
    PenaltyPathError,
)
from qvi_lab.core.linsolve import SolveReport, solve_linear, solve_sparse
from qvi_lab.core.mesh_operator import DiscreteOperator, DualVector, StateVector, check_same_grid
from qvi_lab.core.obstacle_maps import ObstacleMap, check_increasing
from qvi_lab.core.vi_solver import ResidualReport, solve_vi_upper, thresholds_for, vi_residual

logger = logging.getLogger(__name__)

DEFAULT_RHO_SCHEDULE = tuple(10.0**-k for k in range(1, 7))
NEWTON_MAX_ITER = 100
NEWTON_MAX_HALVINGS = 30
# Newton steps below this (relative) size are at roundoff level
NEWTON_STAGNATION = 1e-12
MONOTONE_TOL = 1e-10
INNER_TOL = 1e-12


@dataclass(frozen=True)
class PenaltyFunction:
    """C1 smoothed max(0, r) with smoothing width epsilon."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"Penalty smoothing width must be positive, got {self.epsilon}")

    def value(self, r):
        """0 for r <= 0, r^2/(2 eps) on (0, eps), r - eps/2 for r >= eps."""
        r = np.asarray(r, dtype=float)
        eps = self.epsilon
        return np.where(r <= 0, 0.0, np.where(r < eps, r**2 / (2.0 * eps), r - 0.5 * eps))

    def slope(self, r):
        """Derivative of value; lies in [0, 1]."""
        return np.clip(np.asarray(r, dtype=float) / self.epsilon, 0.0, 1.0)


def penalty_eval(pf: PenaltyFunction, r):
    out = pf.value(r)
    return float(out) if out.ndim == 0 else out


def penalty_deriv(pf: PenaltyFunction, r):
    out = pf.slope(r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ActiveSets:
    """Node classification: inactive, strongly active and biactive (a partition)."""

    inactive: np.ndarray
    strongly_active: np.ndarray
    biactive: np.ndarray
    tol_act: float
    tol_str: float

    @property
    def active(self) -> np.ndarray:
        return np.union1d(self.strongly_active, self.biactive)

    def to_dict(self) -> dict:
        return {
            "inactive": self.inactive.tolist(),
            "strongly_active": self.strongly_active.tolist(),
            "biactive": self.biactive.tolist(),
            "tol_act": self.tol_act,
            "tol_str": self.tol_str,
        }


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    step_norm: float
    ratio: Optional[float] = None


@dataclass(frozen=True)
class QviSolution:
    """A QVI solution candidate with its multiplier, sets and audit trail."""

    y: StateVector
    xi: DualVector
    obstacle: StateVector
    sets: ActiveSets
    route: str
    residuals: ResidualReport
    thresholds: dict[str, float]
    history: tuple[IterationRecord, ...] = ()
    iterates: tuple[StateVector, ...] = field(default=(), repr=False)

    def certified(self) -> bool:
        """Whether the complementarity residuals pass the solution's own thresholds."""
        return (
            self.residuals.feasibility <= self.thresholds["tol_act"]
            and self.residuals.dual <= self.thresholds["tol_str"]
            and self.residuals.complementarity <= self.thresholds["tol_comp"]
        )


@dataclass(frozen=True)
class PathReport:
    """Per-rho record of a penalty path."""

    rhos: tuple[float, ...]
    violations: tuple[float, ...]
    newton_iterations: tuple[int, ...]
    residual_norms: tuple[float, ...]
    iterates: tuple[StateVector, ...] = field(default=(), repr=False)

    def violations_nonincreasing(self, slack: float = 1e-12) -> bool:
        v = self.violations
        return all(b <= a + slack for a, b in zip(v, v[1:]))

    def rows(self) -> list[dict]:
        return [
            {"rho": rho, "violation": v, "newton_iterations": it, "residual": r}
            for rho, v, it, r in zip(self.rhos, self.violations, self.newton_iterations, self.residual_norms)
        ]


def classify_sets(f: DualVector, y: StateVector, xi: DualVector, psi: StateVector) -> ActiveSets:
    """Split nodes into inactive {psi - y > tol_act}, strongly active {xi > tol_str} and biactive."""
    limits = thresholds_for(f, psi)
    gap = psi - y
    inactive = gap > limits["tol_act"]
    strong = ~inactive & (xi > limits["tol_str"])
    biactive = ~inactive & ~strong
    return ActiveSets(
        inactive=np.flatnonzero(inactive),
        strongly_active=np.flatnonzero(strong),
        biactive=np.flatnonzero(biactive),
        tol_act=limits["tol_act"],
        tol_str=limits["tol_str"],
    )


def complementarity_decompose(
    A: DiscreteOperator, f: DualVector, y: StateVector, obstacle: ObstacleMap
) -> tuple[DualVector, ActiveSets, ResidualReport]:
    """Multiplier xi = f - Ay, the active sets and the residual triple against Phi(y)."""
    check_same_grid(f, y, size=A.size)
    psi = obstacle.eval(y)
    xi = f - A.matrix @ y
    return xi, classify_sets(f, y, xi, psi), vi_residual(A, f, psi, y)


def make_solution(
    A: DiscreteOperator,
    f: DualVector,
    y: StateVector,
    obstacle: ObstacleMap,
    route: str,
    history: Sequence[IterationRecord] = (),
    iterates: Sequence[StateVector] = (),
) -> QviSolution:
    xi, sets, residuals = complementarity_decompose(A, f, y, obstacle)
    psi = obstacle.eval(y)
    return QviSolution(
        y=y,
        xi=xi,
        obstacle=psi,
        sets=sets,
        route=route,
        residuals=residuals,
        thresholds=thresholds_for(f, psi),
        history=tuple(history),
        iterates=tuple(iterates),
    )


def _unconstrained(A: DiscreteOperator, f: DualVector) -> StateVector:
    y, _ = solve_sparse(A.matrix, f, INNER_TOL)
    return y


def penalty_jacobian(A: DiscreteOperator, obstacle: ObstacleMap, y: StateVector, weights: np.ndarray):
    """A + diag(weights)(I - Phi'(y)); sparse when Phi'(y) is sparse, dense otherwise."""
    if not np.any(weights):
        return A.matrix
    deriv = obstacle.deriv_matrix(y)
    if sp.issparse(deriv):
        coupling = sp.identity(A.size, format="csr") - deriv
        return sp.csr_matrix(A.matrix + sp.diags(weights) @ coupling)
    return A.matrix.toarray() + weights[:, None] * (np.eye(A.size) - np.asarray(deriv))


def solve_penalized(
    A: DiscreteOperator,
    f: DualVector,
    obstacle: ObstacleMap,
    rho: float,
    pf: PenaltyFunction,
    tol: float = 1e-10,
    y0: Optional[StateVector] = None,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[StateVector, SolveReport]:
    """
    Solve Ay + (1/rho) m(y - Phi(y)) = f by damped semismooth Newton.

    Args:
        A: Operator
        f: Source
        obstacle: Obstacle map
        rho: Penalty parameter, positive
        pf: Smoothed max function m
        tol: Residual tolerance relative to 1 + ||f||
        y0: Warm start; A^{-1} f when None
        max_iter: Newton iteration cap

    Returns:
        Tuple of (y_rho, SolveReport with method "newton")

    Raises:
        ConvergenceError: If the damping fails or max_iter is reached
    """
    if not rho > 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    f = np.asarray(f, dtype=float)
    check_same_grid(f, size=A.size)
    y = _unconstrained(A, f) if y0 is None else np.array(y0, dtype=float)

    def residual(v: StateVector) -> np.ndarray:
        return A.matrix @ v + pf.value(v - obstacle.eval(v)) / rho - f

    bound = tol * (1.0 + np.linalg.norm(f))
    r = residual(y)
    norm = float(np.linalg.norm(r))

    for iteration in range(max_iter + 1):
        if norm <= bound:
            return y, SolveReport(iteration, norm, True, "newton")
        if iteration == max_iter:
            break
        weights = pf.slope(y - obstacle.eval(y)) / rho
        step = solve_linear(penalty_jacobian(A, obstacle, y, weights), -r)

        t = 1.0
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            trial = y + t * step
            r_trial = residual(trial)
            norm_trial = float(np.linalg.norm(r_trial))
            if norm_trial < norm:
                break
            t *= 0.5
        else:
            if np.max(np.abs(step), initial=0.0) <= NEWTON_STAGNATION * (1.0 + np.max(np.abs(y))):
                logger.debug(f"Newton stopped at roundoff level, residual {norm:.3e}")
                return y, SolveReport(iteration, norm, True, "newton")
            raise ConvergenceError(
                f"Newton damping failed at rho={rho:.3e} after {NEWTON_MAX_HALVINGS} halvings",
                iterations=iteration,
                residual=norm,
            )
        logger.debug(f"Newton iteration {iteration + 1}: |R| = {norm_trial:.3e}, damping {t:g}")
        y, r, norm = trial, r_trial, norm_trial

    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations at rho={rho:.3e} (|R| = {norm:.3e})",
        iterations=max_iter,
        residual=norm,
    )


def solve_qvi_iteration(
    A: DiscreteOperator,
    f: DualVector,
    obstacle: ObstacleMap,
    y0: Optional[StateVector] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> QviSolution:
    """
    Fixed-point iteration y_n = S(f, Phi(y_{n-1})) from y0 (A^{-1} f by default).

    Stops when ||y_n - y_{n-1}||_inf <= tol.

    Raises:
        ConvergenceError: On max_iter, carrying the last contraction ratio
    """
    f = np.asarray(f, dtype=float)
    y = _unconstrained(A, f) if y0 is None else np.array(y0, dtype=float)
    check_same_grid(f, y, size=A.size)
    history: list[IterationRecord] = []
    iterates = [y]
    last_step = None
    ratio = None

    for n in range(1, max_iter + 1):
        y_new = solve_vi_upper(A, f, obstacle.eval(y), tol=min(tol, INNER_TOL)).y
        step = float(np.max(np.abs(y_new - y), initial=0.0))
        ratio = step / last_step if last_step else None
        history.append(IterationRecord(n, step, ratio))
        iterates.append(y_new)
        y = y_new
        if step <= tol:
            logger.info(f"QVI iteration converged in {n} iterations")
            return make_solution(A, f, y, obstacle, "iteration", history, iterates)
        last_step = step

    raise ConvergenceError(
        f"QVI iteration did not converge in {max_iter} iterations (last step {history[-1].step_norm:.3e})",
        iterations=max_iter,
        residual=history[-1].step_norm,
        ratio=ratio,
    )


def _monotone_sequence(
    A: DiscreteOperator,
    f: DualVector,
    obstacle: ObstacleMap,
    start: StateVector,
    upward: bool,
    tol: float,
    max_iter: int,
) -> QviSolution:
    route = "interval_min" if upward else "interval_max"
    y = start.copy()
    history: list[IterationRecord] = []
    iterates = [y]
    last_step = None

    for n in range(1, max_iter + 1):
        y_new = solve_vi_upper(A, f, obstacle.eval(y), tol=min(tol, INNER_TOL)).y
        slack = MONOTONE_TOL * (1.0 + np.max(np.abs(y)))
        wrong = (y - y_new) if upward else (y_new - y)
        if np.max(wrong, initial=0.0) > slack:
            node = int(np.argmax(wrong))
            raise MonotonicityError(
                f"{route} sequence is not monotone at step {n}, node {node} "
                f"(violation {wrong[node]:.3e}); the obstacle map is not increasing"
            )
        step = float(np.max(np.abs(y_new - y), initial=0.0))
        history.append(IterationRecord(n, step, step / last_step if last_step else None))
        iterates.append(y_new)
        y = y_new
        if step <= tol:
            return make_solution(A, f, y, obstacle, route, history, iterates)
        last_step = step

    raise ConvergenceError(
        f"{route} sequence did not converge in {max_iter} iterations",
        iterations=max_iter,
        residual=history[-1].step_norm,
    )


def solve_qvi_interval(
    A: DiscreteOperator,
    f: DualVector,
    F: DualVector,
    v0: StateVector,
    obstacle: ObstacleMap,
    tol: float = 1e-10,
    max_iter: int = 500,
    samples: int = 50,
    seed: int = 0,
) -> tuple[QviSolution, QviSolution]:
    """
    Minimal and maximal solutions on the interval [v0, A^{-1} F].

    Requires Av0 <= f <= F, v0 <= Phi(v0) and an increasing map (checked by sampling).

    Raises:
        InvariantError: If a hypothesis fails up front
        MonotonicityError: If a sequence stops being monotone
    """
    f = np.asarray(f, dtype=float)
    F = np.asarray(F, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    check_same_grid(f, F, v0, size=A.size)
    slack = MONOTONE_TOL * (1.0 + np.max(np.abs(f)) + np.max(np.abs(F)))

    if np.any(A.matrix @ v0 > f + slack):
        raise InvariantError("Interval hypothesis fails: A v0 <= f does not hold")
    if np.any(f > F + slack):
        raise InvariantError("Interval hypothesis fails: f <= F does not hold")
    if np.any(v0 > obstacle.eval(v0) + MONOTONE_TOL * (1.0 + np.max(np.abs(v0)))):
        raise InvariantError("Interval hypothesis fails: v0 <= Phi(v0) does not hold")

    top = _unconstrained(A, F)
    if not check_increasing(obstacle, v0, np.maximum(top, v0), samples=samples, seed=seed):
        raise InvariantError(f"Obstacle map '{obstacle.kind}' is not increasing on [v0, A^-1 F]")

    minimal = _monotone_sequence(A, f, obstacle, v0, True, tol, max_iter)
    maximal = _monotone_sequence(A, f, obstacle, top, False, tol, max_iter)
    excess = minimal.y - maximal.y
    if np.max(excess, initial=0.0) > 1e-8 * (1.0 + np.max(np.abs(maximal.y))):
        raise MonotonicityError(f"Minimal solution exceeds maximal by {np.max(excess):.3e}")
    return minimal, maximal


def _validate_schedule(schedule: Sequence[float]) -> tuple[float, ...]:
    rhos = tuple(float(r) for r in schedule)
    if not rhos:
        raise ConfigError("Penalty schedule must not be empty")
    if any(r <= 0 for r in rhos) or any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError("Penalty schedule must be positive and strictly decreasing")
    return rhos


def penalty_path(
    A: DiscreteOperator,
    f: DualVector,
    obstacle: ObstacleMap,
    rho_schedule: Optional[Sequence[float]] = None,
    eps_rule: Optional[Callable[[float], float]] = None,
    y0: Optional[StateVector] = None,
    tol: float = 1e-10,
) -> tuple[QviSolution, PathReport]:
    """
    Warm-started penalty path rho_1 > rho_2 > ... with smoothing width eps(rho) = rho.

    Raises:
        PenaltyPathError: Newton failed at some rho; carries the last success
    """
    rhos = _validate_schedule(rho_schedule if rho_schedule is not None else DEFAULT_RHO_SCHEDULE)
    eps_rule = eps_rule or (lambda rho: rho)
    f = np.asarray(f, dtype=float)
    y = y0
    done_rhos, violations, newton_its, norms, iterates = [], [], [], [], []

    def partial() -> PathReport:
        return PathReport(tuple(done_rhos), tuple(violations), tuple(newton_its), tuple(norms), tuple(iterates))

    for rho in rhos:
        try:
            y, report = solve_penalized(A, f, obstacle, rho, PenaltyFunction(eps_rule(rho)), tol=tol, y0=y)
        except ConvergenceError as e:
            last = done_rhos[-1] if done_rhos else None
            raise PenaltyPathError(
                f"Penalty path failed at rho={rho:.3e}: {e}",
                last_rho=last,
                last_iterate=iterates[-1] if iterates else None,
                report=partial(),
            ) from e
        violation = float(np.max(np.maximum(y - obstacle.eval(y), 0.0), initial=0.0))
        logger.debug(f"rho={rho:.1e}: violation {violation:.3e}, {report.iterations} Newton steps")
        done_rhos.append(rho)
        violations.append(violation)
        newton_its.append(report.iterations)
        norms.append(report.final_residual)
        iterates.append(y)

    history = [IterationRecord(k + 1, v) for k, v in enumerate(violations)]
    return make_solution(A, f, y, obstacle, "penalty", history, iterates), partial()


def penalty_bound_constant(c_a: float, c_b: float) -> float:
    """C in ||y_rho|| <= C (||f|| + ||v0||) for a feasible v0."""
    if not c_a > 0:
        raise ConfigError(f"c_a must be positive, got {c_a}")
    inner = max(3.0 * c_b**2 / (4.0 * c_a) + 0.5, 3.0 / (4.0 * c_a) + 0.5)
    return float(np.sqrt(3.0 * inner / c_a))

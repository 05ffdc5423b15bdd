"""
Optimal control of QVIs: min 1/2 ||y - y_d||_H^2 + nu/2 ||u||_H^2 over u_a <= u <= u_b, y in Q(u).

The state constraint is replaced by the penalized equation Ay + (1/rho) m(y - Phi(y)) = u;
each penalized problem is solved by projected gradient with Barzilai-Borwein steps and
Armijo backtracking, and the path limit is audited against the stationarity systems.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from qvi_lab.core.errors import (
    ConfigError,
    ConvergenceError,
    LineSearchError,
    PenaltyPathError,
    QviLabError,
    SolverError,
)
from qvi_lab.core.linsolve import solve_linear
from qvi_lab.core.mesh_operator import DiscreteOperator, StateVector, check_same_grid
from qvi_lab.core.obstacle_maps import ObstacleMap
from qvi_lab.core.qvi_solver import (
    DEFAULT_RHO_SCHEDULE,
    ActiveSets,
    PenaltyFunction,
    classify_sets,
    make_solution,
    penalty_jacobian,
    solve_penalized,
)
from qvi_lab.core.sensitivity import solve_derivative_qvi
from qvi_lab.core.vi_solver import vi_residual

logger = logging.getLogger(__name__)

BB_STEP_MIN = 1e-4
BB_STEP_MAX = 1e4
ARMIJO_C = 1e-4
MAX_BACKTRACKS = 40
EGOROV_FRACTION = 0.05
STRONG_SAMPLES = 200
SMOOTH_SAMPLES = 20
STATE_TOL = 1e-11
BOX_TOL_SCALE = 1e-8

STATIONARITY_CLASSES = ("B", "weakC", "eAlmostC", "C", "strong")


@dataclass(frozen=True)
class ControlProblem:
    """Tracking-type control problem with box constraints on the control."""

    A: DiscreteOperator
    obstacle: ObstacleMap
    y_d: StateVector
    nu: float
    u_a: StateVector
    u_b: StateVector

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        check_same_grid(self.y_d, self.u_a, self.u_b, size=self.A.size)
        if np.any(np.isnan(self.u_a)) or np.any(np.isnan(self.u_b)):
            raise ConfigError("Control bounds must not be NaN")
        if np.any(self.u_a > self.u_b):
            raise ConfigError("Control bounds violate u_a <= u_b")

    @property
    def weight(self) -> float:
        return self.A.grid.weight

    @property
    def unbounded(self) -> bool:
        return bool(np.all(np.isneginf(self.u_a)) and np.all(np.isposinf(self.u_b)))


@dataclass(frozen=True)
class StationarityBundle:
    """Primal, adjoint and multiplier data at a (penalty-path) optimum."""

    y: StateVector
    u: StateVector
    p: StateVector
    lam: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    lam_path: np.ndarray
    xi_path: np.ndarray
    obstacle: StateVector
    at_lower: np.ndarray
    at_upper: np.ndarray
    sets: ActiveSets
    thresholds: dict[str, float]
    rho: float

    @property
    def lambda_gap(self) -> float:
        return float(np.max(np.abs(self.lam - self.lam_path), initial=0.0))

    def to_dict(self) -> dict:
        return {
            "y": self.y.tolist(),
            "u": self.u.tolist(),
            "p": self.p.tolist(),
            "lambda": self.lam.tolist(),
            "xi": self.xi.tolist(),
            "mu": self.mu.tolist(),
            "lambda_path": self.lam_path.tolist(),
            "xi_path": self.xi_path.tolist(),
            "at_lower": self.at_lower.tolist(),
            "at_upper": self.at_upper.tolist(),
            "sets": self.sets.to_dict(),
            "rho": self.rho,
            "lambda_gap": self.lambda_gap,
        }


@dataclass(frozen=True)
class StationarityReport:
    class_tested: str
    residuals: dict[str, float]
    thresholds: dict[str, float]
    passed: bool
    exceptional_nodes: tuple[int, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "class": self.class_tested,
            "passed": self.passed,
            "checks": {
                name: {"value": value, "threshold": self.thresholds[name], "passed": value <= self.thresholds[name]}
                for name, value in self.residuals.items()
            },
            "exceptional_nodes": list(self.exceptional_nodes),
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class OcIterationRecord:
    iteration: int
    objective: float
    stationarity: float
    step: float


@dataclass(frozen=True)
class OcPenalizedResult:
    u: StateVector
    y: StateVector
    p: StateVector
    history: tuple[OcIterationRecord, ...]

    @property
    def objective(self) -> float:
        return self.history[-1].objective


@dataclass(frozen=True)
class OcPathReport:
    rhos: tuple[float, ...]
    drifts: tuple[Optional[float], ...]
    objectives: tuple[float, ...]
    stationarity: tuple[float, ...]
    failures: tuple[tuple[float, str], ...]
    lambda_gap: float

    def rows(self) -> list[dict]:
        return [
            {"rho": rho, "objective": obj, "stationarity": st, "drift": "" if dr is None else dr}
            for rho, obj, st, dr in zip(self.rhos, self.objectives, self.stationarity, self.drifts)
        ]


@dataclass(frozen=True)
class MultistartResult:
    best_index: int
    bundle: StationarityBundle
    report: OcPathReport
    objectives: tuple[float, ...]
    failures: tuple[tuple[int, str], ...] = ()


def objective(problem: ControlProblem, y: StateVector, u: StateVector) -> float:
    """J(y, u) = 1/2 ||y - y_d||_H^2 + nu/2 ||u||_H^2 with ||v||_H^2 = h^dim v.v."""
    check_same_grid(y, u, problem.y_d)
    diff = y - problem.y_d
    return 0.5 * problem.weight * float(np.dot(diff, diff) + problem.nu * np.dot(u, u))


def project_box(u: StateVector, u_a: StateVector, u_b: StateVector) -> StateVector:
    return np.minimum(np.maximum(u, u_a), u_b)


def control_projection_residual(problem: ControlProblem, u: StateVector, p: StateVector) -> float:
    """||u - P_box(p / nu)||_inf, zero exactly at a solution of the control VI."""
    return float(np.max(np.abs(u - project_box(p / problem.nu, problem.u_a, problem.u_b)), initial=0.0))


def _stationarity_measure(problem: ControlProblem, u, p) -> float:
    grad = problem.nu * u - p
    return float(np.max(np.abs(u - project_box(u - grad, problem.u_a, problem.u_b)), initial=0.0))


def _state(problem: ControlProblem, u, rho, pf, y0=None, tol=STATE_TOL) -> StateVector:
    y, _ = solve_penalized(problem.A, u, problem.obstacle, rho, pf, tol=tol, y0=y0)
    return y


def solve_adjoint_penalized(
    problem: ControlProblem,
    y_rho: StateVector,
    rho: float,
    pf: PenaltyFunction,
    rhs: Optional[StateVector] = None,
) -> StateVector:
    """Solve [A^T + (1/rho)(I - Phi'(y))^T diag(m')] p = rhs (default y_d - y_rho)."""
    rhs = problem.y_d - y_rho if rhs is None else np.asarray(rhs, dtype=float)
    weights = pf.slope(y_rho - problem.obstacle.eval(y_rho)) / rho
    jac = penalty_jacobian(problem.A, problem.obstacle, y_rho, weights)
    jac_t = jac.T.tocsr() if sp.issparse(jac) else np.ascontiguousarray(jac.T)
    return solve_linear(jac_t, rhs, tol=1e-12)


def solve_oc_penalized(
    problem: ControlProblem,
    rho: float,
    pf: PenaltyFunction,
    u0: Optional[StateVector] = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    y0: Optional[StateVector] = None,
) -> OcPenalizedResult:
    """
    Projected gradient on the penalized reduced problem.

    Trial steps are Barzilai-Borwein (clipped to [1e-4, 1e4]); acceptance by Armijo
    backtracking with the state re-solved at each trial. Stops when
    ||u - P(u - (nu u - p))||_inf <= tol.

    Raises:
        LineSearchError: If backtracking fails
        ConvergenceError: If max_iter is reached or an inner solve fails
    """
    n = problem.A.size
    u = project_box(np.zeros(n) if u0 is None else np.asarray(u0, dtype=float), problem.u_a, problem.u_b)
    y = _state(problem, u, rho, pf, y0)
    p = solve_adjoint_penalized(problem, y, rho, pf)
    value = objective(problem, y, u)
    history: list[OcIterationRecord] = []
    u_prev = g_prev = None
    tau = 1.0

    for iteration in range(max_iter + 1):
        grad = problem.nu * u - p
        measure = _stationarity_measure(problem, u, p)
        history.append(OcIterationRecord(iteration, value, measure, tau))
        if measure <= tol:
            logger.debug(f"Projected gradient converged at rho={rho:.1e} in {iteration} iterations")
            return OcPenalizedResult(u=u, y=y, p=p, history=tuple(history))
        if iteration == max_iter:
            break

        if u_prev is not None:
            s, dg = u - u_prev, grad - g_prev
            sy = float(np.dot(s, dg))
            tau = float(np.dot(s, s)) / sy if sy > 0 else 1.0
            tau = min(max(tau, BB_STEP_MIN), BB_STEP_MAX)

        slack = 1e-15 * (1.0 + abs(value))
        for _ in range(MAX_BACKTRACKS):
            trial = project_box(u - tau * grad, problem.u_a, problem.u_b)
            y_trial = _state(problem, trial, rho, pf, y)
            value_trial = objective(problem, y_trial, trial)
            decrease = ARMIJO_C * problem.weight * float(np.dot(grad, trial - u))
            if value_trial <= value + decrease + slack:
                break
            tau *= 0.5
        else:
            raise LineSearchError(
                f"Armijo backtracking failed at rho={rho:.3e}, iteration {iteration} "
                f"(stationarity {measure:.3e})"
            )

        u_prev, g_prev = u, grad
        u, y, value = trial, y_trial, value_trial
        p = solve_adjoint_penalized(problem, y, rho, pf)

    raise ConvergenceError(
        f"Projected gradient did not converge in {max_iter} iterations at rho={rho:.3e} "
        f"(stationarity {history[-1].stationarity:.3e})",
        iterations=max_iter,
        residual=history[-1].stationarity,
    )


def _box_thresholds(problem: ControlProblem) -> float:
    finite = np.concatenate([problem.u_a[np.isfinite(problem.u_a)], problem.u_b[np.isfinite(problem.u_b)]])
    return BOX_TOL_SCALE * (1.0 + (float(np.max(np.abs(finite))) if finite.size else 0.0))


def assemble_bundle(
    problem: ControlProblem,
    y: StateVector,
    u: StateVector,
    p: StateVector,
    rho: float,
    pf: PenaltyFunction,
) -> StationarityBundle:
    """
    Limit multipliers at (y, u, p).

    xi = u - Ay, mu = y_d - y - A^T p, lam solves (I - Phi'(y))^T lam = mu. The path
    multipliers lam_path = (1/rho) m'(.) p and xi_path = (1/rho) m(.) are kept for comparison.
    """
    A = problem.A
    psi = problem.obstacle.eval(y)
    xi = u - A.matrix @ y
    mu = problem.y_d - y - A.matrix.T @ p
    deriv = problem.obstacle.deriv_matrix(y)
    if sp.issparse(deriv):
        coupling = (sp.identity(A.size, format="csr") - deriv).T.tocsr()
    else:
        coupling = np.ascontiguousarray((np.eye(A.size) - np.asarray(deriv)).T)
    lam = solve_linear(coupling, mu, tol=1e-12)
    gap = y - psi
    sets = classify_sets(u, y, xi, psi)
    box_tol = _box_thresholds(problem)
    lower = np.isfinite(problem.u_a) & (np.abs(u - problem.u_a) <= box_tol)
    upper = np.isfinite(problem.u_b) & (np.abs(u - problem.u_b) <= box_tol)
    return StationarityBundle(
        y=y,
        u=u,
        p=p,
        lam=lam,
        xi=xi,
        mu=mu,
        lam_path=pf.slope(gap) * p / rho,
        xi_path=pf.value(gap) / rho,
        obstacle=psi,
        at_lower=np.flatnonzero(lower),
        at_upper=np.flatnonzero(upper),
        sets=sets,
        thresholds={"box": box_tol, "tol_act": sets.tol_act, "tol_str": sets.tol_str},
        rho=rho,
    )


def oc_path(
    problem: ControlProblem,
    rho_schedule: Optional[Sequence[float]] = None,
    pf_rule: Optional[Callable[[float], float]] = None,
    u0: Optional[StateVector] = None,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> tuple[StationarityBundle, OcPathReport]:
    """
    Warm-started penalized control problems along a decreasing rho schedule.

    Failures at individual rho are recorded and the path continues from the last
    success; the bundle is assembled at the last successful rho.

    Raises:
        PenaltyPathError: If no rho succeeds
    """
    rhos = tuple(float(r) for r in (rho_schedule if rho_schedule is not None else DEFAULT_RHO_SCHEDULE))
    if not rhos or any(r <= 0 for r in rhos) or any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError("Penalty schedule must be positive and strictly decreasing")
    pf_rule = pf_rule or (lambda rho: rho)

    u, y = u0, None
    done, drifts, objectives, measures, failures = [], [], [], [], []
    last: Optional[tuple[OcPenalizedResult, float, PenaltyFunction]] = None

    for rho in rhos:
        pf = PenaltyFunction(pf_rule(rho))
        try:
            result = solve_oc_penalized(problem, rho, pf, u0=u, tol=tol, max_iter=max_iter, y0=y)
        except SolverError as e:
            logger.warning(f"Control path step failed at rho={rho:.1e}: {e}")
            failures.append((rho, str(e)))
            continue
        drifts.append(float(np.max(np.abs(result.u - last[0].u))) if last else None)
        done.append(rho)
        objectives.append(result.objective)
        measures.append(result.history[-1].stationarity)
        u, y = result.u, result.y
        last = (result, rho, pf)

    if last is None:
        raise PenaltyPathError("Control path failed at every rho", report=tuple(failures))

    result, rho, pf = last
    bundle = assemble_bundle(problem, result.y, result.u, result.p, rho, pf)
    report = OcPathReport(
        rhos=tuple(done),
        drifts=tuple(drifts),
        objectives=tuple(objectives),
        stationarity=tuple(measures),
        failures=tuple(failures),
        lambda_gap=bundle.lambda_gap,
    )
    return bundle, report


def tangent_directions(
    problem: ControlProblem, bundle: StationarityBundle, count: int, seed: int = 0
) -> list[StateVector]:
    """Random directions in the tangent cone of the box at u, normalized in H."""
    rng = np.random.default_rng(seed)
    return [_tangent(problem, bundle, rng.standard_normal(problem.A.size)) for _ in range(count)]


def _tangent(problem: ControlProblem, bundle: StationarityBundle, h: StateVector) -> StateVector:
    h = np.array(h, dtype=float)
    h[bundle.at_lower] = np.maximum(h[bundle.at_lower], 0.0)
    h[bundle.at_upper] = np.minimum(h[bundle.at_upper], 0.0)
    norm = math.sqrt(problem.weight * float(np.dot(h, h)))
    return h / norm if norm > 0 else h


def check_b_stationarity(
    problem: ControlProblem,
    bundle: StationarityBundle,
    directions: Sequence[StateVector],
    tol: float = 1e-6,
    force: bool = False,
) -> StationarityReport:
    """
    Test (alpha_h, y - y_d)_H + nu (u, h)_H >= 0 over tangent directions h.

    alpha_h is the directional derivative of the QVI map at (y, u) in direction h.
    """
    sol = make_solution(problem.A, bundle.u, bundle.y, problem.obstacle, "penalty")
    values, failures = [], []
    for k, h in enumerate(directions):
        h = _tangent(problem, bundle, h)
        if not np.any(h):
            values.append(0.0)
            continue
        try:
            alpha = solve_derivative_qvi(problem.A, h, sol, problem.obstacle, force=force).alpha
        except QviLabError as e:
            failures.append((k, str(e)))
            continue
        values.append(problem.weight * float(np.dot(alpha, bundle.y - problem.y_d) + problem.nu * np.dot(bundle.u, h)))

    worst = min(values, default=0.0)
    residual = max(0.0, -worst)
    passed = residual <= tol and not failures
    return StationarityReport(
        class_tested="B",
        residuals={"b_stationarity": residual},
        thresholds={"b_stationarity": tol},
        passed=passed,
        diagnostics={"min_value": worst, "directions": len(directions), "failures": failures},
    )


def _smooth_weights(grid, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    coords = grid.coordinates()
    out = []
    for _ in range(count):
        amps = rng.uniform(0.0, 1.0, size=3)
        value = 1.0 + sum(
            a * np.prod(np.sin((k + 1) * np.pi * coords), axis=1) for k, a in enumerate(amps)
        ) / 4.0
        out.append(np.maximum(value, 0.0))
    return out


def check_stationarity(
    problem: ControlProblem,
    bundle: StationarityBundle,
    cls: str,
    tol: float = 1e-6,
    tau: float = EGOROV_FRACTION,
    samples: int = STRONG_SAMPLES,
    seed: int = 0,
) -> StationarityReport:
    """
    Audit the weakC, eAlmostC, C or strong stationarity system at the bundle.

    Each class adds residuals to the previous one. The E-almost-C check exempts the
    ceil(tau |I|) inactive nodes with the largest |lambda| (those above tol) and lists them.
    """
    if cls not in ("weakC", "eAlmostC", "C", "strong"):
        raise ConfigError(f"Unknown stationarity class '{cls}'. Valid options: weakC, eAlmostC, C, strong")
    A = problem.A
    y, u, p, lam, xi = bundle.y, bundle.u, bundle.p, bundle.lam, bundle.xi
    deriv = problem.obstacle.deriv_matrix(y)
    coupled = deriv.T @ lam if sp.issparse(deriv) else np.asarray(deriv).T @ lam
    state = vi_residual(A, u, bundle.obstacle, y)

    residuals = {
        "adjoint_equation": float(np.max(np.abs(y + lam - coupled + A.matrix.T @ p - problem.y_d))),
        "state_feasibility": state.feasibility,
        "state_dual": state.dual,
        "state_complementarity": state.complementarity,
        "control_vi": control_projection_residual(problem, u, p),
        "lambda_p_sign": max(0.0, -float(np.dot(lam, p))),
    }
    exceptional: tuple[int, ...] = ()
    diagnostics: dict = {"lambda_gap": bundle.lambda_gap, "lambda_p": float(np.dot(lam, p))}

    if cls in ("eAlmostC", "C", "strong"):
        residuals["xi_p_plus"] = abs(float(np.dot(xi, np.maximum(p, 0.0))))
        residuals["xi_p_minus"] = abs(float(np.dot(xi, np.maximum(-p, 0.0))))
        residuals["lambda_state_gap"] = abs(float(np.dot(lam, y - bundle.obstacle)))
        inactive = bundle.sets.inactive
        magnitude = np.abs(lam[inactive])
        if cls == "eAlmostC":
            budget = math.ceil(tau * len(inactive))
            order = np.argsort(-magnitude, kind="stable")[:budget]
            exempt = order[magnitude[order] > tol]
            exceptional = tuple(int(inactive[k]) for k in sorted(exempt))
            keep = np.ones(len(inactive), dtype=bool)
            keep[exempt] = False
            residuals["lambda_inactive"] = float(np.max(magnitude[keep], initial=0.0))
            diagnostics["egorov_fraction"] = tau
        else:
            residuals["lambda_inactive"] = float(np.max(magnitude, initial=0.0))

    if cls == "strong":
        b, s = bundle.sets.biactive, bundle.sets.strongly_active
        residuals["p_biactive_sign"] = max(0.0, -float(np.min(p[b], initial=np.inf))) if b.size else 0.0
        residuals["p_strongly_active"] = float(np.max(np.abs(p[s]), initial=0.0))
        rng = np.random.default_rng(seed)
        worst = np.inf
        free = bundle.sets.inactive
        for _ in range(samples):
            v = np.zeros(A.size)
            v[b] = np.abs(rng.standard_normal(b.size))
            v[free] = rng.standard_normal(free.size)
            norm = math.sqrt(problem.weight * float(np.dot(v, v)))
            if norm > 0:
                worst = min(worst, float(np.dot(lam, v)) / norm)
        residuals["lambda_sign_sampled"] = max(0.0, -worst) if np.isfinite(worst) else 0.0

        smooth = [float(np.dot(lam, w * p)) for w in _smooth_weights(A.grid, SMOOTH_SAMPLES, rng)]
        diagnostics["smooth_c_min"] = min(smooth)

    thresholds = {name: tol for name in residuals}
    passed = all(value <= tol for value in residuals.values())
    return StationarityReport(
        class_tested=cls,
        residuals=residuals,
        thresholds=thresholds,
        passed=passed,
        exceptional_nodes=exceptional,
        diagnostics=diagnostics,
    )


def reduced_gradient(
    problem: ControlProblem, rho: float, pf: PenaltyFunction, u: StateVector, y0: Optional[StateVector] = None
) -> tuple[StateVector, StateVector, StateVector]:
    """H-gradient nu u - p of the penalized reduced objective, with the state and adjoint."""
    y = _state(problem, u, rho, pf, y0)
    p = solve_adjoint_penalized(problem, y, rho, pf)
    return problem.nu * u - p, y, p


def reduced_gradient_check(
    problem: ControlProblem,
    rho: float,
    pf: PenaltyFunction,
    u: StateVector,
    h: StateVector,
    eps: float = 1e-5,
) -> tuple[float, float, float]:
    """
    Compare (nu u - p, h)_H with the central difference of the reduced objective.

    Returns:
        Tuple of (adjoint value, finite difference, relative error)
    """
    grad, y, _ = reduced_gradient(problem, rho, pf, u)
    adjoint = problem.weight * float(np.dot(grad, h))
    plus = u + eps * h
    minus = u - eps * h
    j_plus = objective(problem, _state(problem, plus, rho, pf, y, tol=1e-13), plus)
    j_minus = objective(problem, _state(problem, minus, rho, pf, y, tol=1e-13), minus)
    fd = (j_plus - j_minus) / (2.0 * eps)
    rel = abs(adjoint - fd) / max(abs(adjoint), abs(fd), 1e-14)
    return adjoint, fd, rel


def lq_oracle(problem: ControlProblem) -> tuple[StateVector, StateVector]:
    """
    Dense optimum of the control problem without obstacle and box: (nu I + A^-T A^-1) u = A^-T y_d.

    Raises:
        ConfigError: If the control box is not unbounded
    """
    if not problem.unbounded:
        raise ConfigError("The linear-quadratic oracle requires u_a = -inf and u_b = +inf")
    dense = problem.A.to_dense()
    inv = np.linalg.inv(dense)
    system = problem.nu * np.eye(problem.A.size) + inv.T @ inv
    u = np.linalg.solve(system, inv.T @ problem.y_d)
    return u, inv @ u


def oc_multistart(
    problem: ControlProblem,
    rho_schedule: Optional[Sequence[float]] = None,
    n_starts: int = 5,
    seed: int = 0,
    jobs: int = 1,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> MultistartResult:
    """
    Run oc_path from several starting controls and keep the lowest objective.

    Start 0 is u = 0; the others are seeded Gaussian controls projected into the box.
    Ties are broken by start index. Starts run on a thread pool with ``jobs`` workers.
    """
    if n_starts < 1:
        raise ConfigError(f"n_starts must be at least 1, got {n_starts}")
    rng = np.random.default_rng(seed)
    scale = 1.0 + float(np.max(np.abs(problem.y_d), initial=0.0))
    starts = [np.zeros(problem.A.size)] + [
        project_box(scale * rng.standard_normal(problem.A.size), problem.u_a, problem.u_b)
        for _ in range(n_starts - 1)
    ]

    def run(start):
        try:
            return oc_path(problem, rho_schedule, u0=start, tol=tol, max_iter=max_iter)
        except SolverError as e:
            return e

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(run, starts))

    objectives, failures, best = [], [], None
    for k, outcome in enumerate(outcomes):
        if isinstance(outcome, Exception):
            failures.append((k, str(outcome)))
            objectives.append(float("inf"))
            continue
        bundle, _ = outcome
        value = objective(problem, bundle.y, bundle.u)
        objectives.append(value)
        if best is None or value < objectives[best]:
            best = k
    if best is None:
        raise PenaltyPathError("Every multistart run failed", report=tuple(failures))
    logger.info(f"Multistart: best start {best} with objective {objectives[best]:.6e}")
    bundle, report = outcomes[best]
    return MultistartResult(best, bundle, report, tuple(objectives), tuple(failures))

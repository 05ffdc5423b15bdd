"""
Scenario runners behind the CLI commands.

Each runner builds the discrete problem from a ScenarioConfig, calls the numerical
modules and collects every asserted invariant as a (value, threshold) check.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from qvi_lab.core.config_manager import FieldSpec, OperatorConfig, ScenarioConfig, evaluate_field
from qvi_lab.core.errors import ConfigError
from qvi_lab.core.linsolve import solve_sparse
from qvi_lab.core.mesh_operator import (
    DENSE_SPECTRUM_LIMIT,
    DiscreteOperator,
    Grid,
    assemble_operator,
    build_grid,
    h_norm,
)
from qvi_lab.core.obstacle_maps import (
    AffineScalingMap,
    ConstantMap,
    ObstacleMap,
    PdeInverseMap,
    build_example_one,
    build_example_two,
    contraction_threshold,
)
from qvi_lab.core.optimal_control import (
    ControlProblem,
    check_b_stationarity,
    check_stationarity,
    control_projection_residual,
    lq_oracle,
    oc_multistart,
    oc_path,
    project_box,
    reduced_gradient_check,
    tangent_directions,
)
from qvi_lab.core.project import RunPaths, write_csv, write_json
from qvi_lab.core.qvi_solver import (
    PenaltyFunction,
    QviSolution,
    penalty_bound_constant,
    penalty_path,
    solve_qvi_interval,
    solve_qvi_iteration,
)
from qvi_lab.core.sensitivity import (
    derivative_direction_continuity,
    derivative_threshold,
    fd_validate,
    solve_derivative_qvi,
)

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-10
ORDER_SLACK = 1e-8
RATIO_SLACK = 0.05
GRADIENT_CHECK_POINTS = 5


@dataclass
class Audit:
    """Asserted checks and recorded (never asserted) observations of one run."""

    checks: dict = field(default_factory=dict)
    observations: dict = field(default_factory=dict)

    def check(self, name: str, value: float, threshold: float) -> bool:
        value = float(value)
        passed = bool(value <= threshold)
        self.checks[name] = {"value": value, "threshold": float(threshold), "passed": passed}
        if not passed:
            logger.warning(f"Check '{name}' failed: {value:.6e} > {threshold:.6e}")
        return passed

    def observe(self, name: str, value, threshold: Optional[float] = None) -> None:
        entry = {"value": value}
        if threshold is not None:
            entry["threshold"] = float(threshold)
            entry["passed"] = bool(float(value) <= threshold)
        self.observations[name] = entry

    def residuals(self, prefix: str, sol: QviSolution, threshold: float) -> None:
        for name, value in sol.residuals.to_dict().items():
            self.check(f"{prefix}_{name}", value, threshold)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


@dataclass
class RunOutcome:
    results: dict
    history_header: list[str]
    history_rows: list[dict]
    report: dict

    @property
    def passed(self) -> bool:
        return bool(self.report["passed"])

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


@dataclass
class Problem:
    config: ScenarioConfig
    grid: Grid
    A: DiscreteOperator
    obstacle: ObstacleMap
    f: np.ndarray
    centers: list = field(default_factory=list)

    @property
    def constants(self) -> dict:
        method = "dense eigvalsh" if self.grid.node_count <= DENSE_SPECTRUM_LIMIT else "ARPACK Lanczos"
        return {
            "c_a": self.A.c_a,
            "c_b": self.A.c_b,
            "is_t_monotone": self.A.is_t_monotone,
            "spectral_method": method,
            "contraction_threshold": contraction_threshold(self.A),
        }


def _operator(grid: Grid, spec: OperatorConfig) -> DiscreteOperator:
    return assemble_operator(
        grid,
        diffusion=float(spec.diffusion),
        advection=spec.advection,
        reaction=float(spec.reaction),
        require_t_monotone=spec.require_t_monotone,
    )


def build_problem(config: ScenarioConfig) -> Problem:
    """Grid, operator, obstacle map and source of a scenario."""
    grid = build_grid(config.grid.dim, config.grid.n_per_axis)
    A = _operator(grid, config.operator)
    spec = config.obstacle
    centers: list = []

    f = None if config.source.type == "max_of_centers" else evaluate_field(config.source, grid)
    if spec.kind == "constant":
        obstacle = ConstantMap(evaluate_field(spec.profile, grid))
    elif spec.kind == "affine_scaling":
        obstacle = AffineScalingMap(float(spec.scale), evaluate_field(spec.offset, grid))
    elif spec.kind == "pde_inverse":
        L = A if spec.operator is None else _operator(grid, spec.operator)
        obstacle = PdeInverseMap(L, evaluate_field(spec.offset, grid), float(spec.scale))
    elif spec.kind == "cutoff_multiplicity_1":
        block = config.multiplicity
        centers = [evaluate_field(c, grid) for c in block.centers]
        obstacle, f_centers = build_example_one(A, centers, float(block.delta), seed=config.seed)
        if f is None:
            f = f_centers
    else:
        block = config.multiplicity
        targets = [evaluate_field(t, grid) for t in block.targets]
        delta = None if block.delta is None else float(block.delta)
        obstacle, centers = build_example_two(A, f, targets, delta, seed=config.seed)
    return Problem(config=config, grid=grid, A=A, obstacle=obstacle, f=f, centers=centers)


def _solution_payload(sol: QviSolution) -> dict:
    return {
        "route": sol.route,
        "y": sol.y,
        "xi": sol.xi,
        "obstacle": sol.obstacle,
        "sets": sol.sets.to_dict(),
        "residuals": sol.residuals.to_dict(),
        "iterations": len(sol.history),
    }


def _report(problem: Problem, command: str, audit: Audit) -> dict:
    config = problem.config
    return {
        "scenario": config.name,
        "command": command,
        "seed": config.seed,
        "grid": {"dim": problem.grid.dim, "n_per_axis": problem.grid.n_per_axis, "h": problem.grid.h},
        "obstacle_kind": problem.obstacle.kind,
        "constants": problem.constants,
        "checks": audit.checks,
        "observations": audit.observations,
        "passed": audit.passed,
    }


def _base_solution(problem: Problem) -> QviSolution:
    qvi = problem.config.qvi
    y0 = None if qvi.y0 is None else evaluate_field(qvi.y0, problem.grid)
    return solve_qvi_iteration(problem.A, problem.f, problem.obstacle, y0=y0, tol=qvi.tol, max_iter=qvi.max_iter)


def _contraction_factor(problem: Problem, sol: QviSolution) -> Optional[float]:
    """Certified C_Phi (1 + c_b / c_a) for maps with a global certificate."""
    if problem.obstacle.kind not in ("constant", "affine_scaling", "pde_inverse"):
        return None
    c_phi = problem.obstacle.lipschitz_certificate(sol.y, 1.0)
    return c_phi * (1.0 + problem.A.c_b / problem.A.c_a)


def _observed_ratio(sol: QviSolution) -> Optional[float]:
    scale = 1e-8 * (1.0 + np.max(np.abs(sol.y)))
    ratios = [
        rec.ratio
        for prev, rec in zip(sol.history, sol.history[1:])
        if rec.ratio is not None and prev.step_norm > scale
    ]
    return max(ratios) if ratios else None


def run_qvi_solve(config: ScenarioConfig, jobs: int = 1) -> RunOutcome:
    problem = build_problem(config)
    A, f, obstacle = problem.A, problem.f, problem.obstacle
    tol = config.tolerances
    audit = Audit()
    route = config.qvi.route

    if route == "iteration":
        sol = _base_solution(problem)
        audit.residuals("iteration", sol, tol.residual)
        q = _contraction_factor(problem, sol)
        if q is not None:
            audit.observe("contraction_factor", q)
            observed = _observed_ratio(sol)
            if q < 1.0 and observed is not None:
                audit.check("observed_contraction_ratio", observed, q + RATIO_SLACK)
        if obstacle.is_increasing and config.qvi.y0 is None:
            increase = max(
                (float(np.max(b - a)) for a, b in zip(sol.iterates, sol.iterates[1:])), default=0.0
            )
            audit.check("monotone_decrease", increase, MONOTONE_SLACK * (1.0 + np.max(np.abs(sol.y))))
        results = {"solution": _solution_payload(sol)}
        header = ["iteration", "step_norm", "ratio"]
        rows = [{"iteration": r.iteration, "step_norm": r.step_norm, "ratio": r.ratio} for r in sol.history]

    elif route == "interval":
        F = evaluate_field(config.qvi.upper_source, problem.grid)
        v0 = problem.grid.zeros() if config.qvi.v0 is None else evaluate_field(config.qvi.v0, problem.grid)
        minimal, maximal = solve_qvi_interval(
            A, f, F, v0, obstacle, tol=config.qvi.tol, max_iter=config.qvi.max_iter, seed=config.seed
        )
        audit.residuals("interval_min", minimal, tol.residual)
        audit.residuals("interval_max", maximal, tol.residual)
        audit.check("min_le_max", float(np.max(minimal.y - maximal.y)), ORDER_SLACK)
        inside = solve_qvi_iteration(A, f, obstacle, tol=config.qvi.tol, max_iter=config.qvi.max_iter)
        audit.check(
            "iteration_bracketed",
            max(float(np.max(minimal.y - inside.y)), float(np.max(inside.y - maximal.y))),
            ORDER_SLACK,
        )
        results = {"minimal": _solution_payload(minimal), "maximal": _solution_payload(maximal)}
        header = ["route", "iteration", "step_norm", "ratio"]
        rows = [
            {"route": sol.route, "iteration": r.iteration, "step_norm": r.step_norm, "ratio": r.ratio}
            for sol in (minimal, maximal)
            for r in sol.history
        ]

    else:
        sol, path = penalty_path(A, f, obstacle, config.qvi.rho_schedule)
        audit.residuals("penalty", sol, tol.residual)
        increases = [b - a for a, b in zip(path.violations, path.violations[1:])]
        audit.check("violation_nonincreasing", max(increases, default=0.0), 1e-12)
        zero = problem.grid.zeros()
        if np.all(obstacle.eval(zero) >= 0.0):
            bound = 2.0 * penalty_bound_constant(A.c_a, A.c_b) * float(np.linalg.norm(f))
            largest = max(float(np.linalg.norm(y)) for y in path.iterates)
            audit.check("uniform_penalty_bound", largest, bound)
        q = _contraction_factor(problem, sol)
        if q is not None and q < 1.0 and obstacle.is_increasing:
            reference = solve_qvi_iteration(A, f, obstacle, tol=config.qvi.tol, max_iter=config.qvi.max_iter)
            audit.check("route_agreement", float(np.max(np.abs(sol.y - reference.y))), 1e-4)
        results = {"solution": _solution_payload(sol), "rhos": list(path.rhos)}
        header = ["rho", "violation", "newton_iterations", "residual"]
        rows = path.rows()

    return RunOutcome(results, header, rows, _report(problem, "qvi-solve", audit))


def _random_directions(count: int, size: int, scale: float, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [scale * rng.standard_normal(size) for _ in range(count)]


def _sensitivity_checks(
    audit: Audit, problem: Problem, sol: QviSolution, d: np.ndarray, prefix: str, force: bool
):
    sens = solve_derivative_qvi(problem.A, d, sol, problem.obstacle, force=force)
    threshold = derivative_threshold(d, sens.alpha, problem.config.tolerances.derivative)
    for name, value in sens.residuals.to_dict().items():
        audit.check(f"{prefix}derivative_{name}", value, threshold)
    return sens


def run_sensitivity(config: ScenarioConfig, jobs: int = 1) -> RunOutcome:
    if config.sensitivity is None:
        raise ConfigError("The sensitivity command needs a 'sensitivity' block")
    problem = build_problem(config)
    A, f, obstacle = problem.A, problem.f, problem.obstacle
    block = config.sensitivity
    audit = Audit()

    sol = _base_solution(problem)
    audit.residuals("base", sol, config.tolerances.residual)
    d = evaluate_field(block.direction, problem.grid)

    sens = _sensitivity_checks(audit, problem, sol, d, "", block.force)
    audit.observe("derivative_certificate", sens.certificate, A.c_a / A.c_b)
    if sens.contraction_ratio is not None:
        ratio_bound = A.c_b * sens.certificate / A.c_a + RATIO_SLACK
        if sens.certificate < A.c_a / A.c_b:
            audit.check("outer_contraction_ratio", sens.contraction_ratio, ratio_bound)
        else:
            audit.observe("outer_contraction_ratio", sens.contraction_ratio, ratio_bound)

    doubled = solve_derivative_qvi(A, 2.0 * d, sol, obstacle, force=block.force)
    audit.check(
        "positive_homogeneity",
        float(np.max(np.abs(doubled.alpha - 2.0 * sens.alpha))),
        1e-9 * (1.0 + np.max(np.abs(sens.alpha))),
    )
    if sol.sets.strongly_active.size == 0 and sol.sets.biactive.size == 0:
        free, _ = solve_sparse(A.matrix, d, 1e-12)
        audit.check(
            "unconstrained_agreement",
            float(np.max(np.abs(sens.alpha - free))),
            config.tolerances.derivative * (1.0 + np.max(np.abs(free))),
        )

    fd = fd_validate(A, f, obstacle, d, sol, block.steps, sensitivity=sens, force=block.force)
    floor = config.tolerances.fd_floor
    rises = [b - a for a, b in zip(fd.ratios, fd.ratios[1:]) if not b <= floor]
    audit.check("fd_ratio_decrease", max(rises, default=0.0), 0.0)
    audit.check("fd_inner_failures", float(len(fd.errors)), 0.0)
    audit.observe("fd_slope", fd.slope)
    audit.observe("fd_max_distance", fd.max_distance)

    scale = float(np.max(np.abs(d))) or 1.0
    directions = [d, 1.01 * d] + _random_directions(block.random_directions, A.size, scale, config.seed)
    continuity = derivative_direction_continuity(A, sol, obstacle, directions, force=block.force)
    worst = max((dist / bound for _, _, dist, bound in continuity.pairs if bound > 0), default=0.0)
    audit.check("continuity_bound_ratio", worst, 1.0)
    audit.observe("continuity_constant", continuity.constant)

    results = {
        "base": _solution_payload(sol),
        "alpha": sens.alpha,
        "xi_d": sens.xi_d,
        "iterations": sens.iterations,
        "fd": {"steps": list(fd.steps), "ratios": list(fd.ratios), "slope": fd.slope, "errors": list(fd.errors)},
    }
    return RunOutcome(results, ["step", "ratio"], fd.rows(), _report(problem, "sensitivity", audit))


def _bound(spec: Optional[FieldSpec], grid: Grid, default: float) -> np.ndarray:
    return np.full(grid.node_count, default) if spec is None else evaluate_field(spec, grid)


def run_control(config: ScenarioConfig, jobs: int = 1) -> RunOutcome:
    if config.control is None:
        raise ConfigError("The control command needs a 'control' block")
    problem = build_problem(config)
    block = config.control
    tol = config.tolerances
    grid = problem.grid
    ocp = ControlProblem(
        A=problem.A,
        obstacle=problem.obstacle,
        y_d=evaluate_field(block.y_d, grid),
        nu=float(block.nu),
        u_a=_bound(block.u_a, grid, -np.inf),
        u_b=_bound(block.u_b, grid, np.inf),
    )
    audit = Audit()

    if block.starts > 1:
        multi = oc_multistart(
            ocp, block.rho_schedule, block.starts, config.seed, jobs, tol=block.tol, max_iter=block.max_iter
        )
        bundle, path = multi.bundle, multi.report
        audit.observe("multistart_objectives", list(multi.objectives))
        audit.observe("multistart_best", multi.best_index)
    else:
        bundle, path = oc_path(ocp, block.rho_schedule, tol=block.tol, max_iter=block.max_iter)

    reports = {cls: check_stationarity(ocp, bundle, cls, tol=tol.stationarity, seed=config.seed) for cls in ("weakC", "eAlmostC", "C", "strong")}
    for cls in ("weakC", "eAlmostC"):
        for name, value in reports[cls].residuals.items():
            audit.check(f"{cls}_{name}", value, tol.stationarity)
    for cls in ("C", "strong"):
        audit.observe(f"{cls}_passed", reports[cls].passed)
    audit.observe("exceptional_nodes", list(reports["eAlmostC"].exceptional_nodes))
    audit.observe("lambda_gap", bundle.lambda_gap)

    certified = problem.obstacle.deriv_norm(bundle.y) < problem.A.c_a / problem.A.c_b
    directions = tangent_directions(ocp, bundle, block.directions, config.seed)
    b_report = check_b_stationarity(ocp, bundle, directions, tol=tol.stationarity, force=not certified)
    if certified:
        audit.check("b_stationarity", b_report.residuals["b_stationarity"], tol.stationarity)
        audit.check("b_direction_failures", float(len(b_report.diagnostics["failures"])), 0.0)
    else:
        audit.observe("b_stationarity", b_report.residuals["b_stationarity"], tol.stationarity)

    audit.check("control_projection", control_projection_residual(ocp, bundle.u, bundle.p), tol.stationarity)

    rng = np.random.default_rng(config.seed)
    for rho in block.gradient_check_rhos:
        pf = PenaltyFunction(float(rho))
        errors = []
        for _ in range(GRADIENT_CHECK_POINTS):
            u = project_box(bundle.u + 0.1 * rng.standard_normal(grid.node_count), ocp.u_a, ocp.u_b)
            h = rng.standard_normal(grid.node_count)
            errors.append(reduced_gradient_check(ocp, float(rho), pf, u, h / np.linalg.norm(h))[2])
        audit.check(f"reduced_gradient_rho_{float(rho):g}", max(errors), tol.gradient)

    if ocp.unbounded and bundle.sets.inactive.size == grid.node_count:
        u_lq, y_lq = lq_oracle(ocp)
        audit.check("lq_control", float(np.max(np.abs(bundle.u - u_lq))), 1e-6)
        audit.check("lq_state", float(np.max(np.abs(bundle.y - y_lq))), 1e-6)
        audit.check("lq_multipliers", float(max(np.max(np.abs(bundle.lam)), np.max(np.abs(bundle.xi)))), tol.stationarity)

    drifts = [d for d in path.drifts if d is not None]
    audit.observe("drifts", drifts)
    audit.observe("path_failures", [list(item) for item in path.failures])

    results = {
        "bundle": bundle.to_dict(),
        "objective": path.objectives[-1],
        "stationarity": {cls: r.to_dict() for cls, r in reports.items()} | {"B": b_report.to_dict()},
    }
    header = ["rho", "objective", "stationarity", "drift"]
    return RunOutcome(results, header, path.rows(), _report(problem, "control", audit))


def run_multiplicity(config: ScenarioConfig, jobs: int = 1) -> RunOutcome:
    if config.multiplicity is None:
        raise ConfigError("The multiplicity-demo command needs a 'multiplicity' block")
    if not config.obstacle.kind.startswith("cutoff"):
        raise ConfigError("The multiplicity-demo command needs a cutoff obstacle map")
    problem = build_problem(config)
    A, f, obstacle, grid = problem.A, problem.f, problem.obstacle, problem.grid
    tol = config.tolerances
    audit = Audit()
    direction = (
        np.ones(grid.node_count)
        if config.sensitivity is None
        else evaluate_field(config.sensitivity.direction, grid)
    )

    solutions, rows = [], []
    for k, center in enumerate(problem.centers):
        sol = solve_qvi_iteration(A, f, obstacle, y0=center, tol=config.qvi.tol, max_iter=config.qvi.max_iter)
        audit.check(
            f"solution_{k}_returns_center",
            float(np.max(np.abs(sol.y - center))),
            tol.certificate * (1.0 + np.max(np.abs(center))),
        )
        audit.residuals(f"solution_{k}", sol, tol.certificate)
        sens = _sensitivity_checks(audit, problem, sol, direction, f"solution_{k}_", False)
        solutions.append({"solution": _solution_payload(sol), "alpha": sens.alpha})
        rows.extend(
            {"solution": k, "iteration": r.iteration, "step_norm": r.step_norm} for r in sol.history
        )

    delta = obstacle.spec.delta
    for i in range(len(problem.centers)):
        for j in range(i + 1, len(problem.centers)):
            gap = h_norm(grid, np.asarray(solutions[i]["solution"]["y"]) - solutions[j]["solution"]["y"])
            audit.check(f"separation_{i}_{j}", 2.0 * delta - gap, 0.0)
    audit.observe("delta", delta)

    results = {"example": config.multiplicity.example, "source": f, "solutions": solutions}
    return RunOutcome(
        results, ["solution", "iteration", "step_norm"], rows, _report(problem, "multiplicity-demo", audit)
    )


RUNNERS: dict[str, Callable[[ScenarioConfig, int], RunOutcome]] = {
    "qvi-solve": run_qvi_solve,
    "sensitivity": run_sensitivity,
    "control": run_control,
    "multiplicity-demo": run_multiplicity,
}


def write_outcome(paths: RunPaths, outcome: RunOutcome) -> None:
    paths.ensure()
    paths.error.unlink(missing_ok=True)
    write_json(paths.results, outcome.results)
    write_csv(paths.history, outcome.history_header, outcome.history_rows)
    write_json(paths.report, outcome.report)

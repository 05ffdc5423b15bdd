import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qvi_lab.core.errors import ConfigError
from qvi_lab.core.mesh_operator import assemble_operator, build_grid
from qvi_lab.core.obstacle_maps import ConstantMap
from qvi_lab.core.optimal_control import (
    ControlProblem,
    check_b_stationarity,
    check_stationarity,
    control_projection_residual,
    lq_oracle,
    objective,
    oc_multistart,
    oc_path,
    project_box,
    reduced_gradient_check,
    tangent_directions,
)
from qvi_lab.core.qvi_solver import PenaltyFunction

SCHEDULE = (1e-2, 1e-4, 1e-6)


def _problem(profile, u_a=-np.inf, u_b=np.inf, nu=0.01):
    grid = build_grid(1, 15)
    A = assemble_operator(grid)
    n = grid.node_count
    x = grid.coordinates()[:, 0]
    return ControlProblem(
        A=A,
        obstacle=ConstantMap(np.full(n, profile)),
        y_d=0.5 * np.sin(np.pi * x),
        nu=nu,
        u_a=np.full(n, u_a),
        u_b=np.full(n, u_b),
    )


@pytest.fixture(scope="module")
def unbounded():
    problem = _problem(10.0)
    bundle, report = oc_path(problem, SCHEDULE)
    return problem, bundle, report


@pytest.fixture(scope="module")
def boxed():
    problem = _problem(0.1, u_a=0.0, u_b=20.0)
    bundle, report = oc_path(problem, (1e-1, 1e-3, 1e-5, 1e-7, 1e-9))
    return problem, bundle, report


def test_problem_validation():
    with pytest.raises(ConfigError, match="nu"):
        _problem(1.0, nu=0.0)
    with pytest.raises(ConfigError, match="u_a <= u_b"):
        _problem(1.0, u_a=1.0, u_b=0.0)
    with pytest.raises(ConfigError, match="NaN"):
        _problem(1.0, u_a=np.nan)


bounds = arrays(np.float64, 6, elements=st.floats(-10.0, 10.0))


@given(bounds, bounds, bounds)
def test_project_box(u, a, b):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    projected = project_box(u, lo, hi)
    assert np.all(lo <= projected) and np.all(projected <= hi)
    np.testing.assert_array_equal(project_box(projected, lo, hi), projected)


def test_objective_uses_grid_weight():
    problem = _problem(1.0)
    y = problem.y_d + 1.0
    u = np.ones(problem.A.size)
    expected = 0.5 * problem.weight * problem.A.size * (1.0 + problem.nu)
    assert objective(problem, y, u) == pytest.approx(expected)


def test_unbounded_problem_matches_lq_oracle(unbounded):
    problem, bundle, report = unbounded
    u_lq, y_lq = lq_oracle(problem)
    assert bundle.sets.inactive.size == problem.A.size
    np.testing.assert_allclose(bundle.u, u_lq, atol=1e-5 * (1 + np.max(np.abs(u_lq))))
    np.testing.assert_allclose(bundle.y, y_lq, atol=1e-6)
    assert np.max(np.abs(bundle.lam)) <= 1e-6
    assert report.rhos == SCHEDULE
    assert report.drifts[0] is None
    assert report.failures == ()


def test_lq_oracle_requires_unbounded_box():
    with pytest.raises(ConfigError):
        lq_oracle(_problem(10.0, u_a=0.0))


def test_unbounded_stationarity(unbounded):
    problem, bundle, _ = unbounded
    for cls in ("weakC", "eAlmostC", "C", "strong"):
        report = check_stationarity(problem, bundle, cls)
        assert report.passed, report.to_dict()
    assert control_projection_residual(problem, bundle.u, bundle.p) <= 1e-6


def test_b_stationarity_without_active_nodes(unbounded):
    problem, bundle, _ = unbounded
    report = check_b_stationarity(problem, bundle, tangent_directions(problem, bundle, 10, seed=2))
    assert report.passed
    assert report.diagnostics["directions"] == 10


def test_perturbed_control_is_not_b_stationary(unbounded):
    problem, bundle, _ = unbounded
    perturbed = dataclasses.replace(bundle, u=bundle.u + 1.0)
    report = check_b_stationarity(problem, perturbed, tangent_directions(problem, bundle, 20, seed=3))
    assert not report.passed
    assert report.residuals["b_stationarity"] > 1e-4


def test_egorov_exemption(unbounded):
    problem, bundle, _ = unbounded
    lam = bundle.lam.copy()
    lam[4] = 1.0
    spiked = dataclasses.replace(bundle, lam=lam)
    almost = check_stationarity(problem, spiked, "eAlmostC", tau=0.05)
    assert almost.exceptional_nodes == (4,)
    assert almost.residuals["lambda_inactive"] <= 1e-6
    strict = check_stationarity(problem, spiked, "C")
    assert strict.residuals["lambda_inactive"] == pytest.approx(1.0)
    assert not strict.passed


def test_unknown_stationarity_class(unbounded):
    problem, bundle, _ = unbounded
    with pytest.raises(ConfigError, match="Valid options"):
        check_stationarity(problem, bundle, "M")


def test_box_constrained_path(boxed):
    problem, bundle, report = boxed
    assert np.all(bundle.u >= 0.0) and np.all(bundle.u <= 20.0)
    assert np.max(bundle.y - 0.1) <= 1e-6
    assert bundle.sets.active.size > 0
    assert control_projection_residual(problem, bundle.u, bundle.p) <= 1e-6
    assert check_stationarity(problem, bundle, "weakC").passed
    # constant obstacle: weak and E-almost C-stationarity coincide up to the exemption
    assert check_stationarity(problem, bundle, "eAlmostC").residuals["xi_p_plus"] <= 1e-6
    assert len(report.objectives) == len(report.rhos)


def test_tangent_directions_respect_box(boxed):
    problem, bundle, _ = boxed
    for h in tangent_directions(problem, bundle, 5, seed=1):
        assert np.all(h[bundle.at_lower] >= 0.0)
        assert np.all(h[bundle.at_upper] <= 0.0)


@pytest.mark.parametrize("rho", [1e-1, 1e-3])
def test_reduced_gradient_matches_finite_differences(rho):
    problem = _problem(0.1, u_a=0.0, u_b=20.0)
    rng = np.random.default_rng(7)
    u = 5.0 + rng.standard_normal(problem.A.size)
    h = rng.standard_normal(problem.A.size)
    adjoint, fd, rel = reduced_gradient_check(problem, rho, PenaltyFunction(rho), u, h / np.linalg.norm(h))
    assert rel <= 1e-4, (adjoint, fd)


def test_multistart_keeps_best(unbounded):
    problem, _, _ = unbounded
    result = oc_multistart(problem, SCHEDULE, n_starts=3, seed=4, jobs=2)
    assert len(result.objectives) == 3
    assert result.objectives[result.best_index] == min(result.objectives)
    assert result.failures == ()
    with pytest.raises(ConfigError):
        oc_multistart(problem, SCHEDULE, n_starts=0)


def test_path_rejects_bad_schedule():
    with pytest.raises(ConfigError):
        oc_path(_problem(1.0), (1e-3, 1e-2))

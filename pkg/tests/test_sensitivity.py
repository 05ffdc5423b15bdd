"""Directional derivatives of the QVI solution map."""

import numpy as np
import pytest

from qvi_lab.core.errors import CertificateError, ConfigError, GridMismatchError
from qvi_lab.core.obstacle_maps import AffineScalingMap, ConstantMap
from qvi_lab.core.qvi_solver import solve_qvi_iteration
from qvi_lab.core.sensitivity import (
    build_critical_cone,
    derivative_direction_continuity,
    derivative_threshold,
    fd_validate,
    solve_derivative_qvi,
)
from tests.test_vi_solver import enumerate_cone


@pytest.fixture
def biactive_base(laplace5):
    """Base point with node 2 biactive (y = psi and xi = 0) and all other nodes inactive."""
    y_star = np.array([0.05, 0.08, 0.1, 0.08, 0.05])
    psi = np.array([1.0, 1.0, 0.1, 1.0, 1.0])
    f = laplace5.apply(y_star)
    obstacle = ConstantMap(psi)
    sol = solve_qvi_iteration(laplace5, f, obstacle, tol=1e-12)
    return laplace5, f, obstacle, sol


def test_biactive_classification(biactive_base):
    _, _, _, sol = biactive_base
    np.testing.assert_array_equal(sol.sets.biactive, [2])
    np.testing.assert_array_equal(sol.sets.inactive, [0, 1, 3, 4])
    assert sol.sets.strongly_active.size == 0


def test_derivative_matches_cone_enumeration(biactive_base):
    A, f, obstacle, sol = biactive_base
    d = np.array([1.0, -2.0, 50.0, -1.0, 3.0])
    sens = solve_derivative_qvi(A, d, sol, obstacle)
    np.testing.assert_allclose(sens.alpha, enumerate_cone(A.to_dense(), d, [], [2]), atol=1e-10)
    assert sens.alpha[2] <= 1e-12
    assert sens.residuals.passes(sens.threshold)
    # xi_d lies in the polar cone: zero off the active set, nonnegative on the biactive node
    assert np.max(np.abs(sens.xi_d[[0, 1, 3, 4]])) <= 1e-9
    assert sens.xi_d[2] >= -1e-9


def test_derivative_is_not_linear(biactive_base):
    A, f, obstacle, sol = biactive_base
    d = np.array([1.0, -2.0, 50.0, -1.0, 3.0])
    plus = solve_derivative_qvi(A, d, sol, obstacle).alpha
    minus = solve_derivative_qvi(A, -d, sol, obstacle).alpha
    # -d pulls node 2 away from the obstacle, so the free solve applies
    np.testing.assert_allclose(minus, np.linalg.solve(A.to_dense(), -d), rtol=1e-9)
    assert np.max(np.abs(plus + minus)) > 1e-3


@pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
def test_positive_homogeneity(biactive_base, scale):
    A, f, obstacle, sol = biactive_base
    d = np.array([1.0, -2.0, 50.0, -1.0, 3.0])
    base = solve_derivative_qvi(A, d, sol, obstacle).alpha
    scaled = solve_derivative_qvi(A, scale * d, sol, obstacle).alpha
    np.testing.assert_allclose(scaled, scale * base, atol=1e-9 * (1 + np.max(np.abs(base))))


def test_finite_differences_exact_on_piecewise_linear_vi(biactive_base):
    A, f, obstacle, sol = biactive_base
    d = np.array([1.0, -2.0, 50.0, -1.0, 3.0])
    report = fd_validate(A, f, obstacle, d, sol, [1e-2, 1e-3, 1e-4])
    assert max(report.ratios) <= 1e-6
    assert report.errors == ()
    assert [row["step"] for row in report.rows()] == [1e-2, 1e-3, 1e-4]


def test_unconstrained_derivative(laplace20):
    n = laplace20.size
    obstacle = ConstantMap(np.full(n, 100.0))
    f = np.ones(n)
    sol = solve_qvi_iteration(laplace20, f, obstacle)
    d = np.linspace(-1.0, 1.0, n)
    sens = solve_derivative_qvi(laplace20, d, sol, obstacle)
    np.testing.assert_allclose(sens.alpha, np.linalg.solve(laplace20.to_dense(), d), rtol=1e-8, atol=1e-12)


def test_pde_inverse_derivative(pde_inverse_problem):
    A, f, obstacle = pde_inverse_problem
    sol = solve_qvi_iteration(A, f, obstacle, tol=1e-12)
    d = np.sin(np.pi * A.grid.coordinates()[:, 0])
    sens = solve_derivative_qvi(A, d, sol, obstacle)
    assert sens.certificate < A.c_a / A.c_b
    assert sens.iterations > 1
    assert sens.residuals.passes(derivative_threshold(d, sens.alpha))
    assert sens.contraction_ratio is not None
    assert sens.contraction_ratio <= A.c_b * sens.certificate / A.c_a + 0.05

    report = fd_validate(A, f, obstacle, d, sol, [1e-1, 1e-2, 1e-3], sensitivity=sens)
    assert report.is_decreasing(floor=1e-7)
    assert report.errors == ()


def test_certificate_failure(laplace20):
    n = laplace20.size
    obstacle = AffineScalingMap(0.5, np.full(n, 0.05))
    f = np.full(n, 5.0)
    sol = solve_qvi_iteration(laplace20, f, obstacle, tol=1e-12)
    with pytest.raises(CertificateError):
        solve_derivative_qvi(laplace20, np.ones(n), sol, obstacle)


def test_fd_step_validation(biactive_base):
    A, f, obstacle, sol = biactive_base
    with pytest.raises(ConfigError):
        fd_validate(A, f, obstacle, np.ones(5), sol, [1e-3, 1e-2])
    with pytest.raises(ConfigError):
        fd_validate(A, f, obstacle, np.ones(5), sol, [])


def test_direction_continuity(pde_inverse_problem):
    A, f, obstacle = pde_inverse_problem
    sol = solve_qvi_iteration(A, f, obstacle, tol=1e-12)
    rng = np.random.default_rng(5)
    directions = [np.ones(A.size), 1.01 * np.ones(A.size)] + list(rng.standard_normal((5, A.size)))
    report = derivative_direction_continuity(A, sol, obstacle, directions)
    assert report.passed
    assert len(report.pairs) == 21
    assert report.constant > 0


def test_continuity_needs_two_directions(biactive_base):
    A, f, obstacle, sol = biactive_base
    with pytest.raises(ConfigError):
        derivative_direction_continuity(A, sol, obstacle, [np.ones(5)])


def test_derivative_at_multiplicity_center(example_one):
    A, f, obstacle, centers = example_one
    sol = solve_qvi_iteration(A, f, obstacle, y0=centers[0], tol=1e-12)
    sens = solve_derivative_qvi(A, np.ones(A.size), sol, obstacle)
    assert sens.certificate == 0.0
    assert sens.iterations == 1
    assert sens.residuals.passes(sens.threshold)


def test_critical_cone_copies_sets(biactive_base):
    A, _, obstacle, sol = biactive_base
    cone = build_critical_cone(sol, obstacle)
    np.testing.assert_array_equal(cone.biactive, [2])
    np.testing.assert_array_equal(cone.inactive, [0, 1, 3, 4])
    np.testing.assert_array_equal(cone.shift, np.zeros(A.size))
    with pytest.raises(GridMismatchError):
        build_critical_cone(sol, ConstantMap(np.ones(A.size + 1)))

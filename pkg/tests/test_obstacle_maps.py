import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvi_lab.core.errors import ConfigError
from qvi_lab.core.mesh_operator import assemble_operator, build_grid
from qvi_lab.core.obstacle_maps import (
    AffineScalingMap,
    ConstantMap,
    CutoffMap,
    CutoffSpec,
    PdeInverseMap,
    build_example_two,
    check_increasing,
    contraction_threshold,
    create_obstacle_map,
    cutoff,
    smooth_step,
)
from qvi_lab.core.vi_solver import solve_vi_upper


def central_difference(obstacle, y, h, eps=1e-6):
    return (obstacle.eval(y + eps * h) - obstacle.eval(y - eps * h)) / (2 * eps)


def test_constant_map(laplace5):
    psi = np.linspace(0.0, 1.0, 5)
    obstacle = ConstantMap(psi)
    np.testing.assert_array_equal(obstacle.eval(np.ones(5)), psi)
    np.testing.assert_array_equal(obstacle.deriv(np.ones(5), np.ones(5)), np.zeros(5))
    assert obstacle.deriv_norm(np.zeros(5)) == 0.0
    assert obstacle.is_increasing


def test_affine_scaling():
    obstacle = AffineScalingMap(-0.5, np.ones(3))
    np.testing.assert_allclose(obstacle.eval(np.array([2.0, 0.0, -2.0])), [0.0, 1.0, 2.0])
    assert obstacle.deriv_norm(np.zeros(3)) == pytest.approx(0.5)
    assert not obstacle.is_increasing
    with pytest.raises(ConfigError):
        obstacle.eval(np.zeros(4))


def test_pde_inverse_derivative_and_certificate(laplace20):
    obstacle = PdeInverseMap(laplace20, np.full(20, 0.1), scale=2.0)
    rng = np.random.default_rng(0)
    y, h = rng.standard_normal((2, 20))
    np.testing.assert_allclose(obstacle.deriv(y, h), central_difference(obstacle, y, h), rtol=1e-6, atol=1e-9)
    expected = 2.0 * np.linalg.norm(np.linalg.inv(laplace20.to_dense()), 2)
    assert obstacle.deriv_norm(y) == pytest.approx(expected, rel=1e-8)
    assert obstacle.lipschitz_certificate(y, 1.0) == pytest.approx(expected, rel=1e-8)
    assert obstacle.is_increasing


def test_smooth_step_shape():
    values = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0])


@settings(max_examples=100)
@given(st.floats(min_value=0.0, max_value=4.0))
def test_cutoff_plateau(t):
    delta = 0.5
    value = cutoff(t * delta**2, delta)[0]
    assert 0.0 <= value <= 1.0
    if t <= 1.0:
        assert value == 1.0
    if t >= 2.0:
        assert value == 0.0


def _two_centers(grid):
    x = grid.coordinates()[:, 0]
    return [np.sin(np.pi * x), 0.5 * np.sin(2 * np.pi * x)]


def test_cutoff_map_fixed_points_and_derivative():
    grid = build_grid(1, 20)
    centers = _two_centers(grid)
    obstacle = CutoffMap(CutoffSpec.build(grid, 0.1, centers))
    for c in centers:
        np.testing.assert_array_equal(obstacle.eval(c), c)
        assert obstacle.deriv_norm(c) == 0.0

    # in the transition band the derivative is nonzero and matches finite differences
    direction = centers[1] - centers[0]
    direction /= np.sqrt(grid.weight * np.sum(direction**2))
    y = centers[0] + 0.12 * direction
    h = np.random.default_rng(1).standard_normal(grid.node_count)
    np.testing.assert_allclose(obstacle.deriv(y, h), central_difference(obstacle, y, h), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(obstacle.deriv_matrix(y) @ h, obstacle.deriv(y, h), atol=1e-12)
    assert obstacle.deriv_norm(y) > 0.0
    assert obstacle.lipschitz_certificate(centers[0], 0.2) >= obstacle.deriv_norm(y)


def test_cutoff_separation_is_enforced():
    grid = build_grid(1, 20)
    centers = _two_centers(grid)
    with pytest.raises(ConfigError, match="separation"):
        CutoffSpec.build(grid, 1.0, centers)
    with pytest.raises(ConfigError):
        CutoffSpec.build(grid, 0.1, centers[:1])


def test_create_obstacle_map(laplace5):
    assert create_obstacle_map("constant", profile=np.zeros(5)).kind == "constant"
    assert create_obstacle_map("pde_inverse", operator=laplace5, offset=np.zeros(5)).kind == "pde_inverse"
    with pytest.raises(ConfigError, match="Valid options"):
        create_obstacle_map("quadratic")


def test_check_increasing(laplace20):
    lower, upper = np.zeros(20), np.ones(20)
    assert check_increasing(PdeInverseMap(laplace20, np.zeros(20), 0.5), lower, upper)
    assert not check_increasing(AffineScalingMap(-1.0, np.zeros(20)), lower, upper)


def test_contraction_threshold(laplace5):
    assert contraction_threshold(laplace5) == pytest.approx(laplace5.c_a / (laplace5.c_a + laplace5.c_b))
    assert 0.0 < contraction_threshold(laplace5) < 0.5


def test_example_one_source(example_one):
    A, f, obstacle, centers = example_one
    for c in centers:
        assert np.all(A.apply(c) <= f + 1e-12)
    assert obstacle.kind == "cutoff_multiplicity_1"


def test_example_two_solutions():
    grid = build_grid(1, 20)
    A = assemble_operator(grid)
    f = np.full(grid.node_count, 10.0)
    targets = [np.full(grid.node_count, 0.2), np.full(grid.node_count, 0.4)]
    obstacle, solutions = build_example_two(A, f, targets)
    assert obstacle.kind == "cutoff_multiplicity_2"
    gap = np.sqrt(grid.weight * np.sum((solutions[0] - solutions[1]) ** 2))
    assert obstacle.spec.delta == pytest.approx(0.45 * gap)
    for y, psi in zip(solutions, targets):
        np.testing.assert_array_equal(obstacle.eval(y), psi)
        np.testing.assert_allclose(solve_vi_upper(A, f, psi).y, y)

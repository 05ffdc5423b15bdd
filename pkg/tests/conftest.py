"""Shared fixtures: small grids, operators and reference problems."""

import json
from pathlib import Path

import numpy as np
import pytest

from qvi_lab.core.mesh_operator import assemble_operator, build_grid
from qvi_lab.core.obstacle_maps import ConstantMap, PdeInverseMap, build_example_one


@pytest.fixture
def grid5():
    return build_grid(1, 5)


@pytest.fixture
def laplace5(grid5):
    """1D Laplacian on five interior nodes (h = 1/6)."""
    return assemble_operator(grid5)


@pytest.fixture
def reaction5(grid5):
    return assemble_operator(grid5, diffusion=1.0, reaction=1.0)


@pytest.fixture
def laplace20():
    return assemble_operator(build_grid(1, 20))


@pytest.fixture
def advection2d():
    return assemble_operator(build_grid(2, 6), diffusion=1.0, advection=[2.0, -1.0], reaction=0.5)


@pytest.fixture
def enumeration_instance(laplace5):
    """Five-node obstacle problem small enough to brute-force over all 2^5 active sets."""
    f = np.array([30.0, -5.0, 40.0, 10.0, 25.0])
    psi = np.array([0.3, 0.5, 0.2, 1.0, 0.4])
    return laplace5, f, psi


@pytest.fixture
def pde_inverse_problem():
    """Contractive PDE-inverse obstacle: Phi(y) = 0.05 + 0.005 A^-1 y."""
    grid = build_grid(1, 30)
    A = assemble_operator(grid)
    obstacle = PdeInverseMap(A, np.full(grid.node_count, 0.05), 0.005)
    f = np.full(grid.node_count, 10.0)
    return A, f, obstacle


@pytest.fixture
def constant_obstacle_problem(laplace20):
    n = laplace20.size
    return laplace20, np.full(n, 8.0), ConstantMap(np.full(n, 0.2))


@pytest.fixture
def example_one():
    """Cutoff map with two fixed points sin(pi x) and 0.5 sin(2 pi x)."""
    grid = build_grid(1, 20)
    A = assemble_operator(grid)
    x = grid.coordinates()[:, 0]
    centers = [np.sin(np.pi * x), 0.5 * np.sin(2 * np.pi * x)]
    obstacle, f = build_example_one(A, centers, delta=0.1)
    return A, f, obstacle, centers


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict to tmp_path and return its path."""

    def _write(data: dict, name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write

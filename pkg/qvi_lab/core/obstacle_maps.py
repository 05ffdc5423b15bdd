"""
Obstacle maps Phi with exact directional derivatives and Lipschitz certificates.

All maps share the ObstacleMap interface so the QVI, sensitivity and control
code can swap them freely. Use ``create_obstacle_map`` to build one by kind.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from qvi_lab.core.errors import ConfigError
from qvi_lab.core.linsolve import factorize
from qvi_lab.core.mesh_operator import DiscreteOperator, DualVector, Grid, StateVector, inverse_norm
from qvi_lab.core.vi_solver import solve_vi_upper

logger = logging.getLogger(__name__)

CERTIFICATE_SAMPLES = 200
CERTIFICATE_SAFETY = 1.5
EXAMPLE_TWO_DELTA_FRACTION = 0.45

MAP_KINDS = (
    "pde_inverse",
    "cutoff_multiplicity_1",
    "cutoff_multiplicity_2",
    "constant",
    "affine_scaling",
)


class ObstacleMap(ABC):
    """Abstract obstacle map Phi: V -> V."""

    kind: str = ""

    def __init__(self, size: int):
        self.size = size

    @abstractmethod
    def eval(self, y: StateVector) -> StateVector:
        """Evaluate Phi(y)."""

    @abstractmethod
    def deriv(self, y: StateVector, hdir: StateVector) -> StateVector:
        """Directional derivative Phi'(y)(hdir); linear in hdir."""

    @abstractmethod
    def deriv_matrix(self, y: StateVector):
        """Jacobian of Phi at y, sparse or dense."""

    @abstractmethod
    def lipschitz_certificate(self, center: StateVector, radius: float) -> float:
        """Lipschitz constant of Phi on the ball B(center, radius)."""

    @property
    def is_increasing(self) -> bool:
        """Whether y1 <= y2 implies Phi(y1) <= Phi(y2) for this map."""
        return False

    def deriv_norm(self, y: StateVector) -> float:
        """Spectral norm of Phi'(y), the Lipschitz constant of the linear map Phi'(y)."""
        jac = self.deriv_matrix(y)
        if sp.issparse(jac):
            if jac.nnz == 0:
                return 0.0
            jac = jac.toarray()
        if not np.any(jac):
            return 0.0
        return float(np.linalg.norm(jac, 2))

    def _check(self, v: StateVector) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.size,):
            raise ConfigError(f"{self.kind} map expects vectors of length {self.size}, got {v.shape}")
        return v


class ConstantMap(ObstacleMap):
    """Phi(y) = psi0 for every y (the QVI reduces to a VI)."""

    kind = "constant"

    def __init__(self, profile: StateVector):
        profile = np.asarray(profile, dtype=float)
        super().__init__(len(profile))
        self.profile = profile

    def eval(self, y):
        self._check(y)
        return self.profile.copy()

    def deriv(self, y, hdir):
        self._check(y)
        return np.zeros_like(self._check(hdir))

    def deriv_matrix(self, y):
        return sp.csr_matrix((self.size, self.size))

    def lipschitz_certificate(self, center, radius):
        return 0.0

    @property
    def is_increasing(self):
        return True


class AffineScalingMap(ObstacleMap):
    """Phi(y) = scale * y + offset."""

    kind = "affine_scaling"

    def __init__(self, scale: float, offset: StateVector):
        offset = np.asarray(offset, dtype=float)
        super().__init__(len(offset))
        self.scale = float(scale)
        self.offset = offset

    def eval(self, y):
        return self.scale * self._check(y) + self.offset

    def deriv(self, y, hdir):
        self._check(y)
        return self.scale * self._check(hdir)

    def deriv_matrix(self, y):
        return self.scale * sp.identity(self.size, format="csr")

    def lipschitz_certificate(self, center, radius):
        return abs(self.scale)

    @property
    def is_increasing(self):
        return self.scale >= 0


class PdeInverseMap(ObstacleMap):
    """Phi(w) = scale * L^{-1} w + offset for an elliptic operator L."""

    kind = "pde_inverse"

    def __init__(self, operator: DiscreteOperator, offset: StateVector, scale: float = 1.0):
        offset = np.asarray(offset, dtype=float)
        super().__init__(operator.size)
        if offset.shape != (operator.size,):
            raise ConfigError("pde_inverse offset does not match the operator size")
        self.operator = operator
        self.offset = offset
        self.scale = float(scale)
        self._solve = factorize(operator.matrix)

    def eval(self, y):
        return self.scale * self._solve(self._check(y)) + self.offset

    def deriv(self, y, hdir):
        self._check(y)
        return self.scale * self._solve(self._check(hdir))

    @cached_property
    def _inverse(self) -> np.ndarray:
        return self._solve(np.eye(self.size))

    def deriv_matrix(self, y):
        return self.scale * self._inverse

    def deriv_norm(self, y):
        return abs(self.scale) * inverse_norm(self.operator.matrix)

    def lipschitz_certificate(self, center, radius):
        return abs(self.scale) * inverse_norm(self.operator.matrix)

    @property
    def is_increasing(self):
        return self.operator.is_t_monotone and self.scale >= 0


def _spline(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _spline_prime(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0) & (x < 1)
    a, b = _spline(x[mid]), _spline(1.0 - x[mid])
    out[mid] = a / (a + b)
    return out


def smooth_step_prime(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    mid = (x > 0) & (x < 1)
    xm = x[mid]
    a, b = _spline(xm), _spline(1.0 - xm)
    out[mid] = (_spline_prime(xm) * b + a * _spline_prime(1.0 - xm)) / (a + b) ** 2
    return out


def cutoff(t, delta: float) -> np.ndarray:
    """Bump equal to 1 on (-delta^2, delta^2) and 0 for |t| >= 2 delta^2."""
    d2 = delta**2
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return 1.0 - smooth_step((np.abs(t) - d2) / d2)


def cutoff_prime(t, delta: float) -> np.ndarray:
    d2 = delta**2
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return -np.sign(t) * smooth_step_prime((np.abs(t) - d2) / d2) / d2


@dataclass(frozen=True)
class CutoffSpec:
    """Centers, targets and plateau radius of a cutoff obstacle map."""

    delta: float
    centers: tuple
    targets: tuple
    weight: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if len(self.centers) < 2:
            raise ConfigError("A cutoff map needs at least two centers")
        if len(self.targets) != len(self.centers):
            raise ConfigError("Cutoff map needs one target per center")
        shapes = {np.shape(v) for v in (*self.centers, *self.targets)}
        if len(shapes) != 1:
            raise ConfigError("Cutoff centers and targets must live on one grid")
        for n, yn in enumerate(self.centers):
            for m in range(n + 1, len(self.centers)):
                dist2 = self.weight * float(np.sum((yn - self.centers[m]) ** 2))
                if not dist2 > 4.0 * self.delta**2:
                    raise ConfigError(
                        f"Centers {n} and {m} violate the separation condition: "
                        f"||y_n - y_m||^2 = {dist2:.6e} <= 4 delta^2 = {4 * self.delta**2:.6e}"
                    )

    @classmethod
    def build(
        cls,
        grid: Grid,
        delta: float,
        centers: Sequence[StateVector],
        targets: Optional[Sequence[StateVector]] = None,
    ) -> "CutoffSpec":
        centers = tuple(np.asarray(c, dtype=float) for c in centers)
        targets = centers if targets is None else tuple(np.asarray(t, dtype=float) for t in targets)
        return cls(delta=float(delta), centers=centers, targets=targets, weight=grid.weight)


class CutoffMap(ObstacleMap):
    """
    Phi(u) = sum_n nu(||u - y_n||^2) psi_n with a plateau bump nu.

    With psi_n = y_n every center is a fixed point (multiplicity kind 1); with
    separate targets psi_n the centers are VI solutions for those obstacles (kind 2).
    """

    def __init__(self, spec: CutoffSpec, multiplicity: int = 1, seed: int = 0):
        super().__init__(len(spec.centers[0]))
        if multiplicity not in (1, 2):
            raise ConfigError(f"multiplicity kind must be 1 or 2, got {multiplicity}")
        self.spec = spec
        self.kind = f"cutoff_multiplicity_{multiplicity}"
        self.seed = seed
        self._centers = np.array(spec.centers)
        self._targets = np.array(spec.targets)

    def _distances(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        diffs = u[None, :] - self._centers
        return diffs, self.spec.weight * np.sum(diffs**2, axis=1)

    def eval(self, y):
        _, dist2 = self._distances(self._check(y))
        return cutoff(dist2, self.spec.delta) @ self._targets

    def deriv(self, y, hdir):
        diffs, dist2 = self._distances(self._check(y))
        slopes = cutoff_prime(dist2, self.spec.delta)
        inner = self.spec.weight * (diffs @ self._check(hdir))
        return (2.0 * slopes * inner) @ self._targets

    def deriv_matrix(self, y):
        diffs, dist2 = self._distances(self._check(y))
        coeff = 2.0 * self.spec.weight * cutoff_prime(dist2, self.spec.delta)
        return (self._targets.T * coeff) @ diffs

    def lipschitz_certificate(self, center, radius):
        """Sampled estimate: 1.5 x the largest ||Phi'(z)|| over random z in the H-ball."""
        if not radius > 0:
            raise ConfigError(f"radius must be positive, got {radius}")
        center = self._check(center)
        rng = np.random.default_rng(self.seed)
        sup = 0.0
        for _ in range(CERTIFICATE_SAMPLES):
            direction = rng.standard_normal(self.size)
            direction /= np.sqrt(self.spec.weight * np.sum(direction**2))
            point = center + radius * rng.uniform() * direction
            sup = max(sup, self.deriv_norm(point))
        return CERTIFICATE_SAFETY * sup


def create_obstacle_map(kind: str, **params) -> ObstacleMap:
    """
    Create an obstacle map by kind.

    Args:
        kind: One of MAP_KINDS
        **params: Kind-specific parameters
            constant: profile
            affine_scaling: scale, offset
            pde_inverse: operator, offset, scale
            cutoff_multiplicity_1/2: spec (CutoffSpec), seed

    Raises:
        ConfigError: If the kind is unknown
    """
    if kind == "constant":
        return ConstantMap(params["profile"])
    elif kind == "affine_scaling":
        return AffineScalingMap(params.get("scale", 1.0), params["offset"])
    elif kind == "pde_inverse":
        return PdeInverseMap(params["operator"], params["offset"], params.get("scale", 1.0))
    elif kind in ("cutoff_multiplicity_1", "cutoff_multiplicity_2"):
        return CutoffMap(params["spec"], multiplicity=int(kind[-1]), seed=params.get("seed", 0))
    else:
        raise ConfigError(f"Unknown obstacle map kind: '{kind}'. Valid options: {', '.join(MAP_KINDS)}")


def contraction_threshold(A: DiscreteOperator) -> float:
    """Largest admissible C_Phi for contraction-based algorithms, c_a / (c_a + c_b)."""
    return A.c_a / (A.c_a + A.c_b)


def check_increasing(
    obstacle: ObstacleMap,
    lower: StateVector,
    upper: StateVector,
    samples: int = 50,
    seed: int = 0,
    tol: float = 1e-10,
) -> bool:
    """Sample ordered pairs y1 <= y2 in [lower, upper] and test Phi(y1) <= Phi(y2)."""
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    span = np.asarray(upper, dtype=float) - lower
    for _ in range(samples):
        y1 = lower + rng.uniform(size=len(lower)) * span
        y2 = y1 + rng.uniform(size=len(lower)) * (lower + span - y1)
        p1, p2 = obstacle.eval(y1), obstacle.eval(y2)
        if np.any(p1 > p2 + tol * (1.0 + np.max(np.abs(p2), initial=0.0))):
            return False
    return True


def build_example_one(
    A: DiscreteOperator, centers: Sequence[StateVector], delta: float, seed: int = 0
) -> tuple[CutoffMap, DualVector]:
    """
    Fixed-point multiplicity example: Phi(y_n) = y_n with f = max_n(A y_n).

    Every center is then a solution of the QVI with source f.
    """
    spec = CutoffSpec.build(A.grid, delta, centers)
    source = np.max(np.array([A.apply(np.asarray(c, dtype=float)) for c in centers]), axis=0)
    return CutoffMap(spec, multiplicity=1, seed=seed), source


def build_example_two(
    A: DiscreteOperator,
    f: DualVector,
    targets: Sequence[StateVector],
    delta: Optional[float] = None,
    seed: int = 0,
) -> tuple[CutoffMap, list[StateVector]]:
    """
    Multiplicity from distinct obstacles: y_n = S(f, psi_n) and Phi(y_n) = psi_n.

    When delta is None it is set to 0.45 * min ||y_n - y_m||_H.
    """
    solutions = [solve_vi_upper(A, f, np.asarray(t, dtype=float)).y for t in targets]
    if delta is None:
        gaps = [
            np.sqrt(A.grid.weight * np.sum((solutions[n] - solutions[m]) ** 2))
            for n in range(len(solutions))
            for m in range(n + 1, len(solutions))
        ]
        delta = EXAMPLE_TWO_DELTA_FRACTION * min(gaps)
        logger.info(f"Example two: chose delta = {delta:.6e}")
    spec = CutoffSpec.build(A.grid, delta, solutions, targets)
    return CutoffMap(spec, multiplicity=2, seed=seed), solutions

"""Scenario and runtime configuration."""

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import dotenv_values

from qvi_lab.core.errors import ConfigError
from qvi_lab.core.mesh_operator import Grid, build_grid
from qvi_lab.core.obstacle_maps import MAP_KINDS

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
ROUTES = ["iteration", "interval", "penalty"]

FIELD_PARAMS = {
    "constant": {"value"},
    "nodal": {"values"},
    "ramp": {"start", "end"},
    "gaussian": {"amplitude", "center", "width"},
    "sine": {"amplitude", "mode"},
    "max_of_centers": set(),
}


def _number(value: Any) -> Optional[float]:
    """Parse a real; the strings 'inf' and '-inf' are accepted for unbounded values."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf"):
        return float(value.strip().lower())
    return None


@dataclass
class FieldSpec:
    """A nodal function given by a named formula."""

    type: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_value(cls, value: Any) -> "FieldSpec":
        if isinstance(value, dict):
            params = dict(value)
            return cls(type=str(params.pop("type", "")), params=params)
        return cls(type="constant", params={"value": value})

    def validate(self, where: str, allow_centers: bool = False) -> List[str]:
        errors = []
        if self.type not in FIELD_PARAMS:
            return [f"{where}: unknown field type '{self.type}'. Valid options: {', '.join(FIELD_PARAMS)}"]
        if self.type == "max_of_centers" and not allow_centers:
            errors.append(f"{where}: 'max_of_centers' is only valid as a source")
        expected = FIELD_PARAMS[self.type]
        for key in sorted(set(self.params) - expected):
            errors.append(f"{where}: unknown key '{key}' for field type '{self.type}'")
        for key in sorted(expected - set(self.params)):
            errors.append(f"{where}: missing key '{key}' for field type '{self.type}'")
        if errors:
            return errors

        if self.type == "nodal":
            values = self.params["values"]
            if not isinstance(values, list) or any(_number(v) is None for v in values):
                errors.append(f"{where}: 'values' must be a list of numbers")
        elif self.type == "sine":
            mode = self.params["mode"]
            if not isinstance(mode, int) or isinstance(mode, bool) or mode < 1:
                errors.append(f"{where}: 'mode' must be a positive integer")
            if _number(self.params["amplitude"]) is None:
                errors.append(f"{where}: 'amplitude' must be a number")
        elif self.type == "gaussian":
            width = _number(self.params["width"])
            if width is None or not width > 0:
                errors.append(f"{where}: 'width' must be positive")
            center = self.params["center"]
            centers = center if isinstance(center, list) else [center]
            if any(_number(c) is None for c in centers):
                errors.append(f"{where}: 'center' must be a number or a list of numbers")
        else:
            for key in expected:
                if _number(self.params[key]) is None:
                    errors.append(f"{where}: '{key}' must be a number")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.type, **self.params}


def evaluate_field(spec: FieldSpec, grid: Grid) -> np.ndarray:
    """Nodal values of a field spec on the grid."""
    x = grid.coordinates()
    p = spec.params
    if spec.type == "constant":
        return np.full(grid.node_count, float(p["value"]))
    if spec.type == "nodal":
        values = np.array([float(v) for v in p["values"]])
        if values.shape != (grid.node_count,):
            raise ConfigError(f"Nodal field has {len(values)} values, grid has {grid.node_count} nodes")
        return values
    if spec.type == "ramp":
        return float(p["start"]) + (float(p["end"]) - float(p["start"])) * x[:, 0]
    if spec.type == "gaussian":
        center = np.broadcast_to(np.asarray(p["center"], dtype=float), (grid.dim,))
        dist2 = np.sum((x - center) ** 2, axis=1)
        return float(p["amplitude"]) * np.exp(-dist2 / (2.0 * float(p["width"]) ** 2))
    if spec.type == "sine":
        return float(p["amplitude"]) * np.prod(np.sin(int(p["mode"]) * np.pi * x), axis=1)
    raise ConfigError(f"Field type '{spec.type}' cannot be evaluated here")


def _check_keys(data: Any, allowed: set, where: str, errors: List[str]) -> Dict[str, Any]:
    if not isinstance(data, dict):
        errors.append(f"{where}: expected a mapping")
        return {}
    for key in sorted(set(data) - allowed):
        errors.append(f"{where}: unknown key '{key}'")
    return {k: v for k, v in data.items() if k in allowed}


def _names(cls) -> set:
    return {f.name for f in fields(cls)}


def _schedule_errors(schedule: Optional[List[Any]], where: str) -> List[str]:
    if schedule is None:
        return []
    values = [_number(r) for r in schedule] if isinstance(schedule, list) else [None]
    if not values or any(v is None or not v > 0 or math.isinf(v) for v in values):
        return [f"{where}: must be a non-empty list of positive numbers"]
    if any(b >= a for a, b in zip(values, values[1:])):
        return [f"{where}: must be strictly decreasing"]
    return []


@dataclass
class GridConfig:
    dim: int = 1
    n_per_axis: int = 20

    def validate(self) -> List[str]:
        errors = []
        if self.dim not in (1, 2):
            errors.append(f"grid.dim must be 1 or 2, got {self.dim}")
        if not isinstance(self.n_per_axis, int) or isinstance(self.n_per_axis, bool) or self.n_per_axis < 1:
            errors.append(f"grid.n_per_axis must be a positive integer, got {self.n_per_axis}")
        return errors


@dataclass
class OperatorConfig:
    diffusion: float = 1.0
    advection: Optional[List[float]] = None
    reaction: float = 0.0
    require_t_monotone: bool = True

    def validate(self, where: str = "operator") -> List[str]:
        errors = []
        diffusion = _number(self.diffusion)
        if diffusion is None or not diffusion > 0 or math.isinf(diffusion):
            errors.append(f"{where}.diffusion must be a positive number")
        reaction = _number(self.reaction)
        if reaction is None or reaction < 0 or math.isinf(reaction):
            errors.append(f"{where}.reaction must be a nonnegative number")
        if self.advection is not None and (
            not isinstance(self.advection, list) or any(_number(v) is None for v in self.advection)
        ):
            errors.append(f"{where}.advection must be a list of numbers")
        return errors


@dataclass
class ObstacleConfig:
    kind: str = "constant"
    profile: Optional[FieldSpec] = None
    offset: Optional[FieldSpec] = None
    scale: float = 1.0
    operator: Optional[OperatorConfig] = None

    def validate(self) -> List[str]:
        errors = []
        if self.kind not in MAP_KINDS:
            return [f"obstacle.kind: unknown kind '{self.kind}'. Valid options: {', '.join(MAP_KINDS)}"]
        if _number(self.scale) is None:
            errors.append("obstacle.scale must be a number")
        if self.kind == "constant" and self.profile is None:
            errors.append("obstacle.profile is required for kind 'constant'")
        if self.kind in ("affine_scaling", "pde_inverse") and self.offset is None:
            errors.append(f"obstacle.offset is required for kind '{self.kind}'")
        if self.profile is not None:
            errors.extend(self.profile.validate("obstacle.profile"))
        if self.offset is not None:
            errors.extend(self.offset.validate("obstacle.offset"))
        if self.operator is not None:
            errors.extend(self.operator.validate("obstacle.operator"))
        return errors


@dataclass
class QviConfig:
    route: str = "iteration"
    tol: float = 1e-10
    max_iter: int = 200
    rho_schedule: Optional[List[float]] = None
    upper_source: Optional[FieldSpec] = None
    v0: Optional[FieldSpec] = None
    y0: Optional[FieldSpec] = None

    def validate(self) -> List[str]:
        errors = []
        if self.route not in ROUTES:
            errors.append(f"qvi.route: unknown route '{self.route}'. Valid options: {', '.join(ROUTES)}")
        tol = _number(self.tol)
        if tol is None or not tol > 0:
            errors.append("qvi.tol must be positive")
        if not isinstance(self.max_iter, int) or self.max_iter < 1:
            errors.append("qvi.max_iter must be a positive integer")
        errors.extend(_schedule_errors(self.rho_schedule, "qvi.rho_schedule"))
        if self.route == "interval" and self.upper_source is None:
            errors.append("qvi.upper_source is required for route 'interval'")
        for name in ("upper_source", "v0", "y0"):
            spec = getattr(self, name)
            if spec is not None:
                errors.extend(spec.validate(f"qvi.{name}"))
        return errors


@dataclass
class SensitivityConfig:
    direction: Optional[FieldSpec] = None
    steps: List[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    random_directions: int = 5
    force: bool = False

    def validate(self) -> List[str]:
        errors = []
        if self.direction is None:
            errors.append("sensitivity.direction is required")
        else:
            errors.extend(self.direction.validate("sensitivity.direction"))
        errors.extend(_schedule_errors(self.steps, "sensitivity.steps"))
        if not isinstance(self.random_directions, int) or self.random_directions < 0:
            errors.append("sensitivity.random_directions must be a nonnegative integer")
        return errors


@dataclass
class ControlConfig:
    y_d: Optional[FieldSpec] = None
    nu: float = 1e-2
    u_a: Optional[FieldSpec] = None
    u_b: Optional[FieldSpec] = None
    rho_schedule: Optional[List[float]] = None
    tol: float = 1e-10
    max_iter: int = 500
    directions: int = 100
    starts: int = 1
    gradient_check_rhos: List[float] = field(default_factory=lambda: [1e-1, 1e-3])

    def validate(self) -> List[str]:
        errors = []
        if self.y_d is None:
            errors.append("control.y_d is required")
        else:
            errors.extend(self.y_d.validate("control.y_d"))
        nu = _number(self.nu)
        if nu is None or not nu > 0:
            errors.append("control.nu must be positive")
        for name in ("u_a", "u_b"):
            spec = getattr(self, name)
            if spec is not None:
                errors.extend(spec.validate(f"control.{name}"))
        if self.u_a is not None and self.u_b is not None and self.u_a.type == self.u_b.type == "constant":
            lower, upper = _number(self.u_a.params.get("value")), _number(self.u_b.params.get("value"))
            if lower is not None and upper is not None and lower > upper:
                errors.append(f"control: u_a > u_b ({lower} > {upper})")
        errors.extend(_schedule_errors(self.rho_schedule, "control.rho_schedule"))
        errors.extend(_schedule_errors(self.gradient_check_rhos, "control.gradient_check_rhos"))
        tol = _number(self.tol)
        if tol is None or not tol > 0:
            errors.append("control.tol must be positive")
        for name in ("max_iter", "starts"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                errors.append(f"control.{name} must be a positive integer")
        if not isinstance(self.directions, int) or self.directions < 0:
            errors.append("control.directions must be a nonnegative integer")
        return errors


@dataclass
class MultiplicityConfig:
    example: int = 1
    centers: List[FieldSpec] = field(default_factory=list)
    targets: List[FieldSpec] = field(default_factory=list)
    delta: Optional[float] = None

    def validate(self) -> List[str]:
        errors = []
        if self.example not in (1, 2):
            errors.append(f"multiplicity.example must be 1 or 2, got {self.example}")
        items = self.centers if self.example == 1 else self.targets
        label = "centers" if self.example == 1 else "targets"
        if len(items) < 2:
            errors.append(f"multiplicity.{label} needs at least two entries for example {self.example}")
        for k, spec in enumerate(self.centers):
            errors.extend(spec.validate(f"multiplicity.centers[{k}]"))
        for k, spec in enumerate(self.targets):
            errors.extend(spec.validate(f"multiplicity.targets[{k}]"))
        if self.delta is not None:
            delta = _number(self.delta)
            if delta is None or not delta > 0:
                errors.append("multiplicity.delta must be positive")
        elif self.example == 1:
            errors.append("multiplicity.delta is required for example 1")
        return errors


@dataclass
class Tolerances:
    residual: float = 1e-6
    certificate: float = 1e-9
    derivative: float = 1e-8
    stationarity: float = 1e-6
    gradient: float = 1e-4
    fd_floor: float = 1e-9

    def validate(self) -> List[str]:
        errors = []
        for f in fields(self):
            value = _number(getattr(self, f.name))
            if value is None or not value > 0:
                errors.append(f"tolerances.{f.name} must be positive")
        return errors


@dataclass
class ScenarioConfig:
    """A complete scenario: discretization, obstacle, source and command blocks."""

    name: str = "scenario"
    seed: int = 0
    output_dir: Optional[str] = None
    grid: GridConfig = field(default_factory=GridConfig)
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    obstacle: ObstacleConfig = field(default_factory=ObstacleConfig)
    source: FieldSpec = field(default_factory=lambda: FieldSpec("constant", {"value": 1.0}))
    qvi: QviConfig = field(default_factory=QviConfig)
    sensitivity: Optional[SensitivityConfig] = None
    control: Optional[ControlConfig] = None
    multiplicity: Optional[MultiplicityConfig] = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """
        Build a scenario from parsed JSON/YAML.

        Raises:
            ConfigError: Carrying every structural and semantic error found
        """
        errors: List[str] = []
        top = _check_keys(data, _names(cls), "scenario", errors)

        def block(key, block_cls, converters=None):
            if key not in top:
                return None
            raw = _check_keys(top[key], _names(block_cls), key, errors)
            for name, convert in (converters or {}).items():
                if name in raw and raw[name] is not None:
                    raw[name] = convert(raw[name])
            try:
                return block_cls(**raw)
            except TypeError as e:
                errors.append(f"{key}: {e}")
                return None

        def operator_block(raw):
            sub = _check_keys(raw, _names(OperatorConfig), "obstacle.operator", errors)
            return OperatorConfig(**sub)

        def field_list(raw):
            return [FieldSpec.from_value(v) for v in raw] if isinstance(raw, list) else []

        config = cls(
            name=str(top.get("name", "scenario")),
            seed=top.get("seed", 0),
            output_dir=top.get("output_dir"),
            grid=block("grid", GridConfig) or GridConfig(),
            operator=block("operator", OperatorConfig) or OperatorConfig(),
            obstacle=block(
                "obstacle",
                ObstacleConfig,
                {"profile": FieldSpec.from_value, "offset": FieldSpec.from_value, "operator": operator_block},
            )
            or ObstacleConfig(),
            source=FieldSpec.from_value(top.get("source", 1.0)),
            qvi=block(
                "qvi",
                QviConfig,
                {"upper_source": FieldSpec.from_value, "v0": FieldSpec.from_value, "y0": FieldSpec.from_value},
            )
            or QviConfig(),
            sensitivity=block("sensitivity", SensitivityConfig, {"direction": FieldSpec.from_value}),
            control=block(
                "control",
                ControlConfig,
                {"y_d": FieldSpec.from_value, "u_a": FieldSpec.from_value, "u_b": FieldSpec.from_value},
            ),
            multiplicity=block("multiplicity", MultiplicityConfig, {"centers": field_list, "targets": field_list}),
            tolerances=block("tolerances", Tolerances) or Tolerances(),
        )
        errors.extend(config.validate())
        if errors:
            raise ConfigError(f"Invalid scenario: {len(errors)} error(s)", errors=errors)
        return config

    def validate(self) -> List[str]:
        """
        Validate configuration.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            errors.append(f"seed must be a nonnegative integer, got {self.seed}")
        errors.extend(self.grid.validate())
        errors.extend(self.operator.validate())
        if self.operator.advection is not None and len(self.operator.advection) != self.grid.dim:
            errors.append(f"operator.advection needs {self.grid.dim} components")
        errors.extend(self.obstacle.validate())
        errors.extend(self.source.validate("source", allow_centers=True))
        errors.extend(self.qvi.validate())
        errors.extend(self.tolerances.validate())
        for name in ("sensitivity", "control", "multiplicity"):
            block = getattr(self, name)
            if block is not None:
                errors.extend(block.validate())

        if self.obstacle.kind.startswith("cutoff") and self.multiplicity is None:
            errors.append(f"obstacle.kind '{self.obstacle.kind}' requires a multiplicity block")
        if self.multiplicity is not None and self.obstacle.kind.startswith("cutoff"):
            expected = f"cutoff_multiplicity_{self.multiplicity.example}"
            if self.obstacle.kind != expected:
                errors.append(f"multiplicity.example {self.multiplicity.example} requires obstacle.kind '{expected}'")
        if self.source.type == "max_of_centers" and self.obstacle.kind != "cutoff_multiplicity_1":
            errors.append("source 'max_of_centers' requires obstacle.kind 'cutoff_multiplicity_1'")
        errors.extend(self._nodal_errors())
        errors.extend(self._bound_errors())
        return errors

    def _bound_errors(self) -> List[str]:
        """Node-wise u_a <= u_b for bounds that are not both constants."""
        control = self.control
        if control is None or control.u_a is None or control.u_b is None:
            return []
        if control.u_a.type == control.u_b.type == "constant":
            return []
        if self.grid.validate() or control.u_a.validate("control.u_a") or control.u_b.validate("control.u_b"):
            return []
        grid = build_grid(self.grid.dim, self.grid.n_per_axis)
        try:
            lower = evaluate_field(control.u_a, grid)
            upper = evaluate_field(control.u_b, grid)
        except ConfigError:
            return []
        crossed = np.flatnonzero(lower > upper)
        if crossed.size == 0:
            return []
        k = int(crossed[0])
        return [
            f"control: u_a > u_b at {crossed.size} node(s), first at node {k} ({lower[k]:g} > {upper[k]:g})"
        ]


    def _nodal_errors(self) -> List[str]:
        nodes = self.grid.n_per_axis**self.grid.dim if isinstance(self.grid.n_per_axis, int) else None
        errors = []
        specs = [("source", self.source), ("obstacle.profile", self.obstacle.profile), ("obstacle.offset", self.obstacle.offset)]
        if self.control is not None:
            specs += [("control.y_d", self.control.y_d), ("control.u_a", self.control.u_a), ("control.u_b", self.control.u_b)]
        for where, spec in specs:
            if spec is not None and spec.type == "nodal" and isinstance(spec.params.get("values"), list):
                if nodes is not None and len(spec.params["values"]) != nodes:
                    errors.append(f"{where}: expected {nodes} nodal values, got {len(spec.params['values'])}")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        def plain(value):
            if isinstance(value, FieldSpec):
                return value.to_dict()
            if hasattr(value, "__dataclass_fields__"):
                return {f.name: plain(getattr(value, f.name)) for f in fields(value)}
            if isinstance(value, list):
                return [plain(v) for v in value]
            return value

        return {k: v for k, v in plain(self).items() if v is not None}


@dataclass
class RuntimeSettings:
    """Process-level defaults read from an optional .env file."""

    log_level: str = "WARNING"
    output_dir: str = "runs"

    @classmethod
    def from_env(cls, env_path: Path) -> "RuntimeSettings":
        """Load settings from .env file."""
        if not env_path.exists():
            return cls()

        env = dotenv_values(env_path)
        return cls(
            log_level=env.get("QVI_LAB_LOG_LEVEL", "WARNING"),
            output_dir=env.get("QVI_LAB_OUTPUT_DIR", "runs"),
        )

    def validate(self) -> List[str]:
        errors = []
        if self.log_level not in LOG_LEVELS:
            errors.append(f"Invalid QVI_LAB_LOG_LEVEL: {self.log_level}")
        if not self.output_dir:
            errors.append("QVI_LAB_OUTPUT_DIR must not be empty")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return {"QVI_LAB_LOG_LEVEL": self.log_level, "QVI_LAB_OUTPUT_DIR": self.output_dir}


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Parse a JSON or YAML scenario file.

    Raises:
        ConfigError: If the file is missing, unreadable or not a mapping
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml  # cli extra

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse {path}: {e}") from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Could not parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def batch_entries(path: Path) -> Optional[List[Path]]:
    """Scenario paths of a batch file (top-level 'batch' list), or None for a plain scenario."""
    data = read_config_file(path)
    if "batch" not in data:
        return None
    entries = data["batch"]
    if set(data) != {"batch"} or not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: a batch file holds only a non-empty 'batch' list")
    base = Path(path).parent
    return [(base / str(entry)).resolve() for entry in entries]


def load_scenario(path: Path) -> ScenarioConfig:
    return ScenarioConfig.from_dict(read_config_file(path))


FIELD_SCHEMA = {
    "oneOf": [
        {"type": "number"},
        {"type": "string", "enum": ["inf", "-inf"]},
        {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": list(FIELD_PARAMS)},
                "value": {},
                "values": {"type": "array"},
                "start": {"type": "number"},
                "end": {"type": "number"},
                "amplitude": {"type": "number"},
                "center": {},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"type": "integer", "minimum": 1},
            },
        },
    ]
}

_SCHEDULE = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qvi-lab scenario",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dim": {"enum": [1, 2]}, "n_per_axis": {"type": "integer", "minimum": 1}},
        },
        "operator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "diffusion": {"type": "number", "exclusiveMinimum": 0},
                "advection": {"type": "array", "items": {"type": "number"}},
                "reaction": {"type": "number", "minimum": 0},
                "require_t_monotone": {"type": "boolean"},
            },
        },
        "obstacle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(MAP_KINDS)},
                "profile": FIELD_SCHEMA,
                "offset": FIELD_SCHEMA,
                "scale": {"type": "number"},
                "operator": {"type": "object"},
            },
        },
        "source": FIELD_SCHEMA,
        "qvi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "route": {"enum": ROUTES},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "rho_schedule": _SCHEDULE,
                "upper_source": FIELD_SCHEMA,
                "v0": FIELD_SCHEMA,
                "y0": FIELD_SCHEMA,
            },
        },
        "sensitivity": {
            "type": "object",
            "additionalProperties": False,
            "required": ["direction"],
            "properties": {
                "direction": FIELD_SCHEMA,
                "steps": _SCHEDULE,
                "random_directions": {"type": "integer", "minimum": 0},
                "force": {"type": "boolean"},
            },
        },
        "control": {
            "type": "object",
            "additionalProperties": False,
            "required": ["y_d"],
            "properties": {
                "y_d": FIELD_SCHEMA,
                "nu": {"type": "number", "exclusiveMinimum": 0},
                "u_a": FIELD_SCHEMA,
                "u_b": FIELD_SCHEMA,
                "rho_schedule": _SCHEDULE,
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "directions": {"type": "integer", "minimum": 0},
                "starts": {"type": "integer", "minimum": 1},
                "gradient_check_rhos": _SCHEDULE,
            },
        },
        "multiplicity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "example": {"enum": [1, 2]},
                "centers": {"type": "array", "items": FIELD_SCHEMA},
                "targets": {"type": "array", "items": FIELD_SCHEMA},
                "delta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                name: {"type": "number", "exclusiveMinimum": 0}
                for name in ("residual", "certificate", "derivative", "stationarity", "gradient", "fd_floor")
            },
        },
    },
}

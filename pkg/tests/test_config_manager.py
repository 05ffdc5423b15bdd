import json
from pathlib import Path

import pytest

from qvi_lab.core.config_manager import (
    SCENARIO_SCHEMA,
    FieldSpec,
    RuntimeSettings,
    ScenarioConfig,
    batch_entries,
    load_scenario,
    read_config_file,
)
from qvi_lab.core.errors import ConfigError

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def minimal(**overrides):
    data = {
        "name": "minimal",
        "grid": {"dim": 1, "n_per_axis": 4},
        "obstacle": {"kind": "constant", "profile": 0.5},
        "source": 2.0,
    }
    data.update(overrides)
    return data


def errors_of(data):
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig.from_dict(data)
    assert exc.value.exit_code == 2
    return exc.value.errors


def test_minimal_scenario_defaults():
    config = ScenarioConfig.from_dict(minimal())
    assert config.seed == 0
    assert config.qvi.route == "iteration"
    assert config.obstacle.profile == FieldSpec("constant", {"value": 0.5})
    assert config.tolerances.residual == 1e-6
    assert config.control is None


def test_unknown_keys_are_reported():
    errors = errors_of(minimal(colour="blue", grid={"dim": 1, "n_per_axis": 4, "spacing": 0.1}))
    assert "scenario: unknown key 'colour'" in errors
    assert "grid: unknown key 'spacing'" in errors


def test_all_errors_are_collected():
    errors = errors_of(minimal(seed=-1, grid={"dim": 3, "n_per_axis": 0}, qvi={"route": "newton"}))
    assert len(errors) >= 4
    assert any("seed" in e for e in errors)
    assert any("grid.dim" in e for e in errors)
    assert any("Valid options" in e for e in errors)


def test_control_bounds_order():
    data = minimal(control={"y_d": 0.5, "u_a": 2.0, "u_b": 1.0})
    assert any("u_a > u_b" in e for e in errors_of(data))


def test_control_bounds_order_nodal_against_constant():
    data = minimal(control={"y_d": 0.5, "u_a": {"type": "nodal", "values": [0.0, 0.0, 5.0, 0.0]}, "u_b": 1.0})
    assert "control: u_a > u_b at 1 node(s), first at node 2 (5 > 1)" in errors_of(data)


def test_control_bounds_order_ramp():
    crossing = minimal(control={"y_d": 0.5, "u_a": 0.0, "u_b": {"type": "ramp", "start": -1.0, "end": 1.0}})
    assert any("u_a > u_b" in e for e in errors_of(crossing))
    ordered = minimal(control={"y_d": 0.5, "u_a": {"type": "ramp", "start": -2.0, "end": 0.0}, "u_b": "inf"})
    assert ScenarioConfig.from_dict(ordered).control.u_a.type == "ramp"


def test_unbounded_control_strings():
    config = ScenarioConfig.from_dict(minimal(control={"y_d": 0.5, "u_a": "-inf", "u_b": "inf"}))
    assert config.control.u_a.params["value"] == "-inf"
    assert config.control.tol == 1e-10


def test_nodal_length_must_match_grid():
    data = minimal(source={"type": "nodal", "values": [1.0, 2.0, 3.0]})
    assert "source: expected 4 nodal values, got 3" in errors_of(data)


def test_field_spec_validation():
    assert FieldSpec("sine", {"amplitude": 1.0, "mode": 0}).validate("f") == ["f: 'mode' must be a positive integer"]
    assert FieldSpec("gaussian", {"amplitude": 1.0, "center": 0.5, "width": -1.0}).validate("f") == [
        "f: 'width' must be positive"
    ]
    assert "unknown field type" in FieldSpec("cubic", {}).validate("f")[0]
    assert FieldSpec("max_of_centers").validate("obstacle.profile")


def test_schedules_must_decrease():
    errors = errors_of(minimal(qvi={"route": "penalty", "rho_schedule": [1e-2, 1e-1]}))
    assert "qvi.rho_schedule: must be strictly decreasing" in errors


def test_cutoff_needs_multiplicity_block():
    data = minimal(obstacle={"kind": "cutoff_multiplicity_1"})
    assert any("requires a multiplicity block" in e for e in errors_of(data))


def test_interval_route_needs_upper_source():
    errors = errors_of(minimal(qvi={"route": "interval"}))
    assert "qvi.upper_source is required for route 'interval'" in errors


def test_to_dict_round_trips_through_from_dict():
    config = ScenarioConfig.from_dict(minimal(sensitivity={"direction": {"type": "sine", "amplitude": 1.0, "mode": 2}}))
    assert ScenarioConfig.from_dict(config.to_dict()) == config


def test_read_yaml_and_json(tmp_path):
    yaml_path = tmp_path / "s.yaml"
    yaml_path.write_text("name: y\nobstacle:\n  kind: constant\n  profile: 1.0\n", encoding="utf-8")
    assert read_config_file(yaml_path)["obstacle"]["kind"] == "constant"

    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="Could not parse"):
        read_config_file(bad)

    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        read_config_file(listing)

    with pytest.raises(ConfigError, match="not found"):
        read_config_file(tmp_path / "missing.json")


def test_batch_entries(tmp_path, write_scenario):
    write_scenario(minimal(), "a.json")
    batch = write_scenario({"batch": ["a.json", "sub/b.json"]}, "batch.json")
    assert batch_entries(batch) == [(tmp_path / "a.json").resolve(), (tmp_path / "sub" / "b.json").resolve()]
    assert batch_entries(tmp_path / "a.json") is None

    mixed = write_scenario({"batch": ["a.json"], "seed": 1}, "mixed.json")
    with pytest.raises(ConfigError, match="only a non-empty"):
        batch_entries(mixed)


@pytest.mark.parametrize("path", sorted(p for p in SCENARIO_DIR.iterdir() if p.name != "batch.json"), ids=lambda p: p.name)
def test_shipped_scenarios_are_valid(path):
    assert load_scenario(path).name == path.stem


def test_shipped_batch_points_at_shipped_scenarios():
    for entry in batch_entries(SCENARIO_DIR / "batch.json"):
        assert entry.exists()


def test_runtime_settings_from_env(tmp_path):
    assert RuntimeSettings.from_env(tmp_path / ".env") == RuntimeSettings()
    env = tmp_path / ".env"
    env.write_text("QVI_LAB_LOG_LEVEL=DEBUG\nQVI_LAB_OUTPUT_DIR=out\n", encoding="utf-8")
    settings = RuntimeSettings.from_env(env)
    assert settings.log_level == "DEBUG"
    assert settings.output_dir == "out"
    assert settings.validate() == []
    assert RuntimeSettings(log_level="LOUD").validate() == ["Invalid QVI_LAB_LOG_LEVEL: LOUD"]


def test_schema_is_serializable():
    schema = json.loads(json.dumps(SCENARIO_SCHEMA))
    assert schema["additionalProperties"] is False
    assert set(schema["properties"]) >= {"grid", "obstacle", "qvi", "control", "multiplicity", "tolerances"}

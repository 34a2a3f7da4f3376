import json

import pytest

from config.settings import EXAMPLES_DIR
from models.builtin_models import GaussianToyModel, PolynomialModel, SyntheticPhaseModel
from models.external_model import ExternalModel
from models.model_factory import build_model
from services.run_config import RunConfig, load_run_config
from utils.errors import ConfigError


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_synthetic_config_round_trip(synthetic_config_dict):
    config = RunConfig.from_dict(synthetic_config_dict)
    config.validate()
    assert config.parameters == {"phi1": 1.0, "phi2": 1.0}
    assert config.simulation.to_simulation_config().seeds == (0, 1, 2, 3)
    assert config.walk.N == 3
    assert config.h == 0.1
    again = RunConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()


def test_comment_keys_are_ignored(synthetic_config_dict):
    synthetic_config_dict["_notes"] = ["anything"]
    synthetic_config_dict["simulation"]["_why"] = "short run"
    RunConfig.from_dict(synthetic_config_dict).validate()


def test_negative_equilibration_names_field(tmp_path, synthetic_config_dict):
    synthetic_config_dict["simulation"]["T_eq"] = -1
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(write_config(tmp_path, synthetic_config_dict))
    assert excinfo.value.field == "simulation.T_eq"


def test_zero_walk_steps_rejected(synthetic_config_dict):
    synthetic_config_dict["walk"]["N"] = 0
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(synthetic_config_dict).validate()
    assert excinfo.value.field == "walk.N"


def test_non_positive_parameter_in_log_mode(synthetic_config_dict):
    synthetic_config_dict["parameters"]["phi2"] = 0.0
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(synthetic_config_dict).validate()
    assert excinfo.value.field == "parameters.phi2"


def test_skl_requires_log_mode(synthetic_config_dict):
    synthetic_config_dict["loss"] = {"kind": "skl"}
    synthetic_config_dict["differentiation"]["mode"] = "linear"
    synthetic_config_dict.pop("walk")
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(synthetic_config_dict).validate()
    assert excinfo.value.field == "differentiation.mode"


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.pop("model"), "model"),
        (lambda d: d["model"].update({"external": {"executable": "x"}}), "model"),
        (lambda d: d["model"].update({"builtin": "lorenz"}), "model.builtin"),
        (lambda d: d.update({"parameters": {}}), "parameters"),
        (lambda d: d["parameters"].update({"phi1": "one"}), "parameters.phi1"),
        (lambda d: d["loss"].update({"kind": "huber"}), "loss.kind"),
        (lambda d: d["simulation"].update({"T": 2.5}), "simulation.T"),
        (lambda d: d["walk"].update({"classify": "yes"}), "walk.classify"),
    ],
)
def test_invalid_fields(synthetic_config_dict, mutate, field):
    mutate(synthetic_config_dict)
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_dict(synthetic_config_dict).validate()
    assert excinfo.value.field == field


def test_config_error_is_value_error(synthetic_config_dict):
    synthetic_config_dict["workers"] = 0
    with pytest.raises(ValueError):
        RunConfig.from_dict(synthetic_config_dict).validate()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(tmp_path / "absent.json")
    assert excinfo.value.field == "--config"


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_overrides_take_precedence(synthetic_config_dict):
    config = RunConfig.from_dict(synthetic_config_dict)
    updated = config.with_overrides(output_dir="elsewhere", workers=9, seed=3, dump_ensembles=True)
    assert (updated.output_dir, updated.workers, updated.seed) == ("elsewhere", 9, 3)
    assert updated.dump_ensembles
    unchanged = config.with_overrides()
    assert unchanged.seed == 7
    assert unchanged.workers == 2


def test_explicit_seed_list(synthetic_config_dict):
    synthetic_config_dict["simulation"] = {"seeds": [5, 9, 11], "T": 128}
    config = RunConfig.from_dict(synthetic_config_dict)
    assert config.simulation.S == 3
    assert config.simulation.to_simulation_config().seeds == (5, 9, 11)
    synthetic_config_dict["simulation"] = {"seeds": [5, 5], "T": 128}
    with pytest.raises(ConfigError):
        RunConfig.from_dict(synthetic_config_dict).validate()


def test_output_transform_section(synthetic_config_dict):
    synthetic_config_dict["simulation"]["output_transform"] = {"kind": "log_shift", "c": 1e7}
    config = RunConfig.from_dict(synthetic_config_dict)
    transform = config.simulation.to_simulation_config().output_transform
    assert (transform.kind, transform.c) == ("log_shift", 1e7)
    synthetic_config_dict["simulation"]["output_transform"]["c"] = 0
    with pytest.raises(ConfigError):
        RunConfig.from_dict(synthetic_config_dict).validate()


def test_mark0_example_loads_without_binary():
    config = load_run_config(EXAMPLES_DIR / "mark0_table1.json", check_files=False)
    assert len(config.parameters) == 14
    assert config.parameters["rho_star"] == 0.01
    assert config.parameters["theta"] == 2.5
    assert config.simulation.T_eq == 10000
    assert config.model.is_external


def test_missing_executable_checked():
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(EXAMPLES_DIR / "mark0_table1.json")
    assert excinfo.value.field == "model.external.executable"


@pytest.mark.parametrize(
    "name, model_type",
    [
        ("synthetic_spectrum.json", SyntheticPhaseModel),
        ("synthetic_walk.json", SyntheticPhaseModel),
        ("gaussian_skl.json", GaussianToyModel),
        ("polynomial_external.json", ExternalModel),
    ],
)
def test_bundled_examples_build(name, model_type):
    config = load_run_config(EXAMPLES_DIR / name, check_files=False)
    assert isinstance(build_model(config), model_type)


def test_factory_checks_parameter_names(synthetic_config_dict):
    synthetic_config_dict["model"] = {"builtin": "gaussian"}
    synthetic_config_dict["parameters"] = {"mu": 1.0, "sigma": 1.0}
    config = RunConfig.from_dict(synthetic_config_dict)
    with pytest.raises(ConfigError) as excinfo:
        build_model(config)
    assert excinfo.value.field == "parameters"


def test_factory_polynomial_uses_horizon(synthetic_config_dict):
    synthetic_config_dict["model"] = {"builtin": "polynomial", "degree": 1}
    synthetic_config_dict["parameters"] = {"p0": 1.0, "p1": 1.0}
    model = build_model(RunConfig.from_dict(synthetic_config_dict))
    assert isinstance(model, PolynomialModel)
    assert model.steps == 256


def test_factory_synthetic_needs_two_parameters(synthetic_config_dict):
    synthetic_config_dict["parameters"] = {"phi1": 1.0}
    with pytest.raises(ConfigError):
        build_model(RunConfig.from_dict(synthetic_config_dict))

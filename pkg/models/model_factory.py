"""
Model factory
Builds a SimulationModel from the model section of a run configuration
"""

import logging

from models.builtin_models import GaussianToyModel, PolynomialModel, SyntheticPhaseModel
from models.external_model import ExternalModel, ExternalModelSpec
from models.model_api import SimulationModel
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def build_model(config) -> SimulationModel:
    """
    Instantiate the model a RunConfig selects and check its parameter names

    Args:
        config: RunConfig

    Raises:
        ConfigError: If the parameter names do not fit the builtin model
    """
    section = config.model
    names = list(config.parameters.keys())

    if section.is_external:
        logger.info(f"Using external model: {section.executable} {' '.join(section.args)}")
        return ExternalModel(
            ExternalModelSpec(
                executable=section.executable,
                extra_args=list(section.args),
                timeout=section.timeout,
                variable_names=section.variables,
                serial=section.serial,
            )
        )

    if section.builtin == "polynomial":
        model = PolynomialModel.on_grid(
            section.degree, config.simulation.T, section.grid, section.sigma
        )
        expected = model.parameter_names
    elif section.builtin == "gaussian":
        model = GaussianToyModel()
        expected = model.parameter_names
    elif section.builtin == "synthetic":
        if len(names) < 2:
            raise ConfigError("parameters", "synthetic model needs at least 2 parameters")
        model = SyntheticPhaseModel(section.noise)
        expected = names
    else:
        raise ConfigError("model.builtin", f"unknown model '{section.builtin}'")

    if names != list(expected):
        raise ConfigError(
            "parameters", f"{section.builtin} model expects parameters {list(expected)}, got {names}"
        )

    logger.info(f"Using builtin model: {section.builtin}")
    return model

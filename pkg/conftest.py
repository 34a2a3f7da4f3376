"""
Shared pytest fixtures
"""

import sys
from pathlib import Path

import pytest

# Flat layout: make the top-level packages importable
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))

from models.builtin_models import GaussianToyModel, PolynomialModel, SyntheticPhaseModel
from models.model_api import SimulationConfig
from services.monitoring_service import CallCounter
from utils.param_space import make_linear_point, make_point


@pytest.fixture
def counter():
    return CallCounter()


@pytest.fixture
def synthetic_model():
    return SyntheticPhaseModel(noise=0.01)


@pytest.fixture
def gaussian_model():
    return GaussianToyModel()


@pytest.fixture
def cubic_model():
    """Degree-3 polynomial on a 200-point midpoint grid"""
    return PolynomialModel.on_grid(3, 200, "midpoint")


@pytest.fixture
def cubic_point():
    return make_linear_point(["p0", "p1", "p2", "p3"], [1.0, 1.0, 1.0, 1.0])


@pytest.fixture
def origin2():
    """Synthetic model origin at log (0, 0)"""
    return make_point(["phi1", "phi2"], [1.0, 1.0])


@pytest.fixture
def small_sim():
    return SimulationConfig.from_seed_base(4, 256)


@pytest.fixture
def synthetic_config_dict(tmp_path):
    return {
        "model": {"builtin": "synthetic", "noise": 0.01},
        "parameters": {"phi1": 1.0, "phi2": 1.0},
        "simulation": {"S": 4, "T": 256, "T_eq": 0, "seed_base": 0},
        "loss": {"kind": "mse", "normalization": "mean"},
        "differentiation": {"h": 0.1, "mode": "log"},
        "walk": {"N": 3, "classify": True},
        "seed": 7,
        "workers": 2,
        "output_dir": str(tmp_path / "out"),
    }

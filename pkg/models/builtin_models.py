"""
Builtin analytic models
Polynomial validation model, Gaussian toy model and a synthetic regime-switching model
"""

import logging
from enum import Enum
from typing import List, Sequence

import numpy as np

from config.settings import (
    PHASE_HIGH_MEAN,
    PHASE_LOW_MEAN,
    PHASE_MIN_SERIES_LENGTH,
    PHASE_OSC_STD,
)
from utils.errors import SeriesTooShort
from utils.param_space import ParameterPoint

logger = logging.getLogger(__name__)


def midpoint_grid(size: int) -> np.ndarray:
    """Cell-centred grid x_t = (t + 1/2) / size on [0, 1]"""
    return (np.arange(size, dtype=float) + 0.5) / size


def uniform_grid(size: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


class PolynomialModel:
    """
    f(x, p) = sum_n p_n x^n + xi, xi ~ N(0, sigma) from the seeded generator.

    The x-grid plays the role of the time axis, so T = len(x_grid).
    """

    serial = False

    def __init__(self, degree: int, x_grid: Sequence[float], noise_sigma: float = 0.0):
        x_grid = np.asarray(x_grid, dtype=float)
        if degree < 0:
            raise ValueError(f"Degree must be >= 0 (got {degree})")
        if x_grid.ndim != 1 or len(x_grid) == 0:
            raise ValueError("x_grid must be a non-empty 1-D sequence")
        if np.any(x_grid < 0) or np.any(x_grid > 1):
            raise ValueError("x_grid must lie within [0, 1]")
        if noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0 (got {noise_sigma})")

        self.degree = degree
        self.x_grid = x_grid
        self.noise_sigma = float(noise_sigma)
        # Vandermonde columns x^0 .. x^N
        self._powers = np.vander(x_grid, degree + 1, increasing=True)

    @classmethod
    def on_grid(
        cls, degree: int, size: int, grid: str = "midpoint", noise_sigma: float = 0.0
    ) -> "PolynomialModel":
        builders = {"midpoint": midpoint_grid, "uniform": uniform_grid}
        if grid not in builders:
            raise ValueError(f"Unknown grid kind: {grid}")
        return cls(degree, builders[grid](size), noise_sigma)

    @property
    def variable_names(self) -> List[str]:
        return ["f"]

    @property
    def parameter_names(self) -> List[str]:
        return [f"p{n}" for n in range(self.degree + 1)]

    @property
    def steps(self) -> int:
        return len(self.x_grid)

    def evaluate(self, coefficients: np.ndarray, seed: int) -> np.ndarray:
        if len(coefficients) != self.degree + 1:
            raise ValueError(
                f"Expected {self.degree + 1} coefficients, got {len(coefficients)}"
            )
        values = self._powers @ np.asarray(coefficients, dtype=float)
        if self.noise_sigma > 0:
            rng = np.random.default_rng(seed)
            values = values + self.noise_sigma * rng.standard_normal(len(values))
        return values.reshape(1, -1)

    async def simulate(self, params: ParameterPoint, seed: int, steps: int) -> np.ndarray:
        if steps != self.steps:
            raise ValueError(f"Polynomial model has T={self.steps}, asked for {steps}")
        return self.evaluate(params.linear, seed)


class GaussianToyModel:
    """i.i.d. samples from N(ln phi1, phi2^2)"""

    serial = False

    @property
    def variable_names(self) -> List[str]:
        return ["x"]

    @property
    def parameter_names(self) -> List[str]:
        return ["phi1", "phi2"]

    async def simulate(self, params: ParameterPoint, seed: int, steps: int) -> np.ndarray:
        phi1, phi2 = params.linear[0], params.linear[1]
        if not (phi1 > 0 and phi2 > 0):
            raise ValueError(f"Gaussian toy needs phi1, phi2 > 0 (got {phi1}, {phi2})")
        rng = np.random.default_rng(seed)
        return (np.log(phi1) + phi2 * rng.standard_normal(steps)).reshape(1, -1)


class PhaseLabel(str, Enum):
    HIGH = "HIGH"
    LOW = "LOW"
    OSC = "OSC"
    MID = "MID"


REGIME_BASE = {
    PhaseLabel.HIGH: 0.9,
    PhaseLabel.LOW: 0.05,
    PhaseLabel.OSC: 0.45,
    PhaseLabel.MID: 0.30,
}
REGIME_AMPLITUDE = {PhaseLabel.OSC: 0.35}
OSC_PERIOD = 64
DRIFT_SCALE = 0.05
TRANSVERSE_DRIFT_SCALE = 0.01


def regime(a: float, b: float) -> PhaseLabel:
    """Closed-form regime of the synthetic model in (a, b) = (ln phi1, ln phi2)"""
    if a + b >= 2:
        return PhaseLabel.HIGH
    if a + b <= -2:
        return PhaseLabel.LOW
    if a - b >= 1.5:
        return PhaseLabel.OSC
    return PhaseLabel.MID


def distance_to_boundary(a: float, b: float) -> float:
    """Euclidean distance from (a, b) to the nearest regime boundary line"""
    root2 = np.sqrt(2.0)
    return float(
        min(abs(a + b - 2) / root2, abs(a + b + 2) / root2, abs(a - b - 1.5) / root2)
    )


class SyntheticPhaseModel:
    """
    Regime-switching model with known phase boundaries.

    Only phi1 and phi2 enter the output; phi3..phiP are nuisance parameters.
    u_t = base(R) + 0.05 tanh((a+b)/4) + 0.01 tanh((a-b)/4) cos(2 pi t / 64)
          + amp(R) sin(2 pi t / 64) + noise * g_t

    The transverse term oscillates so the (a, b) Fisher block has full rank.
    """

    serial = False

    def __init__(self, noise: float = 0.01):
        if noise < 0:
            raise ValueError(f"noise must be >= 0 (got {noise})")
        self.noise = float(noise)

    @property
    def variable_names(self) -> List[str]:
        return ["u"]

    def series(self, a: float, b: float, seed: int, steps: int) -> np.ndarray:
        """
        Regime base, level drift 0.05 tanh((a+b)/4) and oscillation, plus the
        transverse drift 0.01 tanh((a-b)/4) cos(2 pi t / 64). The transverse
        term is zero for a = b and never exceeds 0.01 in magnitude.
        """
        label = regime(a, b)
        t = np.arange(steps, dtype=float)
        values = (
            REGIME_BASE[label]
            + DRIFT_SCALE * np.tanh((a + b) / 4)
            + TRANSVERSE_DRIFT_SCALE * np.tanh((a - b) / 4) * np.cos(2 * np.pi * t / OSC_PERIOD)
            + REGIME_AMPLITUDE.get(label, 0.0) * np.sin(2 * np.pi * t / OSC_PERIOD)
        )
        if self.noise > 0:
            rng = np.random.default_rng(seed)
            values = values + self.noise * rng.standard_normal(steps)
        return values

    async def simulate(self, params: ParameterPoint, seed: int, steps: int) -> np.ndarray:
        if params.size < 2:
            raise ValueError(f"Synthetic model needs P >= 2 (got {params.size})")
        a, b = np.log(params.linear[0]), np.log(params.linear[1])
        return self.series(float(a), float(b), seed, steps).reshape(1, -1)


def classify_phase(series: Sequence[float]) -> PhaseLabel:
    """
    Label a series by its level and spread

    Raises:
        SeriesTooShort: If fewer than 128 points are given
    """
    series = np.asarray(series, dtype=float)
    if len(series) < PHASE_MIN_SERIES_LENGTH:
        raise SeriesTooShort(len(series), PHASE_MIN_SERIES_LENGTH)

    mean = float(np.mean(series))
    if mean > PHASE_HIGH_MEAN:
        return PhaseLabel.HIGH
    if mean < PHASE_LOW_MEAN:
        return PhaseLabel.LOW
    if float(np.std(series, ddof=1)) > PHASE_OSC_STD:
        return PhaseLabel.OSC
    return PhaseLabel.MID

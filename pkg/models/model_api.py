"""
Model API
Simulator interface, seed ensembles with equilibration cutoff and output transforms
"""

import asyncio
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import pandas as pd

from config.settings import CSV_ENCODING, DEFAULT_WORKERS
from utils.errors import ModelFailure, NonFiniteOutput, NonPositiveShifted
from utils.param_space import ParameterPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutputTransform:
    """Post-cutoff transform: 'none' or 'log_shift' with shift c"""

    kind: str = "none"
    c: float = 0.0

    def validate(self) -> None:
        if self.kind not in ("none", "log_shift"):
            raise ValueError(f"Unknown output transform: {self.kind}")
        if self.kind == "log_shift" and not self.c > 0:
            raise ValueError(f"log_shift requires c > 0 (got {self.c!r})")

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "none":
            return values
        shifted = values + self.c
        if np.any(shifted <= 0):
            bad = values.flat[int(np.argmax(shifted.ravel() <= 0))]
            raise NonPositiveShifted(float(bad), self.c)
        return np.log(shifted)


@dataclass(frozen=True)
class SimulationConfig:
    """Seeds, horizon and cutoff shared by every ensemble of a run"""

    seeds: tuple
    steps: int
    equilibration: int = 0
    output_transform: OutputTransform = field(default_factory=OutputTransform)

    @classmethod
    def from_seed_base(
        cls,
        seed_count: int,
        steps: int,
        equilibration: int = 0,
        seed_base: int = 0,
        output_transform: Optional[OutputTransform] = None,
    ) -> "SimulationConfig":
        return cls(
            seeds=tuple(seed_base + s for s in range(seed_count)),
            steps=steps,
            equilibration=equilibration,
            output_transform=output_transform or OutputTransform(),
        )

    @property
    def seed_count(self) -> int:
        return len(self.seeds)

    @property
    def kept_steps(self) -> int:
        return self.steps - self.equilibration

    def seed_block(self, block: int) -> "SimulationConfig":
        """Same layout on a disjoint seed range, shifted by block times the seed span"""
        span = max(self.seeds) - min(self.seeds) + 1
        return replace(self, seeds=tuple(seed + block * span for seed in self.seeds))

    def validate(self) -> None:
        if len(self.seeds) < 1:
            raise ValueError("At least one seed is required")
        if not 0 <= self.equilibration < self.steps:
            raise ValueError(
                f"Need 0 <= T_eq < T (got T_eq={self.equilibration}, T={self.steps})"
            )
        self.output_transform.validate()


@dataclass(frozen=True)
class EnsembleOutput:
    """S x K x T' array of observables after the equilibration cutoff"""

    values: np.ndarray
    variable_names: tuple
    seeds: tuple = ()

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"Ensemble values must be 3-D (got {self.values.ndim}-D)")
        if self.values.shape[1] != len(self.variable_names):
            raise ValueError(
                f"{self.values.shape[1]} variables but {len(self.variable_names)} names"
            )
        if not np.all(np.isfinite(self.values)):
            s, k, t = np.argwhere(~np.isfinite(self.values))[0]
            seed = self.seeds[s] if self.seeds else int(s)
            raise NonFiniteOutput(
                seed, self.variable_names[k], int(t), float(self.values[s, k, t])
            )
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def seed_mean(self) -> "EnsembleOutput":
        """1 x K x T' ensemble of the per-step mean over seeds"""
        return EnsembleOutput(
            values=self.values.mean(axis=0, keepdims=True), variable_names=self.variable_names
        )


@runtime_checkable
class SimulationModel(Protocol):
    """
    Simulator contract.

    simulate() returns a K x T array, deterministic in (params, seed, steps),
    with the same K and variable ordering for every input. Models that are
    unsafe to call concurrently set `serial = True`.
    """

    serial: bool

    @property
    def variable_names(self) -> List[str]: ...

    async def simulate(
        self, params: ParameterPoint, seed: int, steps: int
    ) -> np.ndarray: ...


def log_shift_transform(x: float, c: float) -> float:
    """
    Return ln(x + c)

    Raises:
        NonPositiveShifted: If x + c <= 0
    """
    if not x + c > 0:
        raise NonPositiveShifted(x, c)
    return math.log(x + c)


async def _simulate_checked(
    model: SimulationModel, params: ParameterPoint, seed: int, steps: int
) -> np.ndarray:
    try:
        raw = await model.simulate(params, seed, steps)
    except ModelFailure:
        raise
    except Exception as e:
        raise ModelFailure(f"simulate raised for seed {seed}: {e}", seed=seed) from e

    array = np.asarray(raw, dtype=float)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    expected = (len(model.variable_names), steps)
    if array.shape != expected:
        raise ModelFailure(
            f"simulate returned shape {array.shape} for seed {seed}, expected {expected}",
            seed=seed,
        )
    return array


def ensemble_semaphore(model: SimulationModel, workers: int = DEFAULT_WORKERS) -> asyncio.Semaphore:
    """Concurrency limit for a model: 1 for serial models, else `workers`"""
    limit = 1 if getattr(model, "serial", False) else max(1, workers)
    return asyncio.Semaphore(limit)


async def run_ensemble(
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    workers: int = DEFAULT_WORKERS,
    counter=None,
    category: str = "other",
    semaphore: Optional[asyncio.Semaphore] = None,
) -> EnsembleOutput:
    """
    Run every seed of the configuration and assemble the ensemble

    Seeds may run concurrently (up to `workers`); assembly follows the declared
    seed order so the result does not depend on the schedule.

    Args:
        model: Simulator honoring the SimulationModel contract
        params: Parameter point to simulate
        config: Seeds, horizon, cutoff and transform
        workers: Maximum concurrent simulate calls
        counter: Optional CallCounter recording simulate calls
        category: Counter category for these calls
        semaphore: Shared limit when several ensembles run at once

    Returns:
        EnsembleOutput of shape S x K x (T - T_eq)

    Raises:
        ModelFailure: If simulate raised or returned a malformed shape
        NonFiniteOutput: If any value is NaN/inf after the transform
    """
    if semaphore is None:
        semaphore = ensemble_semaphore(model, workers)

    async def run_one(seed: int) -> np.ndarray:
        async with semaphore:
            series = await _simulate_checked(model, params, seed, config.steps)
        if counter is not None:
            counter.record(category)
        return series

    results = await asyncio.gather(*(run_one(seed) for seed in config.seeds))

    names = tuple(model.variable_names)
    kept = []
    for seed, series in zip(config.seeds, results):
        cut = series[:, config.equilibration :]
        if not np.all(np.isfinite(cut)):
            k, t = np.argwhere(~np.isfinite(cut))[0]
            raise NonFiniteOutput(seed, names[k], int(t) + config.equilibration, float(cut[k, t]))
        try:
            kept.append(config.output_transform.apply(cut))
        except NonPositiveShifted as e:
            raise NonPositiveShifted(e.x, e.c, seed=seed) from e

    values = np.stack(kept, axis=0)
    logger.debug(
        f"Ensemble at {params.as_dict()}: shape {values.shape} ({category})"
    )
    return EnsembleOutput(values=values, variable_names=names, seeds=tuple(config.seeds))


async def loss_between(
    model: SimulationModel,
    params_a: ParameterPoint,
    params_b: ParameterPoint,
    config: SimulationConfig,
    loss_kind,
    workers: int = DEFAULT_WORKERS,
    counter=None,
) -> float:
    """
    Seed-matched loss of params_b (candidate) against params_a (reference)

    Both ensembles use the same seed list (common random numbers).
    """
    from services.loss_service import evaluate_loss

    reference, candidate = await asyncio.gather(
        run_ensemble(model, params_a, config, workers, counter, "loss"),
        run_ensemble(model, params_b, config, workers, counter, "loss"),
    )
    return evaluate_loss(loss_kind, reference, candidate)


def dump_ensemble_csv(ensemble: EnsembleOutput, directory: Path, prefix: str = "seed") -> List[Path]:
    """
    Write one CSV per seed (header = variable names, one row per t)

    Returns:
        List of written file paths in seed order
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    written = []
    seeds: Sequence[int] = ensemble.seeds or range(ensemble.shape[0])
    for index, seed in enumerate(seeds):
        frame = pd.DataFrame(
            ensemble.values[index].T, columns=list(ensemble.variable_names)
        )
        path = directory / f"{prefix}_{seed}.csv"
        frame.to_csv(path, index=False, encoding=CSV_ENCODING, lineterminator="\n")
        written.append(path)

    logger.info(f"Dumped {len(written)} ensemble members to {directory}")
    return written

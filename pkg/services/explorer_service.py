"""
Explorer Service
Stiff-direction exploration walk: Hessian, top-two eigenpairs, probabilistic
direction choice, sign consistency and a clamped step in log space
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import (
    DEFAULT_LOG_STEP,
    DEFAULT_WALK_STEPS,
    DEFAULT_WORKERS,
    SIGN_FIX_ANGLE_DEGREES,
    WALK_EPS,
    WALK_EPS_MAX,
    WALK_EPS_MIN,
)
from models.builtin_models import classify_phase
from models.model_api import EnsembleOutput, SimulationConfig, SimulationModel, run_ensemble
from services.fisher_service import estimate_fisher
from services.loss_service import LossKind, evaluate_loss
from services.monitoring_service import CallCounter
from services.spectral_service import eigendecompose
from utils.errors import DegenerateSpectrum
from utils.param_space import ParameterPoint, from_log

logger = logging.getLogger(__name__)

COS_SIGN_FIX = math.cos(math.radians(SIGN_FIX_ANGLE_DEGREES))


@dataclass(frozen=True)
class WalkConfig:
    """Walk length, step-size constants and the Hessian settings used at every step"""

    steps: int = DEFAULT_WALK_STEPS
    eps_min: float = WALK_EPS_MIN
    eps: float = WALK_EPS
    eps_max: float = WALK_EPS_MAX
    simulation: SimulationConfig = field(
        default_factory=lambda: SimulationConfig.from_seed_base(20, 512)
    )
    loss: LossKind = field(default_factory=LossKind)
    h: float = DEFAULT_LOG_STEP
    seed: int = 0
    classify: bool = False
    first_sign: Optional[int] = None
    random_sign: bool = False

    def validate(self) -> None:
        if self.steps < 1:
            raise ValueError(f"Walk needs N >= 1 steps (got {self.steps})")
        if not 0 < self.eps <= self.eps_max:
            raise ValueError(f"Need 0 < eps <= eps_max (got eps={self.eps}, eps_max={self.eps_max})")
        if not 0 < self.eps_min <= self.eps_max:
            raise ValueError(
                f"Need 0 < eps_min <= eps_max (got eps_min={self.eps_min}, eps_max={self.eps_max})"
            )
        if not self.h > 0:
            raise ValueError(f"Step h must be > 0 (got {self.h})")
        if self.first_sign not in (None, 1, -1):
            raise ValueError(f"first_sign must be +1, -1 or unset (got {self.first_sign})")
        self.simulation.validate()
        self.loss.validate()


@dataclass(frozen=True)
class WalkStep:
    """One logged step of the walk"""

    index: int
    start_log: tuple
    lambda1: float
    lambda2: float
    v1: tuple
    v2: tuple
    chosen: int
    probability: float
    sign_flipped: bool
    distance: float
    direction: tuple
    end_log: tuple
    loss: float
    phase: Optional[str]
    calls: Dict[str, int]

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "start_log": list(self.start_log),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "v1": list(self.v1),
            "v2": list(self.v2),
            "chosen": self.chosen,
            "probability": self.probability,
            "sign_flipped": self.sign_flipped,
            "distance": self.distance,
            "direction": list(self.direction),
            "end_log": list(self.end_log),
            "loss": self.loss,
            "phase": self.phase,
            "calls": dict(self.calls),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "WalkStep":
        return cls(
            index=int(data["index"]),
            start_log=tuple(float(x) for x in data["start_log"]),
            lambda1=float(data["lambda1"]),
            lambda2=float(data["lambda2"]),
            v1=tuple(float(x) for x in data["v1"]),
            v2=tuple(float(x) for x in data["v2"]),
            chosen=int(data["chosen"]),
            probability=float(data["probability"]),
            sign_flipped=bool(data["sign_flipped"]),
            distance=float(data["distance"]),
            direction=tuple(float(x) for x in data["direction"]),
            end_log=tuple(float(x) for x in data["end_log"]),
            loss=float(data["loss"]),
            phase=data.get("phase"),
            calls={k: int(v) for k, v in data["calls"].items()},
        )


@dataclass(frozen=True)
class WalkTrace:
    """Completed (or aborted) walk"""

    parameter_names: tuple
    origin_log: tuple
    steps: tuple
    aborted: Optional[str] = None
    calls: Dict[str, int] = field(default_factory=dict)
    origin_phase: Optional[str] = None

    @property
    def points(self) -> List[tuple]:
        """Origin followed by every end point, in log coordinates"""
        return [self.origin_log] + [step.end_log for step in self.steps]

    @property
    def phases(self) -> List[str]:
        return [step.phase for step in self.steps if step.phase is not None]

    @property
    def hessian_calls(self) -> int:
        return sum(step.calls.get("hessian", 0) for step in self.steps)


def select_direction(lambda1: float, lambda2: float, rng: np.random.Generator) -> Tuple[int, float]:
    """
    Choose eigenvector 1 with probability lambda1 / (lambda1 + lambda2), else 2

    Returns:
        (chosen index in {1, 2}, probability of choosing 1)

    Raises:
        DegenerateSpectrum: If lambda1 <= 0
    """
    if not lambda1 > 0:
        raise DegenerateSpectrum(lambda1)
    lambda2 = max(float(lambda2), 0.0)
    probability = lambda1 / (lambda1 + lambda2)
    chosen = 1 if rng.random() < probability else 2
    return chosen, probability


def keeps_sign(v: Sequence[float], v_prev: Sequence[float]) -> bool:
    """True when v and v_prev subtend at most 165 degrees"""
    return float(np.dot(np.asarray(v, dtype=float), np.asarray(v_prev, dtype=float))) >= COS_SIGN_FIX


def fix_sign(v: Sequence[float], v_prev: Sequence[float]) -> np.ndarray:
    """Keep v when the angle to v_prev is at most 165 degrees, else return -v"""
    v = np.asarray(v, dtype=float)
    return v if keeps_sign(v, v_prev) else -v


def step_distance(
    lambda_chosen: float,
    lambda1: float,
    eps: float = WALK_EPS,
    eps_min: float = WALK_EPS_MIN,
    eps_max: float = WALK_EPS_MAX,
) -> float:
    """
    d = min((1 / sqrt(lambda_chosen)) * max(eps, eps_min * sqrt(lambda1)), eps_max)

    Raises:
        DegenerateSpectrum: If either eigenvalue is not positive
    """
    if not lambda1 > 0:
        raise DegenerateSpectrum(lambda1)
    if not lambda_chosen > 0:
        raise DegenerateSpectrum(lambda_chosen)
    return min((1.0 / math.sqrt(lambda_chosen)) * max(eps, eps_min * math.sqrt(lambda1)), eps_max)


async def orient_first_step(
    model: SimulationModel,
    origin: ParameterPoint,
    v: Sequence[float],
    d: float,
    config: WalkConfig,
    origin_ensemble: Optional[EnsembleOutput] = None,
    workers: int = DEFAULT_WORKERS,
    counter=None,
) -> Tuple[int, Dict[int, EnsembleOutput]]:
    """
    Pick the sign whose candidate lies at the larger loss from the origin

    Candidates are exp(log phi0 +/- d v); ties go to +v.

    Returns:
        (sign +1/-1, candidate ensembles keyed by sign)
    """
    v = np.asarray(v, dtype=float)
    if origin_ensemble is None:
        origin_ensemble = await run_ensemble(
            model, origin, config.simulation, workers, counter, "baseline"
        )

    candidates = {}
    losses = {}
    for sign in (1, -1):
        point = from_log(origin.names, origin.log + sign * d * v)
        candidates[sign] = await run_ensemble(
            model, point, config.simulation, workers, counter, "orientation"
        )
        losses[sign] = evaluate_loss(config.loss, origin_ensemble, candidates[sign])

    sign = 1 if losses[1] >= losses[-1] else -1
    logger.info(f"First step oriented {'+' if sign > 0 else '-'}v (loss + {losses[1]:.4g}, - {losses[-1]:.4g})")
    return sign, candidates


def step_rng(seed: int, index: int) -> np.random.Generator:
    """Per-step generator, independent of how many steps ran before"""
    return np.random.default_rng([seed, index])


def _phase_of(ensemble: EnsembleOutput) -> str:
    return classify_phase(ensemble.values[:, 0, :].mean(axis=0)).value


async def run_walk(
    model: SimulationModel,
    origin: ParameterPoint,
    config: WalkConfig,
    workers: int = DEFAULT_WORKERS,
    counter: Optional[CallCounter] = None,
    resume_steps: Sequence[WalkStep] = (),
    on_step: Optional[Callable[[WalkStep], None]] = None,
) -> WalkTrace:
    """
    Run the exploration walk for config.steps steps

    Each step estimates the Hessian at the current point, keeps the top two
    eigenpairs, draws one of them, fixes its sign (or orients the first
    step by loss) and moves d along it in log space.

    Args:
        model: Simulator
        origin: Starting point (all parameters > 0)
        config: Walk configuration
        workers: Maximum concurrent simulate calls
        counter: CallCounter receiving every simulate call
        resume_steps: Steps already completed by an earlier run of this walk
        on_step: Callback invoked with each new step (e.g. a JSONL writer)

    Returns:
        WalkTrace; on DegenerateSpectrum the partial trace with `aborted` set
    """
    config.validate()
    counter = counter if counter is not None else CallCounter()
    start_calls = counter.snapshot()

    steps: List[WalkStep] = list(resume_steps)
    for expected, step in enumerate(steps):
        if step.index != expected:
            raise ValueError(f"Resumed walk has step {step.index} where {expected} was expected")

    origin_ensemble = await run_ensemble(
        model, origin, config.simulation, workers, counter, "baseline"
    )
    if steps:
        current = from_log(origin.names, steps[-1].end_log)
        v_prev = np.array(steps[-1].direction)
        baseline = await run_ensemble(
            model, current, config.simulation, workers, counter, "baseline"
        )
        logger.info(f"Resuming walk at step {len(steps)} of {config.steps}")
    else:
        current = origin
        v_prev = None
        baseline = origin_ensemble

    aborted = None
    for n in range(len(steps), config.steps):
        before = counter.snapshot()
        rng = step_rng(config.seed, n)

        try:
            fisher, baseline = await estimate_fisher(
                model,
                current,
                config.simulation,
                config.loss,
                config.h,
                "log",
                workers,
                counter,
                baseline,
            )
            spectrum = eigendecompose(fisher)
            lambda1 = float(spectrum.eigenvalues[0])
            lambda2 = float(spectrum.eigenvalues[1]) if spectrum.size > 1 else 0.0
            if lambda2 < 0:
                logger.warning(f"Step {n}: clamping negative lambda2={lambda2:.3e} to 0")
                lambda2 = 0.0

            chosen, probability = select_direction(lambda1, lambda2, rng)
            lambda_chosen = lambda1 if chosen == 1 else lambda2
            d = step_distance(lambda_chosen, lambda1, config.eps, config.eps_min, config.eps_max)
        except DegenerateSpectrum as e:
            aborted = str(e)
            logger.warning(f"Walk aborted at step {n}: {e}")
            break

        v1 = spectrum.vector(0)
        v2 = spectrum.vector(1) if spectrum.size > 1 else np.zeros_like(v1)
        v = v1 if chosen == 1 else v2

        end_ensemble = None
        if config.random_sign:
            sign = 1 if rng.random() < 0.5 else -1
        elif v_prev is not None:
            sign = 1 if keeps_sign(v, v_prev) else -1
        elif config.first_sign is not None:
            sign = config.first_sign
        else:
            sign, candidates = await orient_first_step(
                model, current, v, d, config, origin_ensemble, workers, counter
            )
            end_ensemble = candidates[sign]

        direction = sign * v
        end_log = current.log + d * direction
        end = from_log(origin.names, end_log)
        if end_ensemble is None:
            end_ensemble = await run_ensemble(
                model, end, config.simulation, workers, counter, "evaluation"
            )

        used = counter.since(before)
        step = WalkStep(
            index=n,
            start_log=tuple(float(x) for x in current.log),
            lambda1=lambda1,
            lambda2=lambda2,
            v1=tuple(float(x) for x in v1),
            v2=tuple(float(x) for x in v2),
            chosen=chosen,
            probability=float(probability),
            sign_flipped=sign < 0,
            distance=float(d),
            direction=tuple(float(x) for x in direction),
            end_log=tuple(float(x) for x in end_log),
            loss=float(evaluate_loss(config.loss, origin_ensemble, end_ensemble)),
            phase=_phase_of(end_ensemble) if config.classify else None,
            calls={
                "hessian": used["hessian"],
                "evaluation": used["evaluation"],
                "orientation": used["orientation"],
            },
        )
        steps.append(step)
        logger.info(
            f"Step {n}: v{chosen} (p1={probability:.3f}) d={d:.4f} loss={step.loss:.4g}"
            + (f" phase={step.phase}" if step.phase else "")
        )
        if on_step is not None:
            on_step(step)

        current = end
        v_prev = direction
        baseline = end_ensemble

    return WalkTrace(
        parameter_names=origin.names,
        origin_log=tuple(float(x) for x in origin.log),
        steps=tuple(steps),
        aborted=aborted,
        calls=counter.since(start_calls),
        origin_phase=_phase_of(origin_ensemble) if config.classify else None,
    )


def with_first_sign(config: WalkConfig, sign: int) -> WalkConfig:
    return replace(config, first_sign=sign)

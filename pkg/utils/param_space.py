"""
Parameter space
Named positive parameter vectors with synchronized linear/log coordinates
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

from utils.errors import AxisOutOfRange, DuplicateName, NonPositiveParameter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParameterPoint:
    """
    Point in P-dimensional parameter space.

    `log` holds ln(linear) when `log_valid` is True. Points built with
    `make_linear_point` may contain zero or negative values; their log field
    is NaN and only linear-mode differentiation applies to them.
    """

    names: tuple
    linear: np.ndarray
    log: np.ndarray
    log_valid: bool = True

    def __post_init__(self):
        # Arrays are shared between tasks; freeze them
        self.linear.setflags(write=False)
        self.log.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.names)

    def as_dict(self) -> Dict[str, float]:
        """Flat name -> linear value mapping in canonical order"""
        return {name: float(value) for name, value in zip(self.names, self.linear)}

    def with_log(self, log_values: Sequence[float]) -> "ParameterPoint":
        return from_log(self.names, log_values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterPoint):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self.linear, other.linear)
            and self.log_valid == other.log_valid
        )

    def __hash__(self) -> int:
        return hash((self.names, self.linear.tobytes()))


@dataclass(frozen=True)
class PerturbationPair:
    """Central-difference endpoints along one axis"""

    plus: ParameterPoint
    minus: ParameterPoint
    axis: int
    step: float


def _check_names(names: Sequence[str]) -> tuple:
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)
    return tuple(names)


def make_point(names: Sequence[str], linear_values: Sequence[float]) -> ParameterPoint:
    """
    Create a strictly positive parameter point

    Args:
        names: Ordered, unique parameter identifiers
        linear_values: Values in model units, all > 0

    Returns:
        ParameterPoint with the log field computed

    Raises:
        DuplicateName: If a name repeats
        NonPositiveParameter: If any value is <= 0 (or not finite)
    """
    names = _check_names(names)
    if len(names) != len(linear_values):
        raise ValueError(
            f"Got {len(names)} names but {len(linear_values)} values"
        )

    for name, value in zip(names, linear_values):
        if not (math.isfinite(value) and value > 0):
            raise NonPositiveParameter(name, value)

    linear = np.array(linear_values, dtype=float)
    return ParameterPoint(names=names, linear=linear, log=np.log(linear))


def make_linear_point(
    names: Sequence[str], linear_values: Sequence[float]
) -> ParameterPoint:
    """Create a point that admits zero/negative values (linear mode only)"""
    names = _check_names(names)
    if len(names) != len(linear_values):
        raise ValueError(
            f"Got {len(names)} names but {len(linear_values)} values"
        )

    linear = np.array(linear_values, dtype=float)
    if np.all(linear > 0):
        return ParameterPoint(names=names, linear=linear, log=np.log(linear))

    log = np.full(len(names), np.nan)
    return ParameterPoint(names=names, linear=linear, log=log, log_valid=False)


def from_log(names: Sequence[str], log_values: Sequence[float]) -> ParameterPoint:
    """Create a point from log coordinates; linear = exp(log)"""
    names = _check_names(names)
    log = np.array(log_values, dtype=float)
    if len(names) != len(log):
        raise ValueError(f"Got {len(names)} names but {len(log)} log values")
    return ParameterPoint(names=names, linear=np.exp(log), log=log)


def perturb(
    base: ParameterPoint, axis: int, h: float, mode: str = "log"
) -> PerturbationPair:
    """
    Produce the +h/-h endpoints along one axis

    In log mode the shift acts on ln(phi); in linear mode on phi itself.

    Raises:
        AxisOutOfRange: If axis is not a valid index
        NonPositiveParameter: If log mode is requested on a linear-only point
    """
    if not 0 <= axis < base.size:
        raise AxisOutOfRange(axis, base.size)
    if not h > 0:
        raise ValueError(f"Step h must be > 0 (got {h!r})")

    if mode == "log":
        if not base.log_valid:
            bad = int(np.argmax(base.linear <= 0))
            raise NonPositiveParameter(base.names[bad], float(base.linear[bad]))
        plus_log = base.log.copy()
        minus_log = base.log.copy()
        plus_log[axis] += h
        minus_log[axis] -= h
        return PerturbationPair(
            plus=from_log(base.names, plus_log),
            minus=from_log(base.names, minus_log),
            axis=axis,
            step=h,
        )

    if mode == "linear":
        plus_linear = base.linear.copy()
        minus_linear = base.linear.copy()
        plus_linear[axis] += h
        minus_linear[axis] -= h
        return PerturbationPair(
            plus=make_linear_point(base.names, plus_linear),
            minus=make_linear_point(base.names, minus_linear),
            axis=axis,
            step=h,
        )

    raise ValueError(f"Unknown differentiation mode: {mode}")


def shift(base: ParameterPoint, delta: Sequence[float], mode: str = "log") -> ParameterPoint:
    """Displace a point by an arbitrary vector in log or linear coordinates"""
    delta = np.asarray(delta, dtype=float)
    if mode == "log":
        if not base.log_valid:
            bad = int(np.argmax(base.linear <= 0))
            raise NonPositiveParameter(base.names[bad], float(base.linear[bad]))
        return from_log(base.names, base.log + delta)
    return make_linear_point(base.names, base.linear + delta)


def point_from_mapping(values: Mapping[str, float], names: List[str] = None) -> ParameterPoint:
    """Build a point from a {name: linear_value} mapping; names fixes the order"""
    order = list(names) if names is not None else list(values.keys())
    missing = [name for name in order if name not in values]
    if missing:
        raise ValueError(f"Missing parameter values for: {', '.join(missing)}")
    return make_point(order, [float(values[name]) for name in order])


def save_point(point: ParameterPoint, path: Path) -> None:
    """Write the flat JSON object {name: linear_value} with round-trip floats"""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(point.as_dict(), f)


def load_point(path: Path, names: List[str] = None) -> ParameterPoint:
    with open(path, "r", encoding="utf-8") as f:
        values = json.load(f)
    logger.debug(f"Loaded {len(values)} parameters from {path}")
    return point_from_mapping(values, names)

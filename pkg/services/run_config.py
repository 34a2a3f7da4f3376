"""
Run Configuration
One JSON document describing a command run: model, parameter point,
simulation, loss, differentiation and walk settings
"""

import json
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.settings import (
    DEFAULT_EQUILIBRATION,
    DEFAULT_LOSS_KIND,
    DEFAULT_NORMALIZATION,
    DEFAULT_SEEDS,
    DEFAULT_STEPS,
    DEFAULT_WALK_STEPS,
    DEFAULT_WORKERS,
    EXTERNAL_TIMEOUT_SECONDS,
    HISTOGRAM_BINS,
    HISTOGRAM_PSEUDO_COUNT,
    OUTPUT_DIR,
    WALK_EPS,
    WALK_EPS_MAX,
    WALK_EPS_MIN,
)
from models.model_api import OutputTransform, SimulationConfig
from services.loss_service import LOSS_KINDS, NORMALIZATIONS, LossKind
from utils.errors import ConfigError, DuplicateName, NonPositiveParameter
from utils.param_space import ParameterPoint, make_linear_point, make_point

BUILTIN_MODELS = ("polynomial", "gaussian", "synthetic")
MODES = ("log", "linear")


def _clean(data: Dict[str, Any]) -> Dict[str, Any]:
    """Drop comment keys (leading underscore)"""
    return {k: v for k, v in data.items() if not str(k).startswith("_")}


def _section(data: Dict[str, Any], key: str, path: str) -> Dict[str, Any]:
    value = data.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(path, "must be an object")
    return _clean(value)


def _number(data: Dict, key: str, path: str, default=None, kind=float):
    if key not in data:
        if default is None:
            raise ConfigError(path, "is required")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number (got {value!r})")
    if kind is int and float(value) != int(value):
        raise ConfigError(path, f"must be an integer (got {value!r})")
    return kind(value)


def _flag(data: Dict, key: str, path: str, default: bool) -> bool:
    value = data.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(path, f"must be true or false (got {value!r})")
    return value


@dataclass
class ModelSection:
    """Exactly one of `builtin` (with its fields) or `external`"""

    builtin: Optional[str] = None
    # builtin fields
    degree: int = 3
    grid: str = "midpoint"
    sigma: float = 0.0
    noise: float = 0.01
    # external fields
    executable: Optional[str] = None
    args: List[str] = field(default_factory=list)
    timeout: float = EXTERNAL_TIMEOUT_SECONDS
    variables: Optional[List[str]] = None
    serial: bool = False

    @property
    def is_external(self) -> bool:
        return self.executable is not None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSection":
        has_builtin = "builtin" in data
        has_external = "external" in data
        if has_builtin == has_external:
            raise ConfigError("model", "exactly one of 'builtin' or 'external' is required")

        if has_builtin:
            name = data["builtin"]
            if name not in BUILTIN_MODELS:
                raise ConfigError("model.builtin", f"unknown model '{name}', expected one of {BUILTIN_MODELS}")
            return cls(
                builtin=name,
                degree=_number(data, "degree", "model.degree", 3, int),
                grid=str(data.get("grid", "midpoint")),
                sigma=_number(data, "sigma", "model.sigma", 0.0),
                noise=_number(data, "noise", "model.noise", 0.01),
            )

        external = data["external"]
        if not isinstance(external, dict):
            raise ConfigError("model.external", "must be an object")
        external = _clean(external)
        if not external.get("executable"):
            raise ConfigError("model.external.executable", "is required")
        args = external.get("args", [])
        if not isinstance(args, list):
            raise ConfigError("model.external.args", "must be a list of strings")
        variables = external.get("variables")
        if variables is not None and not isinstance(variables, list):
            raise ConfigError("model.external.variables", "must be a list of names")
        return cls(
            executable=str(external["executable"]),
            args=[str(a) for a in args],
            timeout=_number(external, "timeout", "model.external.timeout", EXTERNAL_TIMEOUT_SECONDS),
            variables=[str(v) for v in variables] if variables is not None else None,
            serial=_flag(external, "serial", "model.external.serial", False),
        )

    def to_dict(self) -> Dict[str, Any]:
        if self.is_external:
            return {
                "external": {
                    "executable": self.executable,
                    "args": list(self.args),
                    "timeout": self.timeout,
                    "variables": self.variables,
                    "serial": self.serial,
                }
            }
        if self.builtin == "polynomial":
            return {"builtin": "polynomial", "degree": self.degree, "grid": self.grid, "sigma": self.sigma}
        if self.builtin == "synthetic":
            return {"builtin": "synthetic", "noise": self.noise}
        return {"builtin": self.builtin}

    def validate(self, check_files: bool = True) -> None:
        if self.is_external:
            if not self.timeout > 0:
                raise ConfigError("model.external.timeout", f"must be > 0 (got {self.timeout})")
            if check_files and shutil.which(self.executable) is None and not Path(self.executable).exists():
                raise ConfigError("model.external.executable", f"not found: {self.executable}")
            return
        if self.builtin == "polynomial":
            if self.degree < 0:
                raise ConfigError("model.degree", f"must be >= 0 (got {self.degree})")
            if self.grid not in ("midpoint", "uniform"):
                raise ConfigError("model.grid", f"must be 'midpoint' or 'uniform' (got {self.grid!r})")
            if self.sigma < 0:
                raise ConfigError("model.sigma", f"must be >= 0 (got {self.sigma})")
        if self.builtin == "synthetic" and self.noise < 0:
            raise ConfigError("model.noise", f"must be >= 0 (got {self.noise})")


@dataclass
class SimulationSection:
    S: int = DEFAULT_SEEDS
    T: int = DEFAULT_STEPS
    T_eq: int = DEFAULT_EQUILIBRATION
    seed_base: int = 0
    seeds: Optional[List[int]] = None
    transform: str = "none"
    shift: float = 0.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimulationSection":
        seeds = data.get("seeds")
        if seeds is not None:
            if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
                raise ConfigError("simulation.seeds", "must be a list of integers")
        transform = _clean(data.get("output_transform") or {})
        return cls(
            S=len(seeds) if seeds is not None else _number(data, "S", "simulation.S", DEFAULT_SEEDS, int),
            T=_number(data, "T", "simulation.T", DEFAULT_STEPS, int),
            T_eq=_number(data, "T_eq", "simulation.T_eq", DEFAULT_EQUILIBRATION, int),
            seed_base=_number(data, "seed_base", "simulation.seed_base", 0, int),
            seeds=seeds,
            transform=str(transform.get("kind", "none")),
            shift=_number(transform, "c", "simulation.output_transform.c", 0.0),
        )

    def to_dict(self) -> Dict[str, Any]:
        data = {"S": self.S, "T": self.T, "T_eq": self.T_eq}
        if self.seeds is not None:
            data["seeds"] = list(self.seeds)
        else:
            data["seed_base"] = self.seed_base
        if self.transform != "none":
            data["output_transform"] = {"kind": self.transform, "c": self.shift}
        return data

    def validate(self) -> None:
        if self.S < 1:
            raise ConfigError("simulation.S", f"must be >= 1 (got {self.S})")
        if self.T < 1:
            raise ConfigError("simulation.T", f"must be >= 1 (got {self.T})")
        if not 0 <= self.T_eq < self.T:
            raise ConfigError("simulation.T_eq", f"must satisfy 0 <= T_eq < T (got {self.T_eq})")
        if self.seeds is not None and len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("simulation.seeds", "seeds must be distinct")
        try:
            OutputTransform(self.transform, self.shift).validate()
        except ValueError as e:
            raise ConfigError("simulation.output_transform", str(e)) from e

    def to_simulation_config(self) -> SimulationConfig:
        transform = OutputTransform(self.transform, self.shift)
        if self.seeds is not None:
            return SimulationConfig(tuple(self.seeds), self.T, self.T_eq, transform)
        return SimulationConfig.from_seed_base(self.S, self.T, self.T_eq, self.seed_base, transform)


@dataclass
class WalkSection:
    N: int = DEFAULT_WALK_STEPS
    eps_min: float = WALK_EPS_MIN
    eps: float = WALK_EPS
    eps_max: float = WALK_EPS_MAX
    classify: bool = False
    random_sign: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WalkSection":
        return cls(
            N=_number(data, "N", "walk.N", DEFAULT_WALK_STEPS, int),
            eps_min=_number(data, "eps_min", "walk.eps_min", WALK_EPS_MIN),
            eps=_number(data, "eps", "walk.eps", WALK_EPS),
            eps_max=_number(data, "eps_max", "walk.eps_max", WALK_EPS_MAX),
            classify=_flag(data, "classify", "walk.classify", False),
            random_sign=_flag(data, "random_sign", "walk.random_sign", False),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "eps_min": self.eps_min,
            "eps": self.eps,
            "eps_max": self.eps_max,
            "classify": self.classify,
            "random_sign": self.random_sign,
        }

    def validate(self) -> None:
        if self.N < 1:
            raise ConfigError("walk.N", f"must be >= 1 (got {self.N})")
        if not 0 < self.eps <= self.eps_max:
            raise ConfigError("walk.eps", f"must satisfy 0 < eps <= eps_max (got {self.eps})")
        if not 0 < self.eps_min <= self.eps_max:
            raise ConfigError("walk.eps_min", f"must satisfy 0 < eps_min <= eps_max (got {self.eps_min})")


@dataclass
class RunConfig:
    """Configuration for a spectrum or explore run"""

    # Required parameters
    model: ModelSection
    parameters: Dict[str, float]

    # Optional parameters with defaults
    simulation: SimulationSection = field(default_factory=SimulationSection)
    loss: LossKind = field(default_factory=lambda: LossKind(DEFAULT_LOSS_KIND, DEFAULT_NORMALIZATION))
    h: Optional[float] = None
    mode: str = "log"
    walk: Optional[WalkSection] = None
    output_dir: str = str(OUTPUT_DIR)
    seed: int = 0
    workers: int = DEFAULT_WORKERS
    dump_ensembles: bool = False

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "RunConfig":
        """Create RunConfig from a parsed JSON document"""
        if not isinstance(config_dict, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        data = _clean(config_dict)

        if "model" not in data:
            raise ConfigError("model", "is required")
        if not isinstance(data["model"], dict):
            raise ConfigError("model", "must be an object")
        model = ModelSection.from_dict(_clean(data["model"]))

        parameters = data.get("parameters")
        if not isinstance(parameters, dict) or not parameters:
            raise ConfigError("parameters", "must be a non-empty object of name -> value")
        parameters = _clean(parameters)
        for name, value in parameters.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"parameters.{name}", f"must be a number (got {value!r})")

        loss_data = _section(data, "loss", "loss")
        loss_kind = loss_data.get("kind", DEFAULT_LOSS_KIND)
        if loss_kind not in LOSS_KINDS:
            raise ConfigError("loss.kind", f"unknown loss '{loss_kind}', expected one of {LOSS_KINDS}")
        normalization = loss_data.get("normalization", DEFAULT_NORMALIZATION)
        if normalization not in NORMALIZATIONS:
            raise ConfigError("loss.normalization", f"unknown normalization '{normalization}'")
        loss = LossKind(
            kind=loss_kind,
            normalization=normalization,
            bins=_number(loss_data, "bins", "loss.bins", HISTOGRAM_BINS, int),
            pseudo_count=_number(loss_data, "pseudo_count", "loss.pseudo_count", HISTOGRAM_PSEUDO_COUNT),
            mean_center=_flag(loss_data, "mean_center", "loss.mean_center", True),
            include_mean_term=_flag(loss_data, "include_mean_term", "loss.include_mean_term", False),
        )

        differentiation = _section(data, "differentiation", "differentiation")
        h = differentiation.get("h")
        if h is not None:
            h = _number(differentiation, "h", "differentiation.h")

        walk = None
        if data.get("walk") is not None:
            walk = WalkSection.from_dict(_section(data, "walk", "walk"))

        return cls(
            model=model,
            parameters={str(k): float(v) for k, v in parameters.items()},
            simulation=SimulationSection.from_dict(_section(data, "simulation", "simulation")),
            loss=loss,
            h=h,
            mode=str(differentiation.get("mode", "log")),
            walk=walk,
            output_dir=str(data.get("output_dir", OUTPUT_DIR)),
            seed=_number(data, "seed", "seed", 0, int),
            workers=_number(data, "workers", "workers", DEFAULT_WORKERS, int),
            dump_ensembles=_flag(data, "dump_ensembles", "dump_ensembles", False),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Canonical form; excludes run-local settings (output dir, workers, debug dumps)"""
        data = {
            "model": self.model.to_dict(),
            "parameters": dict(self.parameters),
            "simulation": self.simulation.to_dict(),
            "loss": self.loss.to_dict(),
            "differentiation": {"h": self.h, "mode": self.mode},
            "seed": self.seed,
        }
        if self.walk is not None:
            data["walk"] = self.walk.to_dict()
        return data

    def validate(self, check_files: bool = True) -> None:
        """Validate configuration parameters"""
        self.model.validate(check_files)
        self.simulation.validate()

        try:
            self.loss.validate()
        except ValueError as e:
            raise ConfigError("loss", str(e)) from e

        if self.mode not in MODES:
            raise ConfigError("differentiation.mode", f"must be 'log' or 'linear' (got {self.mode!r})")
        if self.h is not None and not self.h > 0:
            raise ConfigError("differentiation.h", f"must be > 0 (got {self.h})")
        if self.loss.kind == "skl" and self.mode != "log":
            raise ConfigError("differentiation.mode", "skl loss requires log mode")

        if self.mode == "log":
            try:
                self.parameter_point()
            except NonPositiveParameter as e:
                raise ConfigError(f"parameters.{e.name}", "must be > 0 in log mode") from e

        if self.walk is not None:
            self.walk.validate()
            if self.mode != "log":
                raise ConfigError("differentiation.mode", "the walk requires log mode")

        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1 (got {self.workers})")

    def parameter_point(self) -> ParameterPoint:
        try:
            names, values = list(self.parameters.keys()), list(self.parameters.values())
            if self.mode == "linear":
                return make_linear_point(names, values)
            return make_point(names, values)
        except DuplicateName as e:
            raise ConfigError(f"parameters.{e.name}", "duplicate name") from e

    def with_overrides(
        self,
        output_dir: Optional[str] = None,
        workers: Optional[int] = None,
        seed: Optional[int] = None,
        dump_ensembles: Optional[bool] = None,
    ) -> "RunConfig":
        """CLI flags take precedence over the config file"""
        updates = {}
        if output_dir is not None:
            updates["output_dir"] = str(output_dir)
        if workers is not None:
            updates["workers"] = workers
        if seed is not None:
            updates["seed"] = seed
        if dump_ensembles:
            updates["dump_ensembles"] = True
        return replace(self, **updates)


def load_run_config(path: Path, check_files: bool = True) -> RunConfig:
    """
    Read, parse and validate a run configuration file

    Raises:
        ConfigError: Missing/unreadable file or invalid content
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON in {path}: {e}") from e

    config = RunConfig.from_dict(data)
    config.validate(check_files)
    return config

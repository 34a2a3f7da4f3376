"""
External Model Adapter
Drives an external simulator executable through a file-based protocol
"""

import asyncio
import json
import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from config.settings import CSV_ENCODING, EXTERNAL_TIMEOUT_SECONDS
from utils.errors import LaunchFailure, ProtocolError, Timeout
from utils.param_space import ParameterPoint

logger = logging.getLogger(__name__)


@dataclass
class ExternalModelSpec:
    """How to launch an external simulator"""

    executable: str
    extra_args: List[str] = field(default_factory=list)
    timeout: float = EXTERNAL_TIMEOUT_SECONDS
    # None means "discover from the CSV header of the first run"
    variable_names: Optional[List[str]] = None
    serial: bool = False

    def validate(self) -> None:
        if not self.executable:
            raise ValueError("Executable is required")
        if not self.timeout > 0:
            raise ValueError(f"Timeout must be > 0 (got {self.timeout!r})")


def build_command(
    spec: ExternalModelSpec, params_file: Path, seed: int, steps: int, out_file: Path
) -> List[str]:
    """<exe> [extra args] --params <json> --seed <int> --steps <T> --out <csv>"""
    return [
        spec.executable,
        *spec.extra_args,
        "--params",
        str(params_file),
        "--seed",
        str(int(seed)),
        "--steps",
        str(int(steps)),
        "--out",
        str(out_file),
    ]


def write_params_file(params: ParameterPoint, path: Path) -> None:
    # json uses repr for floats: shortest string that round-trips exactly
    with open(path, "w", encoding=CSV_ENCODING, newline="\n") as f:
        json.dump(params.as_dict(), f)


def read_output_file(
    path: Path, steps: int, expected_names: Optional[List[str]], seed: Optional[int] = None
) -> tuple:
    """
    Parse the simulator's CSV output

    Returns:
        (variable names, K x T array)

    Raises:
        ProtocolError: Missing file, header mismatch, wrong row count or a
            non-finite / unparseable value
    """
    if not path.exists():
        raise ProtocolError(f"output file not written: {path.name}", seed=seed)

    try:
        frame = pd.read_csv(
            path,
            sep=",",
            dtype=float,
            float_precision="round_trip",
            encoding=CSV_ENCODING,
        )
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ProtocolError(f"unparseable output ({e})", seed=seed) from e

    names = [str(column) for column in frame.columns]
    if expected_names is not None and names != list(expected_names):
        raise ProtocolError(
            f"header mismatch: expected {list(expected_names)}, got {names}", seed=seed
        )

    if len(frame) != steps:
        raise ProtocolError(
            f"row count: expected {steps} data rows, got {len(frame)}", seed=seed
        )

    values = frame.to_numpy(dtype=float).T
    if not np.all(np.isfinite(values)):
        k, t = np.argwhere(~np.isfinite(values))[0]
        raise ProtocolError(
            f"non-finite value in column '{names[k]}' at row {int(t)}", seed=seed
        )
    return names, values


class ExternalModel:
    """SimulationModel backed by a subprocess per (params, seed) call"""

    def __init__(self, spec: ExternalModelSpec):
        spec.validate()
        self.spec = spec
        self.serial = spec.serial
        self._variable_names = (
            list(spec.variable_names) if spec.variable_names is not None else None
        )

    @property
    def variable_names(self) -> List[str]:
        if self._variable_names is None:
            raise ProtocolError("variable names not yet discovered (no run completed)")
        return self._variable_names

    async def simulate(self, params: ParameterPoint, seed: int, steps: int) -> np.ndarray:
        # Unique temp directory per call isolates concurrent runs
        with tempfile.TemporaryDirectory(prefix="sloppy_ext_") as workdir:
            workdir = Path(workdir)
            params_file = workdir / "params.json"
            out_file = workdir / "out.csv"
            write_params_file(params, params_file)

            command = build_command(self.spec, params_file, seed, steps, out_file)
            logger.debug(f"Launching: {' '.join(command)}")

            try:
                process = await asyncio.create_subprocess_exec(
                    *command,
                    stdout=asyncio.subprocess.PIPE,
                    stderr=asyncio.subprocess.PIPE,
                    cwd=str(workdir),
                )
            except (OSError, ValueError) as e:
                raise LaunchFailure(
                    f"could not launch {self.spec.executable}: {e}", seed=seed
                ) from e

            try:
                _, stderr = await asyncio.wait_for(
                    process.communicate(), timeout=self.spec.timeout
                )
            except asyncio.TimeoutError:
                process.kill()
                await process.wait()
                raise Timeout(self.spec.timeout, seed=seed)

            if process.returncode != 0:
                detail = stderr.decode(errors="replace").strip()[-500:]
                raise LaunchFailure(
                    f"{self.spec.executable} exited with {process.returncode}: {detail}",
                    seed=seed,
                )

            names, values = read_output_file(
                out_file, steps, self._variable_names, seed=seed
            )

        if self._variable_names is None:
            logger.info(f"Discovered external variables: {names}")
            self._variable_names = names
        return values

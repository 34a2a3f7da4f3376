"""
CSV formatters for Fisher matrices, spectra and Wishart null samples
"""

import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from config.settings import CSV_ENCODING
from services.fisher_service import FisherMatrix
from services.spectral_service import AxisSimilarityReport, Spectrum

logger = logging.getLogger(__name__)


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    # Default float formatting is repr: shortest round-trip string
    frame.to_csv(path, index=False, encoding=CSV_ENCODING, lineterminator="\n")
    return path


class FisherCSVFormatter:
    """Fisher matrix as CSV: header = parameter names, one row per parameter"""

    def __init__(self, output_file: str):
        self.output_file = Path(output_file)
        self.output_file.parent.mkdir(parents=True, exist_ok=True)

    def write(self, fisher: FisherMatrix) -> Path:
        frame = pd.DataFrame(np.array(fisher.entries), columns=list(fisher.parameter_names))
        _write_frame(frame, self.output_file)
        logger.info(f"Wrote {fisher.size}x{fisher.size} Fisher matrix to {self.output_file}")
        return self.output_file

    def read(self) -> FisherMatrix:
        frame = pd.read_csv(self.output_file, float_precision="round_trip", encoding=CSV_ENCODING)
        return FisherMatrix(
            entries=frame.to_numpy(dtype=float),
            parameter_names=tuple(str(c) for c in frame.columns),
        )


class SpectrumCSVFormatter:
    """
    One row per eigenvector: index, eigenvalue, ratio to the largest,
    axis similarity, best-aligned parameter, then the P components
    """

    BASE_COLUMNS = ["index", "eigenvalue", "ratio", "similarity", "best_axis"]

    def __init__(self, output_file: str):
        self.output_file = Path(output_file)
        self.output_file.parent.mkdir(parents=True, exist_ok=True)

    def to_frame(self, spectrum: Spectrum, similarity: AxisSimilarityReport) -> pd.DataFrame:
        names = list(spectrum.parameter_names)
        best_names = similarity.best_axis_names()
        rows = []
        for i in range(spectrum.size):
            row = {
                "index": i + 1,
                "eigenvalue": float(spectrum.eigenvalues[i]),
                "ratio": float(spectrum.ratios[i]),
                "similarity": similarity.similarity[i],
                "best_axis": best_names[i],
            }
            for p, name in enumerate(names):
                row[name] = float(spectrum.eigenvectors[p, i])
            rows.append(row)
        return pd.DataFrame(rows, columns=self.BASE_COLUMNS + names)

    def write(self, spectrum: Spectrum, similarity: AxisSimilarityReport) -> Path:
        _write_frame(self.to_frame(spectrum, similarity), self.output_file)
        logger.info(f"Wrote spectrum ({spectrum.size} eigenpairs) to {self.output_file}")
        return self.output_file


class WishartCSVFormatter:
    """Pooled null eigenvalues: trial, index within trial, eigenvalue"""

    COLUMNS = ["trial", "index", "eigenvalue"]

    def __init__(self, output_file: str):
        self.output_file = Path(output_file)
        self.output_file.parent.mkdir(parents=True, exist_ok=True)

    def write(self, samples: Sequence[float], P: int) -> Path:
        samples = np.asarray(samples, dtype=float)
        trials = len(samples) // P
        frame = pd.DataFrame(
            {
                "trial": np.repeat(np.arange(trials), P),
                "index": np.tile(np.arange(1, P + 1), trials),
                "eigenvalue": samples,
            },
            columns=self.COLUMNS,
        )
        _write_frame(frame, self.output_file)
        logger.info(f"Wrote {len(samples)} null eigenvalues to {self.output_file}")
        return self.output_file


def write_table(frame: pd.DataFrame, output_file: str) -> Path:
    """Write any plot-data table (e.g. eigenvalue convergence)"""
    path = Path(output_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _write_frame(frame, path)

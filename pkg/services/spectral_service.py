"""
Spectral Service
Eigendecomposition of Fisher matrices, stiff/sloppy diagnostics and the
Wishart null benchmark
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from config.settings import EIGENVALUE_TIE_TOLERANCE, WISHART_SUPPORT_WIDEN
from services.fisher_service import FisherMatrix, check_symmetric
from utils.errors import NonPositiveEigenvalue

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Spectrum:
    """
    Eigenpairs sorted by descending eigenvalue.

    Column i of `eigenvectors` pairs with eigenvalues[i]; each column has its
    largest-magnitude component positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    parameter_names: tuple

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def ratios(self) -> np.ndarray:
        """lambda_i / lambda_1 (zeros when lambda_1 is zero)"""
        leading = self.eigenvalues[0] if self.size else 0.0
        if leading == 0:
            return np.zeros(self.size)
        return self.eigenvalues / leading

    def vector(self, index: int) -> np.ndarray:
        """Eigenvector paired with eigenvalues[index] (0-based)"""
        return np.array(self.eigenvectors[:, index])

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


@dataclass(frozen=True)
class AxisSimilarityReport:
    """Best-aligned bare parameter axis per eigenvector"""

    best_axis: tuple
    similarity: tuple
    parameter_names: tuple

    def best_axis_names(self) -> List[str]:
        return [self.parameter_names[i] for i in self.best_axis]


def _sign_normalize(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude component is positive"""
    normalized = vectors.copy()
    for column in range(normalized.shape[1]):
        dominant = int(np.argmax(np.abs(normalized[:, column])))
        if normalized[dominant, column] < 0:
            normalized[:, column] = -normalized[:, column]
    return normalized


def _order_with_ties(eigenvalues: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Descending order; near-equal eigenvalues ordered by descending lexicographic eigenvector"""
    order = list(np.argsort(-eigenvalues, kind="stable"))
    scale = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    tolerance = EIGENVALUE_TIE_TOLERANCE * scale

    ordered = []
    group = [order[0]] if order else []
    for index in order[1:]:
        if abs(eigenvalues[group[0]] - eigenvalues[index]) <= tolerance:
            group.append(index)
            continue
        ordered.extend(sorted(group, key=lambda c: tuple(-vectors[:, c])))
        group = [index]
    ordered.extend(sorted(group, key=lambda c: tuple(-vectors[:, c])))
    return np.array(ordered, dtype=int)


def eigendecompose(
    H: Union[FisherMatrix, np.ndarray], parameter_names: Sequence[str] = None
) -> Spectrum:
    """
    Symmetric eigendecomposition with a deterministic sign convention

    Args:
        H: FisherMatrix or a square symmetric array
        parameter_names: Names for a bare array (default p0..pN)

    Returns:
        Spectrum sorted by descending eigenvalue

    Raises:
        NotSymmetric: If H is not symmetric within tolerance
    """
    if isinstance(H, FisherMatrix):
        matrix = np.array(H.entries, dtype=float)
        names = H.parameter_names
    else:
        matrix = np.array(H, dtype=float)
        names = tuple(parameter_names) if parameter_names is not None else tuple(
            f"p{i}" for i in range(matrix.shape[0])
        )

    check_symmetric(matrix)
    eigenvalues, vectors = linalg.eigh(0.5 * (matrix + matrix.T))
    vectors = _sign_normalize(vectors)
    order = _order_with_ties(eigenvalues, vectors)

    return Spectrum(
        eigenvalues=np.ascontiguousarray(eigenvalues[order]),
        eigenvectors=np.ascontiguousarray(vectors[:, order]),
        parameter_names=tuple(names),
    )


def axis_similarity(spectrum: Spectrum) -> AxisSimilarityReport:
    """sim_i = max_p |cos(v_i, e_p)| = max_p |v_i[p]| for unit eigenvectors"""
    magnitudes = np.abs(spectrum.eigenvectors)
    best = np.argmax(magnitudes, axis=0)
    similarity = magnitudes[best, np.arange(spectrum.size)]
    return AxisSimilarityReport(
        best_axis=tuple(int(i) for i in best),
        similarity=tuple(float(s) for s in similarity),
        parameter_names=spectrum.parameter_names,
    )


def stiffness_scale(eigenvalue: float) -> float:
    """
    Travel distance scale 1/sqrt(lambda) for a comparable loss change

    Raises:
        NonPositiveEigenvalue: If lambda <= 0
    """
    if not eigenvalue > 0:
        raise NonPositiveEigenvalue(eigenvalue)
    return 1.0 / math.sqrt(eigenvalue)


def wishart_null(P: int, M: int, trials: int, rng_seed: int) -> np.ndarray:
    """
    Pooled eigenvalues of W = G G^T / M, G a seeded P x M standard normal matrix

    Returns:
        1-D array of P * trials eigenvalues, trial by trial, each descending
    """
    if P < 1:
        raise ValueError(f"P must be >= 1 (got {P})")
    if M < P:
        raise ValueError(f"M must be >= P (got M={M}, P={P})")
    if trials < 1:
        raise ValueError(f"trials must be >= 1 (got {trials})")

    rng = np.random.default_rng(rng_seed)
    samples = np.empty((trials, P))
    for trial in range(trials):
        G = rng.standard_normal((P, M))
        samples[trial] = linalg.eigvalsh(G @ G.T / M)[::-1]
    return samples.ravel()


def marchenko_pastur_support(P: int, M: int) -> Tuple[float, float]:
    """[(1 - sqrt(P/M))^2, (1 + sqrt(P/M))^2]"""
    ratio = math.sqrt(P / M)
    return (1.0 - ratio) ** 2, (1.0 + ratio) ** 2


def fraction_inside_support(
    samples: Sequence[float], P: int, M: int, widen: float = WISHART_SUPPORT_WIDEN
) -> float:
    lower, upper = marchenko_pastur_support(P, M)
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return 0.0
    inside = (samples >= lower - widen) & (samples <= upper + widen)
    return float(np.mean(inside))


def eigenvalue_convergence_table(spectra_by_steps: Mapping[int, Spectrum]) -> pd.DataFrame:
    """Ratios lambda_i / lambda_1 per horizon T, one row per (T, eigenvalue index)"""
    rows: List[Dict] = []
    for steps in sorted(spectra_by_steps):
        spectrum = spectra_by_steps[steps]
        for index, (value, ratio) in enumerate(zip(spectrum.eigenvalues, spectrum.ratios)):
            rows.append(
                {"T": steps, "index": index + 1, "eigenvalue": float(value), "ratio": float(ratio)}
            )
    return pd.DataFrame(rows, columns=["T", "index", "eigenvalue", "ratio"])

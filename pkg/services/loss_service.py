"""
Loss Service
Time-series losses and the histogram-based (symmetrized) KL loss
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from config.settings import (
    DEFAULT_NORMALIZATION,
    DEGENERATE_RANGE_HALF_WIDTH,
    HISTOGRAM_BINS,
    HISTOGRAM_PSEUDO_COUNT,
    HISTOGRAM_RANGE_EXPANSION,
)
from models.model_api import EnsembleOutput
from utils.errors import (
    Divergent,
    EdgeMismatch,
    EmptySamples,
    ZeroNormalization,
    ZeroReference,
)

logger = logging.getLogger(__name__)

TIME_SERIES_KINDS = ("mse", "mspe", "logcosh", "logabs")
LOSS_KINDS = TIME_SERIES_KINDS + ("skl",)
NORMALIZATIONS = ("mean", "max", "std", "unit")


@dataclass(frozen=True)
class LossKind:
    """
    Loss selector.

    normalization applies to mse/logabs; bins, pseudo_count, mean_center and
    include_mean_term apply to skl.
    """

    kind: str = "mse"
    normalization: str = DEFAULT_NORMALIZATION
    bins: int = HISTOGRAM_BINS
    pseudo_count: float = HISTOGRAM_PSEUDO_COUNT
    mean_center: bool = True
    # Experimental: adds ((mean_c - mean_r) / std_r)^2 to the skl loss
    include_mean_term: bool = False

    def validate(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"Unknown loss kind '{self.kind}', expected one of {LOSS_KINDS}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"Unknown normalization '{self.normalization}', expected one of {NORMALIZATIONS}"
            )
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2 (got {self.bins})")
        if not self.pseudo_count > 0:
            raise ValueError(f"pseudo_count must be > 0 (got {self.pseudo_count})")

    @classmethod
    def from_dict(cls, data: Dict) -> "LossKind":
        known = {k: v for k, v in data.items() if not k.startswith("_")}
        return cls(**known)

    def to_dict(self) -> Dict:
        if self.kind == "skl":
            return {
                "kind": self.kind,
                "bins": self.bins,
                "pseudo_count": self.pseudo_count,
                "mean_center": self.mean_center,
                "include_mean_term": self.include_mean_term,
            }
        return {"kind": self.kind, "normalization": self.normalization}


@dataclass(frozen=True)
class HistogramPdf:
    """Smoothed histogram: B+1 ascending edges and B strictly positive masses"""

    bin_edges: np.ndarray
    mass: np.ndarray

    @property
    def bins(self) -> int:
        return len(self.mass)


# Normalization


def series_norms(reference: EnsembleOutput, normalization: str) -> np.ndarray:
    """
    Per-(s, k) normalization of the reference ensemble

    Returns:
        S x K array of norms

    Raises:
        ZeroNormalization: If any norm is zero
    """
    values = reference.values
    if normalization == "mean":
        norms = values.mean(axis=2)
    elif normalization == "max":
        norms = np.abs(values).max(axis=2)
    elif normalization == "std":
        norms = values.std(axis=2)
    elif normalization == "unit":
        norms = np.ones(values.shape[:2])
    else:
        raise ValueError(f"Unknown normalization: {normalization}")

    zero = np.argwhere(norms == 0)
    if len(zero):
        s, k = zero[0]
        raise ZeroNormalization(int(s), reference.variable_names[k], normalization)
    return norms


def _check_shapes(reference: EnsembleOutput, candidate: EnsembleOutput) -> None:
    if reference.shape != candidate.shape:
        raise ValueError(
            f"Ensemble shapes differ: reference {reference.shape}, candidate {candidate.shape}"
        )


# Time-series losses


def time_series_loss(
    kind: LossKind, reference: EnsembleOutput, candidate: EnsembleOutput
) -> float:
    """
    Loss of the candidate ensemble against the reference ensemble

    Args:
        kind: mse | mspe | logcosh | logabs (with normalization for mse/logabs)
        reference: Ensemble at the reference point
        candidate: Seed-matched ensemble at the candidate point

    Returns:
        Scalar loss

    Raises:
        ZeroNormalization: mse/logabs with a zero reference norm
        ZeroReference: mspe with a zero reference value
        Divergent: logabs with an exact zero difference
    """
    _check_shapes(reference, candidate)
    ref = reference.values
    cand = candidate.values
    count = ref.size

    if kind.kind == "mse":
        norms = series_norms(reference, kind.normalization)[:, :, np.newaxis]
        scaled = (cand - ref) / norms
        return float(np.sum(scaled**2) / (2 * count))

    if kind.kind == "mspe":
        zero = np.argwhere(ref == 0)
        if len(zero):
            raise ZeroReference(tuple(int(i) for i in zero[0]))
        return float(np.sum((1 - cand / ref) ** 2) / count)

    if kind.kind == "logcosh":
        diff = cand - ref
        # ln cosh x = logaddexp(x, -x) - ln 2, stable for large |x|
        return float(np.sum(np.logaddexp(diff, -diff) - np.log(2.0)) / count)

    if kind.kind == "logabs":
        norms = series_norms(reference, kind.normalization)[:, :, np.newaxis]
        scaled = np.abs((cand - ref) / norms)
        if np.any(scaled == 0):
            raise Divergent(
                "log-absolute loss is infinite: zero difference between candidate and reference"
            )
        return float(-np.sum(np.log(scaled)) / count)

    raise ValueError(f"Not a time-series loss: {kind.kind}")


# Histograms and KL


def histogram_edges(samples: np.ndarray, bins: int, expansion: float = HISTOGRAM_RANGE_EXPANSION) -> np.ndarray:
    """
    B equal-width bins over [min, max] widened by `expansion` of the range per side

    A degenerate range (all samples equal) is widened symmetrically so the
    point lies inside a bin.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise EmptySamples("Cannot build histogram edges from no samples")
    if bins < 2:
        raise ValueError(f"bins must be >= 2 (got {bins})")

    low, high = float(samples.min()), float(samples.max())
    span = high - low
    if span == 0:
        half = DEGENERATE_RANGE_HALF_WIDTH * max(1.0, abs(low))
        return np.linspace(low - half, high + half, bins + 1)
    return np.linspace(low - expansion * span, high + expansion * span, bins + 1)


def histogram_pdf(
    samples: np.ndarray,
    edges: Optional[np.ndarray] = None,
    bins: int = HISTOGRAM_BINS,
    pseudo_count: float = HISTOGRAM_PSEUDO_COUNT,
) -> HistogramPdf:
    """
    Pseudo-count smoothed histogram

    Each bin mass is (count + eta) / (n + B eta). Samples outside fixed edges
    are clipped into the outermost bins.

    Args:
        samples: Finite samples (any shape, flattened)
        edges: Fixed ascending edges, or None to use the automatic policy
        bins: Bin count for the automatic policy
        pseudo_count: eta > 0 (a value of 0 gives the raw frequencies)

    Raises:
        EmptySamples: If no samples are given
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise EmptySamples("Cannot build a histogram from no samples")
    if pseudo_count < 0:
        raise ValueError(f"pseudo_count must be >= 0 (got {pseudo_count})")

    if edges is None:
        edges = histogram_edges(samples, bins)
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise ValueError("Histogram edges must be strictly ascending")

    clipped = np.clip(samples, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    n_bins = len(counts)
    mass = (counts + pseudo_count) / (samples.size + n_bins * pseudo_count)
    return HistogramPdf(bin_edges=edges, mass=mass)


def _check_edges(p: HistogramPdf, q: HistogramPdf) -> None:
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(
        p.bin_edges, q.bin_edges
    ):
        raise EdgeMismatch("Histograms must share identical bin edges")


def kl_divergence(p: HistogramPdf, q: HistogramPdf) -> float:
    """sum_x P(x) ln(P(x) / Q(x))"""
    _check_edges(p, q)
    return float(stats.entropy(p.mass, q.mass))


def skl_divergence(p: HistogramPdf, q: HistogramPdf) -> float:
    """Symmetrized KL: kl(P, Q) + kl(Q, P)"""
    return kl_divergence(p, q) + kl_divergence(q, p)


def _prepare_series(values: np.ndarray, mean_center: bool) -> np.ndarray:
    if mean_center:
        return values - values.mean(axis=2, keepdims=True)
    return values


def reference_edges(reference: EnsembleOutput, kind: LossKind) -> List[np.ndarray]:
    """Shared edges per variable k, pooled over seeds and time of the reference"""
    ref = _prepare_series(reference.values, kind.mean_center)
    return [histogram_edges(ref[:, k, :], kind.bins) for k in range(ref.shape[1])]


def ensemble_histograms(
    ensemble: EnsembleOutput, edges: List[np.ndarray], kind: LossKind
) -> List[List[HistogramPdf]]:
    """histograms[s][k] on the shared edges"""
    values = _prepare_series(ensemble.values, kind.mean_center)
    S, K, _ = values.shape
    return [
        [histogram_pdf(values[s, k], edges[k], pseudo_count=kind.pseudo_count) for k in range(K)]
        for s in range(S)
    ]


def _mean_term(reference: EnsembleOutput, candidate: EnsembleOutput) -> float:
    ref_mean = reference.values.mean(axis=2)
    cand_mean = candidate.values.mean(axis=2)
    ref_std = reference.values.std(axis=2)
    if np.any(ref_std == 0):
        s, k = np.argwhere(ref_std == 0)[0]
        raise ZeroNormalization(int(s), reference.variable_names[k], "std")
    S, K = ref_mean.shape
    return float(np.sum(((cand_mean - ref_mean) / ref_std) ** 2) / (2 * S * K))


def kl_loss(
    reference: EnsembleOutput,
    candidate: EnsembleOutput,
    kind: LossKind,
    direction: str = "forward",
) -> float:
    """
    Directional KL loss (1/SK) sum_{s,k} D_KL on edges built from the reference

    direction "forward" is D_KL(P_ref, P_cand); "reverse" swaps the arguments.
    """
    _check_shapes(reference, candidate)
    edges = reference_edges(reference, kind)
    ref_h = ensemble_histograms(reference, edges, kind)
    cand_h = ensemble_histograms(candidate, edges, kind)

    S, K, _ = reference.shape
    total = 0.0
    for s in range(S):
        for k in range(K):
            if direction == "forward":
                total += kl_divergence(ref_h[s][k], cand_h[s][k])
            elif direction == "reverse":
                total += kl_divergence(cand_h[s][k], ref_h[s][k])
            else:
                raise ValueError(f"Unknown KL direction: {direction}")
    return total / (S * K)


def skl_loss(reference: EnsembleOutput, candidate: EnsembleOutput, kind: LossKind) -> float:
    """
    (1 / 2SK) sum_{s,k} D_sKL(P_{s,k}, Q_{s,k})

    Series are optionally centred on their own mean; both ensembles are
    histogrammed on edges built from the reference.
    """
    _check_shapes(reference, candidate)
    edges = reference_edges(reference, kind)
    ref_h = ensemble_histograms(reference, edges, kind)
    cand_h = ensemble_histograms(candidate, edges, kind)

    S, K, _ = reference.shape
    total = 0.0
    for s in range(S):
        for k in range(K):
            total += skl_divergence(ref_h[s][k], cand_h[s][k])
    loss = total / (2 * S * K)

    if kind.include_mean_term:
        loss += _mean_term(reference, candidate)
    return loss


def evaluate_loss(kind: LossKind, reference: EnsembleOutput, candidate: EnsembleOutput) -> float:
    """Dispatch to the time-series or distributional loss"""
    if kind.kind == "skl":
        return skl_loss(reference, candidate, kind)
    return time_series_loss(kind, reference, candidate)

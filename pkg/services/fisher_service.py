"""
Fisher Service
Fisher-information Hessians from seed-matched central differences, the
histogram (KL) form, and the direct O(P^2) finite-difference Hessian
"""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Awaitable, Callable, Dict, List, Optional, Union

import numpy as np

from config.settings import (
    DEFAULT_LOG_STEP,
    DEFAULT_WORKERS,
    LINEAR_STEP_SCALE,
    SYMMETRY_TOLERANCE,
)
from models.model_api import (
    EnsembleOutput,
    SimulationConfig,
    SimulationModel,
    ensemble_semaphore,
    run_ensemble,
)
from services.loss_service import (
    LossKind,
    ensemble_histograms,
    evaluate_loss,
    reference_edges,
    series_norms,
)
from utils.errors import Divergent, NotSymmetric, ZeroReference
from utils.param_space import ParameterPoint, perturb, shift

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JacobianTensor:
    """dy[s, k, t] / d(coordinate i), stored as S x K x T' x P"""

    values: np.ndarray
    mode: str
    steps: np.ndarray
    parameter_names: tuple

    def __post_init__(self):
        if self.values.ndim != 4:
            raise ValueError(f"Jacobian must be 4-D (got {self.values.ndim}-D)")
        if self.values.shape[3] != len(self.parameter_names):
            raise ValueError("Jacobian last axis must match the parameter count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Jacobian has non-finite entries")

    @property
    def size(self) -> int:
        return self.values.shape[3]

    def seed_mean(self) -> "JacobianTensor":
        """Jacobian of the seed-averaged output (S collapsed to 1)"""
        return JacobianTensor(
            values=self.values.mean(axis=0, keepdims=True),
            mode=self.mode,
            steps=self.steps,
            parameter_names=self.parameter_names,
        )


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric P x P Fisher/Hessian estimate with its provenance"""

    entries: np.ndarray
    parameter_names: tuple
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.parameter_names)
        if self.entries.shape != (n, n):
            raise ValueError(
                f"Fisher matrix shape {self.entries.shape} does not match {n} parameters"
            )
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.parameter_names)

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))

    def to_dict(self) -> Dict:
        return {
            "parameter_names": list(self.parameter_names),
            "entries": self.entries.tolist(),
            "provenance": dict(self.provenance),
        }


def default_steps(params: ParameterPoint, mode: str, h: Optional[float] = None) -> np.ndarray:
    """Per-axis step: h (or 0.1) in log mode; h or 1e-4 max(1, |theta|) in linear mode"""
    if h is not None:
        if not h > 0:
            raise ValueError(f"Step h must be > 0 (got {h!r})")
        return np.full(params.size, float(h))
    if mode == "log":
        return np.full(params.size, DEFAULT_LOG_STEP)
    if mode == "linear":
        return LINEAR_STEP_SCALE * np.maximum(1.0, np.abs(params.linear))
    raise ValueError(f"Unknown differentiation mode: {mode}")


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


async def _perturbed_ensembles(
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    steps: np.ndarray,
    mode: str,
    workers: int,
    counter,
    matched_seeds: bool = True,
) -> List[tuple]:
    """
    (plus, minus) ensemble per axis; the 2P runs share one concurrency limit

    With matched_seeds=False ensemble j runs on seed block j + 1, so no two
    ensembles share a seed.
    """
    pairs = [perturb(params, i, float(steps[i]), mode) for i in range(params.size)]
    semaphore = ensemble_semaphore(model, workers)

    def config_for(j: int) -> SimulationConfig:
        return config if matched_seeds else config.seed_block(j + 1)

    runs = []
    for i, pair in enumerate(pairs):
        for j, point in ((2 * i, pair.plus), (2 * i + 1, pair.minus)):
            runs.append(
                run_ensemble(model, point, config_for(j), workers, counter, "hessian", semaphore)
            )
    ensembles = await asyncio.gather(*runs)
    return [(ensembles[2 * i], ensembles[2 * i + 1]) for i in range(params.size)]


async def jacobian_central(
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    h: Optional[float] = None,
    mode: str = "log",
    workers: int = DEFAULT_WORKERS,
    counter=None,
    matched_seeds: bool = True,
) -> JacobianTensor:
    """
    Seed-matched central-difference Jacobian

    Runs exactly 2P ensembles (2PS simulate calls, counted as "hessian").

    Args:
        model: Simulator
        params: Base point
        config: Simulation configuration shared by every ensemble
        h: Step size (None for the mode default)
        mode: "log" (d/d ln phi) or "linear" (d/d phi)
        matched_seeds: False runs every ensemble on its own seed block;
            only the seed mean of such a Jacobian is meaningful

    Returns:
        JacobianTensor of shape S x K x T' x P

    Raises:
        NonPositiveParameter: log mode on a point with non-positive values
    """
    steps = default_steps(params, mode, h)
    pairs = await _perturbed_ensembles(
        model, params, config, steps, mode, workers, counter, matched_seeds
    )

    columns = [(plus.values - minus.values) / (2.0 * steps[i]) for i, (plus, minus) in enumerate(pairs)]
    values = np.stack(columns, axis=-1)
    logger.debug(f"Jacobian {values.shape} at {params.as_dict()} ({mode} mode)")
    return JacobianTensor(values=values, mode=mode, steps=steps, parameter_names=params.names)


def _check_compatible(J: JacobianTensor, reference: EnsembleOutput) -> None:
    if J.values.shape[:3] != reference.shape:
        raise ValueError(
            f"Jacobian {J.values.shape[:3]} and reference {reference.shape} are not compatible"
        )


def _weighted_outer(J: JacobianTensor, weights: np.ndarray) -> np.ndarray:
    """(1/SKT') sum_{s,k,t} w[s,k,t] J[..., i] J[..., j]"""
    S, K, T, P = J.values.shape
    weighted = J.values * weights[..., np.newaxis]
    flat_w = weighted.reshape(-1, P)
    flat_j = J.values.reshape(-1, P)
    return _symmetrize(flat_w.T @ flat_j / (S * K * T))


def fisher_from_jacobian(
    J: JacobianTensor, reference: EnsembleOutput, normalization: str = "mean"
) -> FisherMatrix:
    """
    H_ij = (1/SKT') sum (1/||y_{s,k}||^2) J[s,k,t,i] J[s,k,t,j]

    Raises:
        ZeroNormalization: If a reference series has a zero norm
    """
    _check_compatible(J, reference)
    norms = series_norms(reference, normalization)
    weights = np.broadcast_to((1.0 / norms**2)[:, :, np.newaxis], reference.shape)
    entries = _weighted_outer(J, weights)
    return FisherMatrix(
        entries=entries,
        parameter_names=J.parameter_names,
        provenance={
            "estimator": "jacobian",
            "loss": "mse",
            "normalization": normalization,
            "mode": J.mode,
            "h": J.steps.tolist(),
        },
    )


def fisher_for_loss(J: JacobianTensor, reference: EnsembleOutput, kind: LossKind) -> FisherMatrix:
    """
    Gauss-Newton Hessian of a time-series loss at the optimum

    Weights per loss: mse 1/||y_{s,k}||^2, mspe 2/y^2, logcosh 1.

    Raises:
        Divergent: logabs (its Hessian is unbounded at the optimum)
        ZeroReference: mspe with a zero reference value
    """
    if kind.kind == "mse":
        return fisher_from_jacobian(J, reference, kind.normalization)

    _check_compatible(J, reference)
    if kind.kind == "mspe":
        ref = reference.values
        if np.any(ref == 0):
            raise ZeroReference(tuple(int(i) for i in np.argwhere(ref == 0)[0]))
        weights = 2.0 / ref**2
    elif kind.kind == "logcosh":
        weights = np.ones(reference.shape)
    elif kind.kind == "logabs":
        raise Divergent("log-absolute loss has no finite Hessian at the optimum")
    else:
        raise ValueError(f"No Jacobian-based Fisher form for loss '{kind.kind}'")

    return FisherMatrix(
        entries=_weighted_outer(J, weights),
        parameter_names=J.parameter_names,
        provenance={
            "estimator": "jacobian",
            "loss": kind.kind,
            "mode": J.mode,
            "h": J.steps.tolist(),
        },
    )


async def fisher_from_histograms(
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    h: Optional[float],
    kind: LossKind,
    workers: int = DEFAULT_WORKERS,
    counter=None,
    baseline: Optional[EnsembleOutput] = None,
) -> FisherMatrix:
    """
    Fisher matrix of the symmetrized-KL loss from per-bin derivatives

    H_ij = (1/2SK) sum_{s,k} sum_bins 2 dP_i dP_j / P, with P the baseline
    histogram and dP_i the central difference of the perturbed histograms,
    all on edges built from the baseline.

    Args:
        baseline: Ensemble at `params` if already available (otherwise run
            and counted as "baseline")
    """
    if baseline is None:
        baseline = await run_ensemble(model, params, config, workers, counter, "baseline")

    steps = default_steps(params, "log", h)
    pairs = await _perturbed_ensembles(model, params, config, steps, "log", workers, counter)

    edges = reference_edges(baseline, kind)
    base_h = ensemble_histograms(baseline, edges, kind)
    plus_h = [ensemble_histograms(plus, edges, kind) for plus, _ in pairs]
    minus_h = [ensemble_histograms(minus, edges, kind) for _, minus in pairs]

    S, K, _ = baseline.shape
    P = params.size
    entries = np.zeros((P, P))
    for s in range(S):
        for k in range(K):
            mass = base_h[s][k].mass
            derivatives = np.stack(
                [
                    (plus_h[i][s][k].mass - minus_h[i][s][k].mass) / (2.0 * steps[i])
                    for i in range(P)
                ],
                axis=0,
            )
            entries += 2.0 * (derivatives / mass) @ derivatives.T
    entries = _symmetrize(entries / (2 * S * K))

    return FisherMatrix(
        entries=entries,
        parameter_names=params.names,
        provenance={
            "estimator": "histogram",
            "loss": "skl",
            "bins": kind.bins,
            "pseudo_count": kind.pseudo_count,
            "mean_center": kind.mean_center,
            "mode": "log",
            "h": steps.tolist(),
        },
    )


LossOfDelta = Callable[[np.ndarray], Awaitable[float]]


async def hessian_from_loss(loss_of_delta: LossOfDelta, size: int, h: float) -> np.ndarray:
    """
    Second central differences of L(delta) around delta = 0

    Diagonal (L(+h) + L(-h) - 2 L(0)) / h^2; off-diagonal uses the 4-point
    stencil / (4 h^2). Costs 1 + 2P + 2P(P-1) loss evaluations.
    """
    if not h > 0:
        raise ValueError(f"Step h must be > 0 (got {h!r})")

    def delta(*moves) -> np.ndarray:
        vector = np.zeros(size)
        for axis, sign in moves:
            vector[axis] += sign * h
        return vector

    center = await loss_of_delta(np.zeros(size))
    hessian = np.zeros((size, size))

    for i in range(size):
        up = await loss_of_delta(delta((i, 1)))
        down = await loss_of_delta(delta((i, -1)))
        hessian[i, i] = (up + down - 2.0 * center) / h**2

    for i in range(size):
        for j in range(i + 1, size):
            pp = await loss_of_delta(delta((i, 1), (j, 1)))
            pm = await loss_of_delta(delta((i, 1), (j, -1)))
            mp = await loss_of_delta(delta((i, -1), (j, 1)))
            mm = await loss_of_delta(delta((i, -1), (j, -1)))
            hessian[i, j] = hessian[j, i] = (pp - pm - mp + mm) / (4.0 * h**2)

    return hessian


async def full_hessian_fd(
    loss: Union[LossKind, Callable[[EnsembleOutput, EnsembleOutput], float]],
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    h: Optional[float] = None,
    mode: str = "log",
    workers: int = DEFAULT_WORKERS,
    counter=None,
) -> np.ndarray:
    """
    Direct finite-difference Hessian of a loss against the ensemble at `params`

    Args:
        loss: LossKind, or a callable (reference, candidate) -> float
        h: Uniform step (None: 0.1 in log mode, 1e-4 max(1, |theta|) mean in linear)

    Returns:
        P x P Hessian in the coordinates of `mode`
    """
    if h is None:
        h = float(np.mean(default_steps(params, mode)))

    if isinstance(loss, LossKind):
        kind = loss

        def loss_fn(reference, candidate):
            return evaluate_loss(kind, reference, candidate)

    else:
        loss_fn = loss

    reference = await run_ensemble(model, params, config, workers, counter, "baseline")

    async def loss_of_delta(delta: np.ndarray) -> float:
        if not np.any(delta):
            return float(loss_fn(reference, reference))
        candidate = await run_ensemble(
            model, shift(params, delta, mode), config, workers, counter, "loss"
        )
        return float(loss_fn(reference, candidate))

    hessian = await hessian_from_loss(loss_of_delta, params.size, h)
    logger.debug(f"Direct Hessian at {params.as_dict()}: diag {np.diag(hessian).tolist()}")
    return hessian


async def estimate_fisher(
    model: SimulationModel,
    params: ParameterPoint,
    config: SimulationConfig,
    kind: LossKind,
    h: Optional[float] = None,
    mode: str = "log",
    workers: int = DEFAULT_WORKERS,
    counter=None,
    baseline: Optional[EnsembleOutput] = None,
) -> tuple:
    """
    Fisher matrix for the configured loss

    skl uses the histogram form (log mode only); every other loss uses the
    Jacobian with its Gauss-Newton weights.

    Returns:
        (FisherMatrix, baseline EnsembleOutput at params)
    """
    if kind.kind == "skl":
        if mode != "log":
            raise ValueError("The histogram Fisher form is defined in log mode only")
        if baseline is None:
            baseline = await run_ensemble(model, params, config, workers, counter, "baseline")
        fisher = await fisher_from_histograms(
            model, params, config, h, kind, workers, counter, baseline
        )
        return fisher, baseline

    if kind.kind == "logabs":
        raise Divergent("log-absolute loss has no finite Hessian at the optimum")

    if baseline is None:
        baseline, J = await asyncio.gather(
            run_ensemble(model, params, config, workers, counter, "baseline"),
            jacobian_central(model, params, config, h, mode, workers, counter),
        )
    else:
        J = await jacobian_central(model, params, config, h, mode, workers, counter)
    return fisher_for_loss(J, baseline, kind), baseline


def check_symmetric(matrix: np.ndarray, tolerance: float = SYMMETRY_TOLERANCE) -> None:
    """
    Raises:
        NotSymmetric: If max |H - H^T| exceeds tolerance * max(1, max |H|)
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Expected a square matrix (got shape {matrix.shape})")
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if asymmetry > tolerance * scale:
        raise NotSymmetric(asymmetry)


def hilbert_matrix(n: int) -> np.ndarray:
    """Limit matrix of the polynomial study: entries 1/(i + j + 1), 0-based"""
    index = np.arange(n)
    return 1.0 / (index[:, np.newaxis] + index[np.newaxis, :] + 1.0)


def count_entries_above(estimate: np.ndarray, target: np.ndarray, threshold: float) -> int:
    """Number of unique entries (i <= j) with relative error above threshold"""
    estimate = np.asarray(estimate, dtype=float)
    target = np.asarray(target, dtype=float)
    if estimate.shape != target.shape:
        raise ValueError(f"Shapes differ: {estimate.shape} vs {target.shape}")
    upper = np.triu_indices(target.shape[0])
    relative = np.abs(estimate[upper] / target[upper] - 1.0)
    return int(np.sum(relative > threshold))

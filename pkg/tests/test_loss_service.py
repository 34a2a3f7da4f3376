import math

import numpy as np
import pytest

from models.model_api import EnsembleOutput, SimulationConfig
from services.fisher_service import full_hessian_fd
from services.loss_service import (
    HistogramPdf,
    LossKind,
    evaluate_loss,
    histogram_edges,
    histogram_pdf,
    kl_divergence,
    kl_loss,
    series_norms,
    skl_divergence,
    skl_loss,
    time_series_loss,
)
from utils.errors import Divergent, EdgeMismatch, EmptySamples, ZeroNormalization, ZeroReference
from utils.param_space import make_point


def ensemble(values, names=("y",)):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(1, 1, -1)
    return EnsembleOutput(values=values, variable_names=tuple(names))


def pdf(mass):
    mass = np.asarray(mass, dtype=float)
    return HistogramPdf(bin_edges=np.linspace(0.0, 1.0, len(mass) + 1), mass=mass)


def test_mse_identical_is_zero():
    ref = ensemble([0.3, 0.5, 0.7])
    assert time_series_loss(LossKind("mse"), ref, ref) == 0.0


def test_mse_mean_normalized():
    loss = time_series_loss(LossKind("mse", "mean"), ensemble([1.0, 1.0]), ensemble([1.1, 0.9]))
    assert loss == pytest.approx(0.005)


def test_mspe():
    loss = time_series_loss(LossKind("mspe"), ensemble([1.0, 1.0]), ensemble([1.1, 0.9]))
    assert loss == pytest.approx(0.01)


def test_logcosh_unit_offset():
    ref = ensemble([2.0, 3.0, 4.0])
    cand = ensemble([1.0, 2.0, 3.0])
    assert time_series_loss(LossKind("logcosh"), ref, cand) == pytest.approx(
        math.log(math.cosh(1.0)), rel=1e-12
    )


def test_logcosh_is_stable_for_large_differences():
    loss = time_series_loss(LossKind("logcosh"), ensemble([0.0]), ensemble([1000.0]))
    assert loss == pytest.approx(1000.0 - math.log(2.0))


def test_logabs_value_and_divergence():
    kind = LossKind("logabs", "unit")
    assert time_series_loss(kind, ensemble([1.0, 1.0]), ensemble([2.0, 3.0])) == pytest.approx(
        -math.log(2.0) / 2
    )
    with pytest.raises(Divergent):
        time_series_loss(kind, ensemble([1.0, 1.0]), ensemble([1.0, 3.0]))


def test_mspe_zero_reference():
    with pytest.raises(ZeroReference) as excinfo:
        time_series_loss(LossKind("mspe"), ensemble([1.0, 0.0]), ensemble([1.0, 1.0]))
    assert excinfo.value.index == (0, 0, 1)


def test_zero_mean_normalization():
    with pytest.raises(ZeroNormalization):
        time_series_loss(LossKind("mse", "mean"), ensemble([1.0, -1.0]), ensemble([1.0, 1.0]))


def test_series_norms():
    ref = ensemble([-2.0, 1.0, 1.0])
    assert series_norms(ref, "max")[0, 0] == 2.0
    assert series_norms(ref, "std")[0, 0] == pytest.approx(np.std([-2.0, 1.0, 1.0]))
    assert series_norms(ref, "unit")[0, 0] == 1.0


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        time_series_loss(LossKind("mse"), ensemble([1.0, 1.0]), ensemble([1.0, 1.0, 1.0]))


def test_loss_kind_validation():
    with pytest.raises(ValueError):
        LossKind("huber").validate()
    with pytest.raises(ValueError):
        LossKind("mse", normalization="median").validate()
    with pytest.raises(ValueError):
        LossKind("skl", pseudo_count=0.0).validate()


def test_loss_kind_dict_skips_comments():
    kind = LossKind.from_dict({"kind": "skl", "bins": 32, "_note": "coarse"})
    assert kind.bins == 32
    assert kind.to_dict()["bins"] == 32


def test_histogram_raw_frequencies():
    hist = histogram_pdf([0.0, 0.0, 1.0, 1.0], edges=np.array([0.0, 0.5, 1.0]), pseudo_count=0.0)
    assert hist.mass.tolist() == [0.5, 0.5]


def test_histogram_smoothing_floor():
    rng = np.random.default_rng(0)
    samples = rng.standard_normal(500)
    hist = histogram_pdf(samples, bins=64, pseudo_count=0.5)
    assert hist.mass.min() >= 0.5 / (500 + 64 * 0.5) - 1e-15
    assert hist.mass.sum() == pytest.approx(1.0)


def test_histogram_degenerate_range():
    hist = histogram_pdf([3.0] * 4, bins=4, pseudo_count=0.5)
    assert hist.bin_edges[0] < 3.0 < hist.bin_edges[-1]
    assert hist.mass.max() == pytest.approx(4.5 / 6.0)
    assert np.sum(hist.mass == hist.mass.max()) == 1


def test_histogram_edges_expand_range():
    edges = histogram_edges(np.array([0.0, 10.0]), bins=4)
    assert edges[0] == -1.0
    assert edges[-1] == 11.0


def test_histogram_clips_outside_samples():
    hist = histogram_pdf([-5.0, 0.25, 5.0], edges=np.array([0.0, 0.5, 1.0]), pseudo_count=0.0)
    assert hist.mass.tolist() == [2 / 3, 1 / 3]


def test_histogram_empty():
    with pytest.raises(EmptySamples):
        histogram_pdf([], bins=4)


def test_kl_examples():
    p = pdf([0.75, 0.25])
    q = pdf([0.25, 0.75])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(p, q) == pytest.approx(0.5 * math.log(3.0))
    assert skl_divergence(p, q) == pytest.approx(math.log(3.0))


def test_kl_near_point_mass_approaches_ln2():
    tiny = 1e-12
    assert kl_divergence(pdf([1 - tiny, tiny]), pdf([0.5, 0.5])) == pytest.approx(
        math.log(2.0), rel=1e-9
    )


def test_skl_symmetric_and_non_negative():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = pdf(rng.dirichlet(np.ones(8)))
        q = pdf(rng.dirichlet(np.ones(8)))
        assert skl_divergence(p, q) == pytest.approx(skl_divergence(q, p), rel=1e-12)
        assert kl_divergence(p, q) >= 0.0


def test_kl_edge_mismatch():
    p = pdf([0.5, 0.5])
    q = HistogramPdf(bin_edges=np.array([0.0, 0.4, 1.0]), mass=np.array([0.5, 0.5]))
    with pytest.raises(EdgeMismatch):
        kl_divergence(p, q)


def test_skl_loss_identical_is_zero():
    rng = np.random.default_rng(1)
    ref = ensemble(rng.standard_normal((2, 1, 1000)))
    assert skl_loss(ref, ref, LossKind("skl")) == 0.0


def test_skl_loss_gaussian_mean_shift():
    rng = np.random.default_rng(5)
    draws = rng.standard_normal(200000)
    ref = ensemble(draws)
    cand = ensemble(rng.standard_normal(200000) + 0.5)
    kind = LossKind("skl", bins=64, mean_center=False)
    # Symmetrized Gaussian KL is 0.5^2 = 0.25; the loss carries a 1/2 prefactor
    assert skl_loss(ref, cand, kind) == pytest.approx(0.125, rel=0.1)


def test_skl_loss_centred_shift_is_negligible():
    rng = np.random.default_rng(6)
    draws = rng.standard_normal(5000)
    loss = skl_loss(ensemble(draws), ensemble(draws + 3.0), LossKind("skl"))
    assert loss < 1e-3


def test_skl_mean_term():
    rng = np.random.default_rng(6)
    draws = rng.standard_normal(5000)
    kind = LossKind("skl", include_mean_term=True)
    loss = skl_loss(ensemble(draws), ensemble(draws + 1.0), kind)
    assert loss == pytest.approx(0.5 / np.var(draws), rel=1e-2)


def test_kl_directions_sum_to_symmetric_loss():
    rng = np.random.default_rng(8)
    ref = ensemble(rng.standard_normal(100000))
    cand = ensemble(rng.standard_normal(100000) + 0.2)
    kind = LossKind("skl", mean_center=False)
    forward = kl_loss(ref, cand, kind, "forward")
    reverse = kl_loss(ref, cand, kind, "reverse")
    assert forward + reverse == pytest.approx(2 * skl_loss(ref, cand, kind))


async def test_kl_direction_hessians_agree(gaussian_model):
    params = make_point(["phi1", "phi2"], [1.0, 1.0])
    config = SimulationConfig(seeds=(0,), steps=200000)
    kind = LossKind("skl", bins=64, mean_center=False)
    hessians = {
        direction: await full_hessian_fd(
            lambda reference, candidate, d=direction: kl_loss(reference, candidate, kind, d),
            gaussian_model,
            params,
            config,
            h=0.1,
        )
        for direction in ("forward", "reverse")
    }
    forward, reverse = hessians["forward"], hessians["reverse"]
    assert np.diag(forward) == pytest.approx(np.diag(reverse), rel=0.05)
    assert abs(forward[0, 1] - reverse[0, 1]) < 0.05
    # Per-observation Fisher of N(mu, sigma^2) in (mu, ln sigma) at sigma = 1
    assert np.diag(forward) == pytest.approx([1.0, 2.0], rel=0.05)


def test_evaluate_loss_dispatch():
    ref = ensemble([1.0, 1.0])
    cand = ensemble([1.1, 0.9])
    assert evaluate_loss(LossKind("mse"), ref, cand) == pytest.approx(0.005)
    assert evaluate_loss(LossKind("skl"), ref, ref) == 0.0

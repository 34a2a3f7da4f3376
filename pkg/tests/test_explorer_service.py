import math

import numpy as np
import pytest

from config.settings import WALK_EPS, WALK_EPS_MAX, WALK_EPS_MIN
from models.builtin_models import PhaseLabel, SyntheticPhaseModel, regime
from models.model_api import SimulationConfig
from services.explorer_service import (
    COS_SIGN_FIX,
    WalkConfig,
    WalkStep,
    fix_sign,
    orient_first_step,
    run_walk,
    select_direction,
    step_distance,
    with_first_sign,
)
from services.loss_service import LossKind
from utils.errors import DegenerateSpectrum
from utils.param_space import from_log, make_point

DIAGONAL = (1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture
def walk_config():
    return WalkConfig(
        steps=3,
        simulation=SimulationConfig.from_seed_base(4, 256),
        loss=LossKind("mse"),
        h=0.1,
        seed=7,
        classify=True,
    )


def test_select_direction_probability():
    rng = np.random.default_rng(0)
    draws = [select_direction(3.0, 1.0, rng) for _ in range(10000)]
    assert draws[0][1] == 0.75
    frequency = np.mean([chosen == 1 for chosen, _ in draws])
    sigma = math.sqrt(0.75 * 0.25 / 10000)
    assert abs(frequency - 0.75) < 3 * sigma


def test_select_direction_equal_eigenvalues():
    rng = np.random.default_rng(1)
    frequency = np.mean([select_direction(2.0, 2.0, rng)[0] == 1 for _ in range(10000)])
    assert abs(frequency - 0.5) < 3 * math.sqrt(0.25 / 10000)


def test_select_direction_zero_second_eigenvalue():
    rng = np.random.default_rng(2)
    assert all(select_direction(1.0, 0.0, rng) == (1, 1.0) for _ in range(100))


def test_select_direction_degenerate():
    with pytest.raises(DegenerateSpectrum):
        select_direction(0.0, 0.0, np.random.default_rng(0))


def test_fix_sign():
    assert fix_sign([-1.0, 0.0], [1.0, 0.0]).tolist() == [1.0, 0.0]
    assert fix_sign([0.0, 1.0], [1.0, 0.0]).tolist() == [0.0, 1.0]


def test_fix_sign_boundary_keeps_direction():
    v = [COS_SIGN_FIX, math.sqrt(1 - COS_SIGN_FIX**2)]
    assert fix_sign(v, [1.0, 0.0]).tolist() == v
    beyond = [COS_SIGN_FIX - 1e-9, math.sqrt(1 - (COS_SIGN_FIX - 1e-9) ** 2)]
    assert fix_sign(beyond, [1.0, 0.0]).tolist() == [-x for x in beyond]


def test_step_distance_cases():
    assert step_distance(1.0, 1.0) == pytest.approx(0.3)
    assert step_distance(1e-4, 1e-4) == 1.0
    assert step_distance(1.0, 100.0) == 1.0


def test_step_distance_bounds():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        lambda1 = 10 ** rng.uniform(-8, 4)
        lambda_chosen = lambda1 * 10 ** rng.uniform(-6, 0)
        d = step_distance(lambda_chosen, lambda1)
        assert 0 < d <= WALK_EPS_MAX
        expected = min(
            max(WALK_EPS, WALK_EPS_MIN * math.sqrt(lambda1)) / math.sqrt(lambda_chosen), WALK_EPS_MAX
        )
        assert d == pytest.approx(expected, rel=1e-12)
        # The stiffest direction always moves at least eps_min
        assert step_distance(lambda1, lambda1) >= WALK_EPS_MIN - 1e-12


def test_step_distance_rejects_zero():
    with pytest.raises(DegenerateSpectrum):
        step_distance(0.0, 1.0)


@pytest.mark.parametrize("start, expected", [((1.5, 0.4), 1), ((-1.5, -0.4), -1)])
async def test_first_step_points_toward_nearest_boundary(synthetic_model, walk_config, start, expected):
    origin = from_log(["phi1", "phi2"], start)
    sign, candidates = await orient_first_step(synthetic_model, origin, DIAGONAL, 0.3, walk_config)
    assert sign == expected
    assert set(candidates) == {1, -1}


async def test_first_step_tie_goes_positive(synthetic_model, walk_config):
    origin = make_point(["phi1", "phi2", "nuisance"], [1.0, 1.0, 1.0])
    sign, _ = await orient_first_step(synthetic_model, origin, (0.0, 0.0, 1.0), 0.5, walk_config)
    assert sign == 1


async def test_single_step_accounting(synthetic_model, origin2, counter):
    config = WalkConfig(
        steps=1, simulation=SimulationConfig.from_seed_base(4, 128), h=0.1, seed=1
    )
    trace = await run_walk(synthetic_model, origin2, config, counter=counter)
    assert len(trace.steps) == 1
    step = trace.steps[0]
    P, S = 2, 4
    assert step.calls == {"hessian": 2 * P * S, "evaluation": 0, "orientation": 2 * S}
    assert trace.calls["baseline"] == S
    assert counter.total == 2 * P * S + 2 * S + S


async def test_hessian_calls_for_eight_steps_both_orientations(synthetic_model, origin2):
    base = WalkConfig(steps=8, simulation=SimulationConfig.from_seed_base(20, 128), h=0.1, seed=3)
    totals = []
    for sign in (1, -1):
        trace = await run_walk(synthetic_model, origin2, with_first_sign(base, sign), workers=8)
        assert trace.hessian_calls == 8 * 20 * 2 * 2
        assert all(step.calls["orientation"] == 0 for step in trace.steps)
        totals.append(sum(sum(step.calls.values()) for step in trace.steps))
    assert sum(totals) >= 640


async def test_opposite_walks_recover_three_phases(synthetic_model, origin2):
    base = WalkConfig(
        steps=8,
        simulation=SimulationConfig.from_seed_base(4, 256),
        h=0.1,
        seed=7,
        classify=True,
    )
    labels = set()
    for sign in (1, -1):
        trace = await run_walk(synthetic_model, origin2, with_first_sign(base, sign))
        assert trace.aborted is None
        labels.add(trace.origin_phase)
        labels.update(trace.phases)
        for step in trace.steps:
            assert step.phase == regime(*step.end_log[:2]).value
    assert PhaseLabel.MID.value in labels
    assert len(labels) >= 3


async def test_sign_invariant_holds(synthetic_model, origin2):
    for seed in range(100):
        config = WalkConfig(
            steps=3, simulation=SimulationConfig.from_seed_base(2, 128), h=0.1, seed=seed
        )
        trace = await run_walk(synthetic_model, origin2, config)
        for previous, step in zip(trace.steps, trace.steps[1:]):
            assert np.dot(step.direction, previous.direction) >= COS_SIGN_FIX
            assert step.start_log == previous.end_log


async def test_walk_is_deterministic(synthetic_model, origin2, walk_config):
    first = await run_walk(synthetic_model, origin2, walk_config, workers=1)
    second = await run_walk(synthetic_model, origin2, walk_config, workers=6)
    assert first.steps == second.steps


async def test_resumed_walk_matches_uninterrupted_run(synthetic_model, origin2, walk_config):
    full = await run_walk(synthetic_model, origin2, walk_config)
    resumed = await run_walk(synthetic_model, origin2, walk_config, resume_steps=full.steps[:1])
    assert resumed.steps == full.steps


async def test_on_step_callback_sees_every_step(synthetic_model, origin2, walk_config):
    seen = []
    await run_walk(synthetic_model, origin2, walk_config, on_step=seen.append)
    assert [step.index for step in seen] == [0, 1, 2]


async def test_walk_aborts_on_flat_spectrum(origin2, walk_config):
    flat = SyntheticPhaseModel(noise=0.0)
    params = make_point(["nuisance1", "nuisance2", "phi3"], [1.0, 1.0, 1.0])

    class Constant:
        serial = False
        variable_names = ["u"]

        async def simulate(self, point, seed, steps):
            return flat.series(0.0, 0.0, seed, steps).reshape(1, -1)

    trace = await run_walk(Constant(), params, walk_config)
    assert trace.steps == ()
    assert trace.aborted is not None


def test_step_record_round_trip():
    step = WalkStep(
        index=0,
        start_log=(0.0, 0.0),
        lambda1=2.0,
        lambda2=0.5,
        v1=DIAGONAL,
        v2=(DIAGONAL[0], -DIAGONAL[1]),
        chosen=1,
        probability=0.8,
        sign_flipped=False,
        distance=0.3,
        direction=DIAGONAL,
        end_log=(0.3 * DIAGONAL[0], 0.3 * DIAGONAL[1]),
        loss=0.01,
        phase="MID",
        calls={"hessian": 16, "evaluation": 0, "orientation": 8},
    )
    assert WalkStep.from_dict(step.to_dict()) == step


def test_walk_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(steps=0).validate()
    with pytest.raises(ValueError):
        WalkConfig(first_sign=2).validate()

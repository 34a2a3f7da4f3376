import json

import numpy as np
import pandas as pd
import pytest

from runners.validate_runner import ValidateRunner
from services.fisher_service import hilbert_matrix
from utils.errors import ValidationFailure


def max_relative_error(estimate, degree):
    return float(np.max(np.abs(estimate / hilbert_matrix(degree + 1) - 1.0)))


async def test_noisy_error_falls_with_seed_count(tmp_path):
    runner = ValidateRunner(str(tmp_path))
    errors = {1: [], 20: []}
    for replication in range(10):
        for seed_count in errors:
            estimate = await runner.estimate(500, 0.1, seed_count, seed=1000 * replication)
            errors[seed_count].append(max_relative_error(estimate, 3))

    mean_errors = {S: float(np.mean(values)) for S, values in errors.items()}
    assert mean_errors[20] < mean_errors[1] / 3


async def test_noise_changes_the_estimate(tmp_path):
    runner = ValidateRunner(str(tmp_path))
    noisy = await runner.estimate(500, 0.1, 1)
    noiseless = await runner.estimate(500, 0.0, 1)
    assert np.max(np.abs(noisy - noiseless)) > 1e-3


@pytest.mark.parametrize("method", ["jacobian", "direct"])
async def test_noiseless_methods_reach_hilbert_limit(tmp_path, method):
    runner = ValidateRunner(str(tmp_path))
    estimate = await runner.estimate(2000, 0.0, 1, degree=3, method=method)
    np.testing.assert_allclose(estimate, hilbert_matrix(4), rtol=1e-3)


async def test_error_grows_with_degree(tmp_path):
    runner = ValidateRunner(str(tmp_path))
    errors = [
        max_relative_error(await runner.estimate(125, 0.0, 1, degree=degree), degree)
        for degree in (2, 3, 4, 5)
    ]
    assert all(a < b for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-3


async def test_direct_and_jacobian_agree(tmp_path):
    runner = ValidateRunner(str(tmp_path))
    jacobian = await runner.estimate(250, 0.0, 1, degree=2, method="jacobian")
    direct = await runner.estimate(250, 0.0, 1, degree=2, method="direct")
    np.testing.assert_allclose(direct, jacobian, rtol=1e-5)


async def test_small_study_writes_report(tmp_path):
    runner = ValidateRunner(
        str(tmp_path),
        grid_sizes=[100, 200],
        noise_levels=[0.0, 0.1],
        seed_counts=[1, 4],
        degrees=[2, 3],
    )
    result = await runner.run()
    assert result["passed"] is True

    report = json.loads((tmp_path / "hilbert_report.json").read_text())
    assert set(report["targets"]) == {"2", "3"}
    rows = report["rows"]
    # jacobian: 2 sigmas x 2 S x 2 grids, direct: noiseless only
    assert len(rows) == 2 * (8 + 4)
    assert not [r for r in rows if r["method"] == "direct" and r["sigma"] > 0]
    assert report["model_calls"]["loss"] > 0

    table = pd.read_csv(tmp_path / "hilbert_convergence.csv")
    assert list(table.columns[:2]) == ["degree", "method"]
    assert sorted(table["degree"].unique().tolist()) == [2, 3]
    assert sorted(table["method"].unique().tolist()) == ["direct", "jacobian"]
    assert sorted(table["T"].unique().tolist()) == [100, 200]


async def test_validate_runner_raises(tmp_path):
    runner = ValidateRunner(
        str(tmp_path), grid_sizes=[10], noise_levels=[0.0], seed_counts=[1], threshold=1e-9
    )
    with pytest.raises(ValidationFailure):
        await runner.run()


def test_unknown_method_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        ValidateRunner(str(tmp_path), methods=["jacobian", "newton"])

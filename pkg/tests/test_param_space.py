import math

import numpy as np
import pytest

from utils.errors import AxisOutOfRange, DuplicateName, NonPositiveParameter
from utils.param_space import (
    from_log,
    load_point,
    make_linear_point,
    make_point,
    perturb,
    point_from_mapping,
    save_point,
    shift,
)


def test_make_point_computes_log():
    point = make_point(["a", "b"], [1.0, math.e])
    assert point.log[0] == 0.0
    assert point.log[1] == pytest.approx(1.0, rel=1e-15)
    assert np.allclose(np.exp(point.log), point.linear, rtol=1e-12)


def test_make_point_table_default_threshold():
    point = make_point(["theta"], [2.5])
    assert round(float(point.log[0]), 4) == 0.9163


@pytest.mark.parametrize("value", [0.0, -1.0, float("nan")])
def test_make_point_rejects_non_positive(value):
    with pytest.raises(NonPositiveParameter) as excinfo:
        make_point(["a"], [value])
    assert excinfo.value.name == "a"


def test_make_point_rejects_duplicate_names():
    with pytest.raises(DuplicateName):
        make_point(["a", "a"], [1.0, 2.0])


def test_point_arrays_are_read_only():
    point = make_point(["a"], [1.0])
    with pytest.raises(ValueError):
        point.linear[0] = 2.0


def test_perturb_log_mode():
    base = make_point(["a", "b"], [1.0, 1.0])
    pair = perturb(base, 0, 0.1)
    assert pair.plus.log.tolist() == [0.1, 0.0]
    assert pair.minus.log.tolist() == [-0.1, 0.0]
    assert pair.plus.linear[0] == pytest.approx(math.exp(0.1))
    assert pair.minus.linear[0] == pytest.approx(math.exp(-0.1))
    assert pair.plus.linear[1] == 1.0
    assert base.log.tolist() == [0.0, 0.0]


def test_perturb_small_step():
    base = from_log(["a", "b"], [1.0, 2.0])
    pair = perturb(base, 1, 0.001)
    assert pair.plus.log[0] == 1.0
    assert pair.plus.log[1] == pytest.approx(2.001, abs=1e-15)


def test_perturb_axis_out_of_range():
    base = make_point(["a", "b"], [1.0, 1.0])
    with pytest.raises(AxisOutOfRange):
        perturb(base, 5, 0.1)


def test_perturb_rejects_non_positive_step():
    base = make_point(["a"], [1.0])
    with pytest.raises(ValueError):
        perturb(base, 0, 0.0)


def test_linear_point_allows_zero_and_negative_values():
    point = make_linear_point(["p0", "p1"], [0.0, -1.0])
    assert not point.log_valid
    pair = perturb(point, 1, 0.5, mode="linear")
    assert pair.plus.linear.tolist() == [0.0, -0.5]
    assert pair.minus.linear.tolist() == [0.0, -1.5]
    with pytest.raises(NonPositiveParameter):
        perturb(point, 0, 0.1, mode="log")


def test_shift_in_log_space():
    base = make_point(["a", "b"], [1.0, 1.0])
    moved = shift(base, [0.5, -0.5])
    assert moved.log.tolist() == [0.5, -0.5]


def test_point_from_mapping_respects_order():
    point = point_from_mapping({"b": 2.0, "a": 1.0}, names=["a", "b"])
    assert point.names == ("a", "b")
    with pytest.raises(ValueError):
        point_from_mapping({"a": 1.0}, names=["a", "b"])


def test_save_and_load_point_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    point = make_point(["x", "y", "z"], list(rng.uniform(0.01, 100.0, 3)))
    path = tmp_path / "point.json"
    save_point(point, path)
    assert load_point(path) == point

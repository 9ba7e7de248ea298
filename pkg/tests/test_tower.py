import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from escapelab.tower import TowerValue

finite = st.floats(min_value=0.0, max_value=1e300, allow_nan=False)


def test_canonical_levels():
    assert TowerValue.from_float(1.0) == TowerValue(0, 1.0)
    assert TowerValue.from_float(math.e).level == 1
    v = TowerValue.from_float(1e10)
    assert v.level == 3
    assert math.isclose(v.residual, math.log(math.log(math.log(1e10))))


def test_rejects_bad_residuals():
    with pytest.raises(ValueError):
        TowerValue(1, 0.5)
    with pytest.raises(ValueError):
        TowerValue(0, 3.0)
    with pytest.raises(ValueError):
        TowerValue(-1, 1.5)


def test_exp_log_inverse():
    v = TowerValue(4, 1.7)
    assert v.exp().log() == v
    assert TowerValue(0, 0.5).exp() == TowerValue(0, math.exp(0.5))


def test_from_log_beyond_double_range():
    v = TowerValue.from_log(1e5)
    assert v.log_float() == pytest.approx(1e5)
    assert v.to_float() == math.inf


def test_iterated_exponential_of_one():
    v = TowerValue.from_float(1.0)
    for _ in range(3):
        v = v.exp()
    assert v == TowerValue(3, 1.0)


@given(finite, finite)
def test_order_matches_floats(a, b):
    ta, tb = TowerValue.from_float(a), TowerValue.from_float(b)
    if a < b * (1 - 1e-12):
        assert ta < tb
    elif b < a * (1 - 1e-12):
        assert tb < ta


@given(st.floats(min_value=1e-3, max_value=1e300))
def test_round_trip(x):
    assert TowerValue.from_float(x).to_float() == pytest.approx(x, rel=1e-9)


@given(st.floats(min_value=-50, max_value=650), st.floats(min_value=-5, max_value=5))
def test_add_log_shifts_magnitude(lg, c):
    v = TowerValue.from_log(lg).add_log(c)
    assert v.log_float() == pytest.approx(lg + c, rel=1e-9, abs=1e-9)

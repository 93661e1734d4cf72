import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transition_response.errors import DomainError
from transition_response.lsv_maps import (
    MapParams,
    check_y_asymptotics,
    eval_map,
    inverse_left_branch,
    inverse_right_branch,
    left_derivative,
    lsv_branches,
    y_sequence,
)

# mpmath, 40 digits
F_08_QUARTER = 0.3935872943746293758
INV_05_07 = 0.3751045933543091806


def test_params_validation():
    p = MapParams.lsv(0.8)
    assert p.b_alpha == 2.0**0.8
    with pytest.raises(DomainError):
        MapParams.lsv(-0.1)


def test_eval_map_oracle():
    p = MapParams.lsv(0.8)
    assert eval_map(p, 0.25) == pytest.approx(F_08_QUARTER, rel=2e-16)


def test_eval_map_endpoints_and_branches():
    p = MapParams.lsv(1.0)
    assert eval_map(p, 0.0) == 0.0
    assert eval_map(p, 0.5) == 1.0
    assert eval_map(p, 1.0) == 1.0
    assert eval_map(p, 0.75) == 0.5
    with pytest.raises(DomainError):
        eval_map(p, 1.5)
    with pytest.raises(DomainError):
        eval_map(p, -1e-3)


def test_left_inverse_golden():
    # x + 2x^2 = 1/2 at alpha = 1
    p = MapParams.lsv(1.0)
    assert inverse_left_branch(p, 0.5) == pytest.approx((math.sqrt(5) - 1) / 4, rel=1e-15)
    assert inverse_left_branch(MapParams.lsv(0.5), 0.7) == pytest.approx(INV_05_07, rel=1e-15)
    assert inverse_left_branch(p, 0.0) == 0.0


def test_right_inverse():
    p = MapParams.lsv(0.7)
    y = np.linspace(0.1, 1, 10)
    np.testing.assert_allclose(eval_map(p, inverse_right_branch(p, y)), y, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.2, 1.6), st.floats(0.0, 1.0))
def test_left_inverse_round_trip(alpha, y):
    p = MapParams.lsv(alpha)
    x = inverse_left_branch(p, y)
    assert 0.0 <= x <= 0.5
    assert abs(eval_map(p, x) - y) <= 4e-16 * max(y, 1e-300) + 1e-300


def test_left_derivative_matches_difference():
    p = MapParams.lsv(0.8)
    x = np.array([0.1, 0.2, 0.4])
    h = 1e-7
    fd = (eval_map(p, x + h) - eval_map(p, x - h)) / (2 * h)
    np.testing.assert_allclose(left_derivative(p, x), fd, rtol=1e-7)


def test_branches_cover_interval():
    left, right = lsv_branches(MapParams.lsv(1.0))
    assert left.domain[1] == right.domain[0] == 0.5


def test_y_sequence_start_and_monotone():
    seq = y_sequence(MapParams.lsv(1.0), 1000)
    assert seq.values[0] == 1.0
    assert seq.values[1] == 0.5
    assert seq.values[2] == pytest.approx((math.sqrt(5) - 1) / 4, rel=1e-15)
    assert np.all(np.diff(seq.values) < 0)
    assert not seq.values.flags.writeable


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0, 1.25])
def test_y_asymptotics(alpha):
    rep = check_y_asymptotics(y_sequence(MapParams.lsv(alpha), 100_000),
                              window=(10_000, 100_000))
    assert rep.max_scaled_deviation <= 0.02
    assert rep.residual_slope < 0


def test_y_asymptotics_single_point_window():
    rep = check_y_asymptotics(y_sequence(MapParams.lsv(1.0), 100), window=(50, 50))
    assert rep.residual_slope is None

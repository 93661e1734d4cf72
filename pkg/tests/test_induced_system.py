import math

import numpy as np
import pytest

from transition_response.errors import DomainError
from transition_response.induced_system import InducedSystem, spot_check_A_conditions
from transition_response.lsv_maps import MapParams, eval_map


@pytest.fixture(scope="module")
def sys1():
    return InducedSystem(MapParams.lsv(1.0), k_max=10_000)


def test_cylinders(sys1):
    assert sys1.cylinder(1) == (0.75, 1.0)
    lo, hi = sys1.cylinder(2)
    assert hi == 0.75
    assert lo == pytest.approx(0.5 * (1 + (math.sqrt(5) - 1) / 4), rel=1e-15)
    with pytest.raises(DomainError):
        sys1.cylinder(0)


def test_branch_two_values(sys1):
    # F_2^{-1}(1) = (1 + 1/2)/2; G_2(1) = 1/2 * 1/f'(1/2) = 1/6
    assert sys1.inverse_branch_composed(2, 1.0) == 0.75
    assert sys1.weight(2, 1.0) == pytest.approx(1 / 6, rel=1e-15)
    # at x = 1/2: f_1^{-1}(1/2) = (sqrt5 - 1)/4, f'(.) = sqrt5
    assert sys1.weight(2, 0.5) == pytest.approx(1 / (2 * math.sqrt(5)), rel=1e-15)
    assert sys1.norms[1] == pytest.approx(1 / (2 * math.sqrt(5)), rel=1e-13)


def test_branch_lands_in_cylinder(sys1):
    x = np.linspace(0.5, 1.0, 9)
    for k in (1, 2, 7, 100):
        lo, hi = sys1.cylinder(k)
        z = sys1.inverse_branch_composed(k, x)
        assert np.all((z >= lo - 1e-15) & (z <= hi + 1e-15))


def test_first_return_composition(sys1):
    # F_k^{-1} followed by k forward steps of f returns to the start
    p = sys1.params
    x = np.array([0.55, 0.8, 0.99])
    z = sys1.inverse_branch_composed(5, x)
    for _ in range(5):
        z = eval_map(p, z)
    np.testing.assert_allclose(z, x, rtol=1e-12)
    assert sys1.round_trip_error(50, x) < 1e-11


def test_outside_Y(sys1):
    with pytest.raises(DomainError):
        sys1.weight(3, 0.3)


def test_residual_mass_and_bound(sys1):
    assert 0 < sys1.residual_mass(100) == pytest.approx(0.5 * sys1.yseq.values[100])
    assert sys1.truncation_bound(1000) > sys1.truncation_bound(10_000) > 0


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.25])
def test_norm_decay(alpha):
    s = InducedSystem(MapParams.lsv(alpha), k_max=10_000)
    assert s.norm_decay_slope() == pytest.approx(-(1 + 1 / alpha), abs=0.05)


def test_A_conditions_uniform():
    rep = spot_check_A_conditions(None, [0.8, 0.9, 1.0], k_range=(1, 2000), grid=9, n_k=10)
    assert max(rep.a1_max_weight.values()) == pytest.approx(0.5)
    assert all(rep.uniform.values())

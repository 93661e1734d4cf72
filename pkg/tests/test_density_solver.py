import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transition_response.density_solver import (
    apply_ruelle,
    build_operator,
    solve_density,
    to_lebesgue,
    ulam_oracle,
)
from transition_response.errors import DomainError, NonConvergence
from transition_response.induced_system import InducedSystem
from transition_response.lsv_maps import MapParams
from transition_response.orbit_sim import OrbitEnsembleConfig, run_ensemble

# regression values (grid 1024, k_max 1e4); independently confirmed by the Ulam
# oracle below to the Ulam discretization error
H_HALF = {0.8: 1.201653046813228, 1.0: 1.2481421944050584, 1.25: 1.3045923200783067}


@pytest.fixture(scope="module")
def sys1():
    return InducedSystem(MapParams.lsv(1.0), k_max=10_000)


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.25])
def test_fixed_point(alpha):
    d = solve_density(InducedSystem(MapParams.lsv(alpha), k_max=10_000))
    assert d.residual <= 1e-10
    assert d.bounds[0] > 0
    assert d.second_start_gap <= 1e-9
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert d.at_half == pytest.approx(H_HALF[alpha], rel=1e-8)
    assert d.norm_convention == "wrt_lambda_tilde"


def test_lebesgue_conversion(point1):
    d = point1.density
    rho = d.to_lebesgue()
    assert rho.at_half == 2 * d.at_half
    np.testing.assert_array_equal(to_lebesgue(d.values), 2 * d.values)
    # Lebesgue mass of Y is 1 as well
    assert math.fsum(rho.values[1:] + rho.values[:-1]) * 0.5 * rho.h == pytest.approx(1.0,
                                                                                      abs=1e-5)


def test_density_decreasing(point1):
    assert np.all(np.diff(point1.density.values) < 0)


def test_mass_additivity(point08):
    d = point08.density
    assert d.mass(0.5, 0.7) + d.mass(0.7, 1.0) == pytest.approx(d.total_mass(), rel=1e-14)
    assert d.mass_from_left(0.0) == 0.0


def test_operator_preserves_mass(sys1, point1):
    op = build_operator(sys1, 1024)
    u = np.linspace(2.0, 1.0, 1024)
    assert op.quad @ op(u) == pytest.approx(op.quad @ u, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_ruelle_linear(a, b, seed):
    sys_ = InducedSystem(MapParams.lsv(1.0), k_max=10_000)
    r = np.random.default_rng(seed)
    u, v = r.random(256), r.random(256)
    lhs = apply_ruelle(sys_, a * u + b * v)
    rhs = a * apply_ruelle(sys_, u) + b * apply_ruelle(sys_, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (abs(a) + abs(b) + 1))


def test_ruelle_positive(sys1):
    out = apply_ruelle(sys1, np.full(512, 1.0))
    assert np.all(out > 0)


def test_nonconvergence_has_trace(sys1):
    with pytest.raises(NonConvergence) as info:
        solve_density(sys1, tol=1e-14, max_iter=3)
    assert len(info.value.trace) == 3


def test_bad_tolerance(sys1):
    with pytest.raises(DomainError):
        solve_density(sys1, tol=0.0)


@pytest.mark.parametrize("alpha", [0.8, 1.25])
def test_ulam_oracle(alpha):
    d = solve_density(InducedSystem(MapParams.lsv(alpha), k_max=10_000), second_start=False)
    gaps = [ulam_oracle(MapParams.lsv(alpha), cells=c).l1_distance(d) for c in (1024, 2048)]
    assert gaps[1] <= 5e-3
    assert 1.5 <= gaps[0] / gaps[1] <= 2.5


def test_ulam_mass_and_positivity():
    u = ulam_oracle(MapParams.lsv(1.0), cells=1024)
    assert np.all(u.values > 0)
    assert math.fsum(u.values) * (u.edges[1] - u.edges[0]) * 2 == pytest.approx(1.0, abs=1e-12)
    assert u.row_sum_defect < 1e-10


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.25])
def test_induced_orbit_frequencies(alpha):
    # visits of an orbit to Y form an orbit of the induced map, so their cell
    # frequencies estimate the induced density
    d = solve_density(InducedSystem(MapParams.lsv(alpha), k_max=10_000), second_start=False)
    cfg = OrbitEnsembleConfig(alpha, 10**6, 8, seed=3, initial_law="Y")
    run = run_ensemble(cfg, (), bins=64)
    obs = run.hist[:, 32:].sum(axis=0).astype(float)
    e = np.linspace(0.5, 1.0, 33)
    exp = obs.sum() * d.mass(e[:-1], e[1:])
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    # 31 degrees of freedom: mean 31, sd sqrt(62)
    assert chi2 < 31 + 6 * math.sqrt(62)

import math

import numpy as np
import pytest

from transition_response.errors import DomainError
from transition_response.response import (
    Potential,
    PushforwardMeasure,
    build_response_curve,
    builtin_potential,
    calibrated_potential,
    one_sided_derivative,
    parse_potential,
    phy_integral,
    richardson,
    srb_integral,
    srb_integral_pushforward_oracle,
    srb_integrals,
)

S1_X = 1.21531317


def test_potential_parsing():
    p = parse_potential("x**2 + sin(pi*x)")
    x = np.array([0.0, 0.25, 0.5])
    np.testing.assert_allclose(p(x), x**2 + np.sin(np.pi * x))
    q = parse_potential({"expression": "sqrt", "eta": 0.5, "C": 1.0})
    assert q.holder_exponent == 0.5
    with pytest.raises((ValueError, SyntaxError)):
        parse_potential("__import__('os')")
    with pytest.raises(DomainError):
        parse_potential({"expression": "x", "bogus": 1})


def test_holder_data():
    for name in ("x", "x2", "sqrt", "cos2pi_m1", "const"):
        assert builtin_potential(name).holder_violation() <= 1.0 + 1e-12
    assert builtin_potential("const").is_constant


def test_shift_is_structural():
    phi = builtin_potential("x2")
    s = phi.shifted(3.5)
    x = np.linspace(0, 1, 7)
    np.testing.assert_array_equal(s.centered(x), phi.centered(x))
    assert s.value_at_zero == -3.5


def test_shift_invariance_bitwise(point1):
    phi = builtin_potential("cos2pi_m1")
    a = srb_integral(point1.density, point1.sys, phi, k_max=20_000).value
    for c in (0.3, -2.5, 1e3):
        b = srb_integral(point1.density, point1.sys, phi.shifted(c), k_max=20_000).value
        assert a == b


def test_const_potential_zero(point08):
    r = srb_integral(point08.density, point08.sys, builtin_potential("const"), k_max=10_000)
    assert r.value == 0.0 and r.bound == 0.0


def test_srb_at_one(point1, phi_x):
    r = srb_integral(point1.density, point1.sys, phi_x)
    assert r.value == pytest.approx(S1_X, rel=1e-7)
    assert r.bound < 1e-6


def test_srb_alpha_above_one_rejected(point125, phi_x):
    with pytest.raises(DomainError):
        srb_integral(point125.density, point125.sys, phi_x)


@pytest.mark.parametrize("alpha", [0.8, 1.0])
def test_oracle_equivalence(alpha, request):
    pt = request.getfixturevalue("point08" if alpha == 0.8 else "point1")
    phis = [builtin_potential(n) for n in ("x", "x2", "sqrt")]
    main = srb_integrals(pt.density, pt.sys, phis)
    m = PushforwardMeasure(pt.density, pt.sys)
    for phi, r in zip(phis, main):
        o = srb_integral_pushforward_oracle(pt.density, pt.sys, phi, measure=m)
        assert abs(r.value - o.value) <= r.bound + o.bound
        assert r.bound + o.bound <= 1e-3 * abs(r.value)


def test_pushforward_density_singularity(point08):
    # rho(z) ~ h(1/2) / (b z^alpha) as z -> 0
    m = PushforwardMeasure(point08.density, point08.sys)
    z = np.array([1e-6, 1e-8])
    b = point08.sys.params.b_alpha
    ratio = m.rho(z) * b * z**0.8 / point08.density.at_half
    np.testing.assert_allclose(ratio, 1.0, rtol=2e-2)


def test_phy_integral(point08, phi_x):
    s = srb_integral(point08.density, point08.sys, phi_x)
    v = phy_integral(phi_x, s, point08.kac, 0.8)
    assert v == s.value / point08.kac.total
    assert 0 < v < 0.5
    assert phy_integral(builtin_potential("cos2pi"), None, None, 1.25) == 1.0


def test_richardson_exact_on_quadratic():
    h = 2.0 ** -np.arange(4, 9)
    vals = 3.0 + 2.0 * h + 5.0 * h**2
    assert richardson(vals, 2.0, 2)[-1][-1] == pytest.approx(3.0, abs=1e-13)


@pytest.fixture(scope="module")
def short_curves():
    grid = [1 - 2.0**-j for j in range(6, 9)]
    return build_response_curve([builtin_potential("x"), builtin_potential("const")], grid,
                                srb_k_max=50_000)


def test_curve_kac_rearrangement(short_curves):
    c = short_curves[0]
    np.testing.assert_array_equal(c.r_phy, c.r_srb / c.kac)
    np.testing.assert_array_equal(c.phy, c.phi0 + c.r_phy)


def test_curve_monotone_toward_one(short_curves):
    c = short_curves[0]
    assert np.all(np.diff(c.r_srb) > 0) and c.r_srb[-1] < c.srb_at_one
    assert np.all(np.diff(c.r_phy) < 0)


def test_derivative_matches_corrected_target(short_curves):
    est = one_sided_derivative(short_curves[0])
    assert est.relative_gap <= 0.05
    # against the constant with the extra factor 1/2 the gap is one half
    assert est.relative_gap_half_slope == pytest.approx(0.5, abs=0.02)


def test_const_curve_is_zero(short_curves):
    c = short_curves[1]
    assert np.all(c.derivative_estimates == 0.0)
    assert c.analytic_target == 0.0


def test_single_point_flagged():
    c = build_response_curve(builtin_potential("x"), [0.9375], srb_k_max=20_000)
    est = one_sided_derivative(c)
    assert est.flag == "single_point_no_extrapolation"
    assert est.richardson_extrapolate is None


def test_non_geometric_grid_rejected():
    c = build_response_curve(builtin_potential("x"), [0.9, 0.95, 0.99], srb_k_max=20_000)
    with pytest.raises(DomainError):
        one_sided_derivative(c)


def test_calibrated_potential_has_zero_integral(point1):
    x, x2 = builtin_potential("x"), builtin_potential("x2")
    sx, sx2 = srb_integrals(point1.density, point1.sys, [x, x2])
    phi = calibrated_potential(sx.value / sx2.value)
    s = srb_integral(point1.density, point1.sys, phi)
    assert abs(s.value) <= 1e-6 * abs(sx.value)


def test_custom_potential_callable():
    p = Potential(lambda x: np.exp(x), 1.0, math.e, "exp")
    assert p.value_at_zero == 1.0

import math

import numpy as np
import pytest

from transition_response.errors import DomainError, IllConditionedFit
from transition_response.lsv_maps import y_sequence
from transition_response.response import PushforwardMeasure
from transition_response.tail_analysis import (
    EULER_GAMMA,
    abel_identity,
    abel_identity_cylinders,
    check_X3_bounds,
    fit_power_law,
    fit_tail,
    hurwitz_zeta,
    kac_sum,
    tail_mass,
    zeta,
)

# mpmath, 40 digits
ZETA_15 = 2.612375348685488343
HZ_25_37 = 0.1147581421474172367
HZ_125_1005 = 1.264909417082862836
ZETA_1001 = 1000.5772884759014927


def test_zeta_values():
    assert abs(zeta(2.0) - math.pi**2 / 6) <= 1e-12
    assert zeta(4.0) == pytest.approx(math.pi**4 / 90, rel=1e-15)
    assert zeta(1.5) == pytest.approx(ZETA_15, rel=1e-15)
    assert hurwitz_zeta(2.5, 3.7) == pytest.approx(HZ_25_37, rel=1e-15)
    assert hurwitz_zeta(1.25, 100.5) == pytest.approx(HZ_125_1005, rel=1e-14)
    assert zeta(1.001) == pytest.approx(ZETA_1001, rel=1e-12)


def test_zeta_pole():
    s = np.linspace(1.0005, 1.1, 20)
    prod = (s - 1) * zeta(s)
    assert np.all(np.abs(prod - 1) <= 2 * (s - 1))
    # next order is the Euler constant
    assert (1.001 - 1) * zeta(1.001) == pytest.approx(1 + EULER_GAMMA * 1e-3, abs=1e-6)


def test_zeta_domain():
    with pytest.raises(DomainError):
        zeta(0.5)
    with pytest.raises(DomainError):
        hurwitz_zeta(2.0, 0.0)


def test_tail_mass_basics(point08):
    yseq = point08.sys.yseq
    t = tail_mass(point08.density, yseq, np.arange(50))
    assert t[0] == 1.0
    assert np.all(np.diff(t) < 0)
    with pytest.raises(DomainError):
        tail_mass(point08.density, yseq, -1)


def test_power_law_fit_exact():
    n = np.geomspace(10, 1000, 30)
    c, v, rms = fit_power_law(n, 3.0 * n**-1.7)
    assert c == pytest.approx(3.0, rel=1e-12)
    assert v == pytest.approx(1.7, rel=1e-12)
    assert rms < 1e-12


def test_power_law_fit_refuses_narrow_window():
    n = np.linspace(100, 200, 30)
    with pytest.raises(IllConditionedFit):
        fit_power_law(n, n**-1.0)
    with pytest.raises(IllConditionedFit):
        fit_tail(None, None, (100, 100))


@pytest.mark.parametrize("alpha", [0.6, 0.8, 1.0, 1.25])
def test_tail_exponent_and_constant(alpha):
    from transition_response.response import alpha_point

    pt = alpha_point(alpha)
    prof = fit_tail(pt.density, y_sequence(pt.sys.params, 100_000), (1000, 100_000))
    assert prof.fitted_exponent == pytest.approx(1 / alpha, rel=0.02)
    # leading constant h(1/2)/(alpha b)^(1/alpha), approached from above
    assert 1.0 < prof.fitted_c / prof.predicted_c < 1.03
    assert prof.predicted_c_half_slope == pytest.approx(0.5 * prof.predicted_c, rel=1e-15)
    assert prof.second_order_slope < 0


def test_x3_bounds(point08):
    prof = fit_tail(point08.density, point08.sys.yseq, (100, 10_000))
    rep = check_X3_bounds(prof, D=10.0)
    assert rep.holds
    assert 1.0 <= rep.min_D_scaled < 1.1


def test_kac_sum_convergent(point08):
    k = point08.kac
    assert k.finite
    assert k.total == pytest.approx(4.6835037607, rel=1e-9)
    assert k.bound < 1e-4
    # the analytic tail started at 1e4 agrees with the one started at 1e3
    k2 = kac_sum(point08.density, point08.sys.yseq, n_max=1000)
    assert k2.total == pytest.approx(k.total, abs=k.bound + k2.bound)


def test_kac_matches_pushforward_mass(point08):
    # nu([0,1]) from the pushforward density vs the Kac sum
    m = PushforwardMeasure(point08.density, point08.sys)
    assert m.mass(0.0, 1.0) == pytest.approx(point08.kac.total, rel=1e-4)


def test_kac_divergent(point1):
    k = point1.kac
    assert not k.finite and k.total is None
    # partial sums grow like c_1 log N
    assert k.growth_log_slope == pytest.approx(0.624, rel=0.03)


def test_abel_exact(point08):
    t = tail_mass(point08.density, point08.sys.yseq, np.arange(10_001))
    assert abel_identity(t).ulps <= 4
    chk = abel_identity_cylinders(point08.density, point08.sys, 10_000)
    assert chk.ulps < 1e4

"""Return-time tails, their power-law fit, zeta functions and Kac sums.

The tail ``t_n = nu~(tau > n)`` is the measure of ``[1/2, (1 + y_n)/2]`` under
the induced invariant measure, so it is read straight off the density.  Near
1/2 the density is ``h(1/2)`` w.r.t. ``lambda~ = 2 dx``, which gives

    t_n ~ h(1/2) * y_n ~ h(1/2) (alpha b n)^{-1/alpha}.

Because ``lambda~`` has total mass 1 on an interval of length 1/2, the constant
carries no extra factor 1/2; :func:`predicted_tail_constant` returns it and
:func:`predicted_tail_constant_half_slope` returns the variant that multiplies in
the slope 1/2 of the right inverse branch on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density_solver import DensityApprox
from .errors import DomainError, IllConditionedFit
from .lsv_maps import YSequence

__all__ = [
    "TailProfile",
    "KacResult",
    "AbelCheck",
    "X3Report",
    "tail_mass",
    "fit_power_law",
    "fit_tail",
    "predicted_tail_constant",
    "predicted_tail_constant_half_slope",
    "zeta",
    "hurwitz_zeta",
    "kac_sum",
    "abel_identity",
    "abel_identity_cylinders",
    "check_X3_bounds",
    "EULER_GAMMA",
]

EULER_GAMMA = 0.57721566490153286061

# B_2 .. B_12
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730)


# --------------------------------------------------------------------------
# zeta


def hurwitz_zeta(s, a, n_direct: int = 12):
    """Hurwitz zeta ``sum_{k>=0} (k + a)^{-s}`` for real ``s > 1``, ``a > 0``.

    Euler-Maclaurin after ``n_direct`` explicit terms, Bernoulli numbers through
    B_12.  Vectorized over ``a`` (and ``s`` by broadcasting).

    Raises
    ------
    DomainError
        For ``s <= 1`` or ``a <= 0``.
    """
    s_arr = np.asarray(s, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    if np.any(s_arr <= 1.0) or np.any(~np.isfinite(s_arr)):
        raise DomainError("zeta needs real s > 1")
    if np.any(a_arr <= 0.0):
        raise DomainError("Hurwitz shift must be positive")
    s_b, a_b = np.broadcast_arrays(s_arr, a_arr)
    total = np.zeros(s_b.shape)
    for k in range(n_direct):
        total += (k + a_b) ** (-s_b)
    x = n_direct + a_b
    total += x ** (1.0 - s_b) / (s_b - 1.0) + 0.5 * x ** (-s_b)
    # rising factorial s (s+1) ... (s+2j-2) / (2j)!
    fac = s_b.copy()
    xp = x ** (-s_b - 1.0)
    for j, B in enumerate(_BERNOULLI, start=1):
        total += B / math.factorial(2 * j) * fac * xp
        fac = fac * (s_b + 2 * j - 1) * (s_b + 2 * j)
        xp = xp / (x * x)
    return float(total) if total.ndim == 0 else total


def zeta(s):
    """Riemann zeta for real ``s > 1``."""
    return hurwitz_zeta(s, 1.0)


# --------------------------------------------------------------------------
# exact-sum helpers


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


_SPLIT = 134217729.0  # 2^27 + 1


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


# --------------------------------------------------------------------------


def predicted_tail_constant(h_half: float, alpha: float, b: float) -> float:
    """Leading tail constant ``h(1/2) / (alpha b)^{1/alpha}``.

    ``h`` is the lambda~-density; in Lebesgue terms this is
    ``rho(1/2) / (2 (alpha b)^{1/alpha})``.
    """
    return h_half / (alpha * b) ** (1.0 / alpha)


def predicted_tail_constant_half_slope(h_half: float, alpha: float, b: float) -> float:
    """``h(1/2) * (1/2) / (alpha b)^{1/alpha}``, i.e. ``rho(1/2)/(4 (alpha b)^{1/alpha})``.

    This multiplies in the slope of the right inverse branch but drops the factor
    2 between ``lambda~`` and Lebesgue measure, so it is half the true constant.
    Kept for comparison.
    """
    return 0.5 * h_half / (alpha * b) ** (1.0 / alpha)


def tail_mass(density: DensityApprox, yseq: YSequence, n):
    """``nu~(tau > n)``, the measure of ``[1/2, (1 + y_n)/2]``.

    Exact integral of the interpolated density.  ``n = 0`` gives exactly 1.
    """
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or np.any(n_arr > yseq.n_max):
        raise DomainError(f"n must lie in [0, {yseq.n_max}]")
    vals = density.mass_from_left(0.5 * yseq.values[n_arr])
    vals = np.where(n_arr == 0, 1.0, vals)
    return float(vals) if n_arr.ndim == 0 else vals


@dataclass(frozen=True)
class TailProfile:
    """Tail masses over a set of n with a log-log power-law fit.

    ``fitted_c, fitted_exponent`` describe ``t_n ~ c n^{-v}`` over ``fit_window``;
    ``fit_residual`` is the RMS log residual.  ``second_order_slope`` is the
    log-log slope of ``|t_n / (c_pred n^{-1/alpha}) - 1|``, the decay of the
    relative correction to the leading term.
    """

    alpha: float
    n_values: np.ndarray = field(repr=False)
    tail_masses: np.ndarray = field(repr=False)
    fitted_c: float
    fitted_exponent: float
    fit_window: tuple
    fit_residual: float
    second_order_slope: float | None = None
    predicted_c: float | None = None
    predicted_c_half_slope: float | None = None
    h_half: float | None = None

    def model(self, n):
        return self.fitted_c * np.asarray(n, dtype=float) ** (-self.fitted_exponent)


def fit_power_law(n, t, min_points: int = 20, min_ratio: float = 4.0):
    """OLS fit of ``log t = log c - v log n``.

    Returns
    -------
    c, v, rms : float
        Prefactor, exponent and RMS of the log residual.

    Raises
    ------
    IllConditionedFit
        If there are fewer than ``min_points`` distinct n or ``max n / min n`` is
        below ``min_ratio``.
    """
    n = np.asarray(n, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.unique(n).size < min_points:
        raise IllConditionedFit(f"need at least {min_points} distinct points")
    if n.min() <= 0 or n.max() / n.min() < min_ratio:
        raise IllConditionedFit("window too narrow for a log-log fit")
    if np.any(t <= 0):
        raise IllConditionedFit("non-positive values in the fit window")
    X = np.column_stack([np.ones_like(n), np.log(n)])
    coef, *_ = np.linalg.lstsq(X, np.log(t), rcond=None)
    resid = np.log(t) - X @ coef
    return float(np.exp(coef[0])), float(-coef[1]), float(np.sqrt(np.mean(resid**2)))


def fit_tail(density: DensityApprox, yseq: YSequence, n_window=(100, 10_000),
             n_points: int = 40) -> TailProfile:
    """Tail profile on a log-spaced window and its power-law fit."""
    lo, hi = int(n_window[0]), int(n_window[1])
    if lo < 1 or hi <= lo:
        raise IllConditionedFit(f"empty or inverted window {n_window}")
    if hi > yseq.n_max:
        raise DomainError(f"window end {hi} beyond y-sequence length {yseq.n_max}")
    n = np.unique(np.geomspace(lo, hi, n_points).round().astype(int))
    t = tail_mass(density, yseq, n)
    c, v, rms = fit_power_law(n, t)
    params = yseq.params
    a, b = params.alpha, params.b_alpha
    cp = predicted_tail_constant(density.at_half, a, b)
    rel = np.abs(t * n ** (1.0 / a) / cp - 1.0)
    slope = None
    if np.all(rel > 0):
        slope = float(np.polyfit(np.log(n), np.log(rel), 1)[0])
    return TailProfile(
        alpha=a,
        n_values=n,
        tail_masses=t,
        fitted_c=c,
        fitted_exponent=v,
        fit_window=(lo, hi),
        fit_residual=rms,
        second_order_slope=slope,
        predicted_c=cp,
        predicted_c_half_slope=predicted_tail_constant_half_slope(density.at_half, a, b),
        h_half=density.at_half,
    )


# --------------------------------------------------------------------------
# Kac sums


@dataclass(frozen=True)
class KacResult:
    """Sum of tail masses ``sum_{k>=0} nu~(tau > k)``.

    For ``alpha < 1`` ``total = partial + tail_correction`` approximates the
    return-time integral and ``bound`` estimates the error of the analytic tail.
    For ``alpha >= 1`` the sum diverges; ``total`` is None and the growth of the
    partial sums is reported instead.
    """

    alpha: float
    n_max: int
    partial: float
    tail_correction: float | None
    total: float | None
    bound: float | None
    finite: bool
    growth_log_slope: float | None = None
    growth_exponent: float | None = None


def _analytic_tail(density, yseq, N):
    """``sum_{n>N} t_n`` with ``y_n^{-alpha} ~ y_N^{-alpha} + alpha b (n - N)``.

    On the first grid interval the mass is a polynomial in ``y/2`` so each power
    sums to a Hurwitz zeta value.
    """
    p = yseq.params
    a, b = p.alpha, p.b_alpha
    yN = yseq.values[N]
    if 0.5 * yN > density.h:
        raise DomainError("tail start lies beyond the first grid interval")
    shift = 1.0 + yN ** (-a) / (a * b)
    coeffs = density.polynomial_near_half()
    total = 0.0
    for q, c in enumerate(coeffs, start=1):
        total += c * 0.5**q * (a * b) ** (-q / a) * hurwitz_zeta(q / a, shift)
    return total


def kac_sum(density: DensityApprox, yseq: YSequence, n_max: int | None = None) -> KacResult:
    """Kac sum of the tail masses with analytic tail for ``alpha < 1``.

    Parameters
    ----------
    density : DensityApprox
    yseq : YSequence
    n_max : int, optional
        Number of explicit terms, defaults to the y-sequence length.
    """
    N = yseq.n_max if n_max is None else int(n_max)
    if not 2 <= N <= yseq.n_max:
        raise DomainError(f"n_max must lie in [2, {yseq.n_max}]")
    a = yseq.params.alpha
    t = tail_mass(density, yseq, np.arange(N + 1))
    partial = math.fsum(t)
    if a < 1.0:
        tail = _analytic_tail(density, yseq, N)
        # same construction started at N/2 gives a conservative error estimate
        half = N // 2
        alt = math.fsum(t[: half + 1]) + _analytic_tail(density, yseq, half)
        total = partial + tail
        return KacResult(a, N, partial, tail, total, abs(alt - total), True)
    S = np.cumsum(t)
    n = np.unique(np.geomspace(max(10, N // 100), N, 40).round().astype(int))
    log_slope = float(np.polyfit(np.log(n), S[n], 1)[0])
    growth = float(np.polyfit(np.log(n), np.log(S[n]), 1)[0])
    return KacResult(a, N, partial, None, None, None, False, log_slope, growth)


# --------------------------------------------------------------------------
# Abel summation


@dataclass(frozen=True)
class AbelCheck:
    """Both sides of ``sum_{k<=N} k p_k + N t_N = sum_{k<N} t_k``."""

    lhs: float
    rhs: float
    ulps: float


def _ulps(a, b):
    scale = max(abs(a), abs(b), np.finfo(float).tiny)
    return abs(a - b) / np.spacing(scale)


def abel_identity(tail_masses) -> AbelCheck:
    """Summation by parts between cylinder masses and tail masses, exactly.

    ``p_k = t_{k-1} - t_k`` is carried as an exact two-term expansion and every
    product ``k p_k`` is split exactly, so both sides are correctly rounded values
    of the same real number.
    """
    t = np.asarray(tail_masses, dtype=float)
    N = t.size - 1
    k = np.arange(1, N + 1, dtype=float)
    hi, lo = _two_sum(t[:-1], -t[1:])
    p1, e1 = _two_prod(k, hi)
    p2, e2 = _two_prod(k, lo)
    q1, f1 = _two_prod(np.array([float(N)]), t[-1:])
    lhs = math.fsum(np.concatenate([p1, e1, p2, e2, q1, f1]))
    rhs = math.fsum(t[:-1])
    return AbelCheck(lhs, rhs, _ulps(lhs, rhs))


def abel_identity_cylinders(density: DensityApprox, sys, N: int) -> AbelCheck:
    """Same identity with ``p_k`` integrated directly over the cylinders ``C_k``."""
    y = sys.yseq.values[: N + 1]
    tails = density.mass_from_left(0.5 * y)
    tails[0] = 1.0
    lo = 0.5 * (1.0 + y[1:])
    hi = 0.5 * (1.0 + y[:-1])
    p = density.mass(lo, hi)
    k = np.arange(1, N + 1)
    lhs = math.fsum(k * p) + N * tails[-1]
    rhs = math.fsum(tails[:-1])
    return AbelCheck(lhs, rhs, _ulps(lhs, rhs))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class X3Report:
    """Two-sided comparability of the tail with ``n^{-v}`` over the profile window.

    ``min_D_raw`` is the smallest D with ``D^{-1} n^{-(v+u)} <= t_n <= D n^{-(v-u)}``;
    ``min_D_scaled`` is the same after dividing by the fitted constant.
    """

    alpha: float
    exponent: float
    u: float
    min_D_raw: float
    min_D_scaled: float
    D: float | None
    holds: bool | None


def check_X3_bounds(profile: TailProfile, D: float | None = None, u_func=None,
                    exponent: float | None = None) -> X3Report:
    """Smallest comparability constant for the tail profile.

    Parameters
    ----------
    profile : TailProfile
    D : float, optional
        If given, ``holds`` reports whether this D works.
    u_func : callable, optional
        ``alpha -> u(alpha)``, slack in the exponent; default 0.
    exponent : float, optional
        Defaults to ``1/alpha``.
    """
    v = 1.0 / profile.alpha if exponent is None else float(exponent)
    u = 0.0 if u_func is None else float(u_func(profile.alpha))
    n = profile.n_values.astype(float)
    t = profile.tail_masses
    upper = t * n ** (v - u)
    lower = t * n ** (v + u)
    d_raw = float(max(upper.max(), 1.0 / lower.min()))
    c = profile.fitted_c
    d_scaled = float(max((upper / c).max(), c / lower.min()))
    holds = None if D is None else bool(D >= d_raw)
    return X3Report(profile.alpha, v, u, d_raw, d_scaled, D, holds)

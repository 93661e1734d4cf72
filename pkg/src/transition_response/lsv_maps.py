"""The LSV intermittent map family, its branches and the left-branch backward orbit.

The map is

    f(x) = x + b x^(1+alpha)   on [0, 1/2],   b = 2^alpha,
    f(x) = 2x - 1              on (1/2, 1].

Everything here is plain double precision.  The left branch is evaluated as
``x + x*(b*x**alpha)`` so that near the neutral fixed point the small increment
is formed with full relative accuracy before the single rounding of the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "MapParams",
    "Branch",
    "YSequence",
    "YAsymptoticsReport",
    "eval_map",
    "left_derivative",
    "inverse_left_branch",
    "inverse_right_branch",
    "lsv_branches",
    "y_sequence",
    "check_y_asymptotics",
]

TAU_INV = 1e-14


@dataclass(frozen=True)
class MapParams:
    """Parameters of one member of the map family.

    Parameters
    ----------
    alpha : float
        Order of tangency at the neutral fixed point.
    b_alpha : float
        Coefficient of the leading nonlinear term of the left branch.
    epsilon : float
        Second-order exponent in the derivative expansion, ``0 < epsilon < alpha``.
    """

    alpha: float
    b_alpha: float
    epsilon: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.b_alpha > 0:
            raise DomainError(f"b_alpha must be positive, got {self.b_alpha}")
        if not 0 < self.epsilon < self.alpha:
            raise DomainError(f"need 0 < epsilon < alpha, got {self.epsilon}")

    @classmethod
    def lsv(cls, alpha: float, epsilon: float | None = None) -> "MapParams":
        """LSV instance with ``b_alpha = 2**alpha``."""
        alpha = float(alpha)
        if epsilon is None:
            epsilon = alpha / 2
        return cls(alpha=alpha, b_alpha=2.0**alpha, epsilon=float(epsilon))


@dataclass(frozen=True)
class Branch:
    """One monotone branch of an interval map.

    ``forward``, ``derivative``, ``second_derivative`` and ``inverse`` all accept
    scalars or numpy arrays.
    """

    index: int
    domain: tuple[float, float]
    forward: Callable
    derivative: Callable
    second_derivative: Callable
    inverse: Callable


# --------------------------------------------------------------------------
# scalar kernels shared with the numba loops in other modules


@numba.njit(cache=True)
def _f1(x, alpha, b):
    return x + x * (b * x**alpha)


@numba.njit(cache=True)
def _df1(x, alpha, b):
    return 1.0 + b * (1.0 + alpha) * x**alpha


@numba.njit(cache=True)
def _inv1(y, alpha, b):
    """Root of x + b x^(1+alpha) = y on [0, 1/2], bracketed Newton.

    Returns -1.0 if the iteration cap is hit, which callers turn into an error.
    """
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 0.5
    ya = y**alpha
    if b * ya < 1e-17:
        # the correction term is below double precision (and y^alpha may underflow)
        return y / (1.0 + b * ya)
    lo = y / (1.0 + b * ya)
    hi = y / (1.0 + b * lo**alpha)
    if hi > 0.5:
        hi = 0.5
    # asymptotic guess y^-alpha + alpha b, very good for small y
    x = (1.0 / ya + alpha * b) ** (-1.0 / alpha)
    if not (lo <= x <= hi):
        x = 0.5 * (lo + hi)
    for _ in range(100):
        xa = x**alpha
        g = x + x * (b * xa) - y
        if g > 0.0:
            hi = x
        elif g < 0.0:
            lo = x
        else:
            return x
        d = 1.0 + b * (1.0 + alpha) * xa
        xn = x - g / d
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 2.2e-16 * xn or hi - lo <= 2.2e-16 * hi:
            return xn
        x = xn
    return -1.0


@numba.njit(cache=True)
def _inv1_array(y, alpha, b):
    out = np.empty_like(y)
    for i in range(y.size):
        out[i] = _inv1(y[i], alpha, b)
    return out


@numba.njit(cache=True)
def _y_loop(alpha, b, n_max):
    y = np.empty(n_max + 1)
    y[0] = 1.0
    for n in range(1, n_max + 1):
        y[n] = _inv1(y[n - 1], alpha, b)
    return y


# --------------------------------------------------------------------------


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("argument outside [0, 1]")
    return x


def eval_map(params: MapParams, x):
    """Evaluate the map at ``x`` (scalar or array).

    Parameters
    ----------
    params : MapParams
    x : float or array_like
        Points in [0, 1].

    Returns
    -------
    float or ndarray
        ``x + b x^(1+alpha)`` on the left half, ``2x - 1`` on the right half.
    """
    xs = _check_unit(x)
    a, b = params.alpha, params.b_alpha
    left = xs <= 0.5
    xl = np.where(left, xs, 0.0)
    out = np.where(left, xl + xl * (b * xl**a), 2.0 * xs - 1.0)
    # rounding past 1 by a few ulp is clamped, anything larger is a real error
    over = out > 1.0
    if np.any(over):
        if np.any(out[over] > 1.0 + 4 * np.finfo(float).eps):
            raise DomainError("map value exceeds 1 beyond rounding")
        out = np.minimum(out, 1.0)
    return float(out) if np.ndim(x) == 0 else out


def left_derivative(params: MapParams, x):
    """Derivative ``1 + b (1+alpha) x^alpha`` of the left branch."""
    xs = np.asarray(x, dtype=float)
    out = 1.0 + params.b_alpha * (1.0 + params.alpha) * xs**params.alpha
    return float(out) if np.ndim(x) == 0 else out


def inverse_left_branch(params: MapParams, y):
    """Inverse of the left branch, mapping [0, 1] onto [0, 1/2].

    Bracketed Newton with bisection fallback, converged to relative machine
    precision (well inside the absolute tolerance ``TAU_INV``).

    Raises
    ------
    DomainError
        If ``y`` is outside [0, 1].
    ConvergenceError
        If the root finder fails, which would indicate a bug.
    """
    ys = _check_unit(y)
    out = _inv1_array(np.atleast_1d(ys).ravel(), params.alpha, params.b_alpha)
    if np.any(out < 0.0):
        raise ConvergenceError("left-branch inversion did not converge")
    if np.ndim(y) == 0:
        return float(out[0])
    return out.reshape(ys.shape)


def inverse_right_branch(params: MapParams, y):
    """Inverse ``(1 + y)/2`` of the right branch."""
    ys = _check_unit(y)
    out = 0.5 * (1.0 + ys)
    return float(out) if np.ndim(y) == 0 else out


def lsv_branches(params: MapParams) -> tuple[Branch, Branch]:
    """The two branches of the LSV map as :class:`Branch` records."""
    a, b = params.alpha, params.b_alpha

    def d2(x):
        x = np.asarray(x, dtype=float)
        return b * (1.0 + a) * a * x ** (a - 1.0)

    left = Branch(
        index=1,
        domain=(0.0, 0.5),
        forward=lambda x: eval_map(params, np.minimum(x, 0.5)),
        derivative=lambda x: left_derivative(params, x),
        second_derivative=d2,
        inverse=lambda y: inverse_left_branch(params, y),
    )
    right = Branch(
        index=2,
        domain=(0.5, 1.0),
        forward=lambda x: 2.0 * np.asarray(x, dtype=float) - 1.0,
        derivative=lambda x: np.full(np.shape(x), 2.0) if np.ndim(x) else 2.0,
        second_derivative=lambda x: np.zeros(np.shape(x)) if np.ndim(x) else 0.0,
        inverse=lambda y: inverse_right_branch(params, y),
    )
    return left, right


@dataclass(frozen=True)
class YSequence:
    """Backward orbit of 1 under the left branch, ``y_0 = 1``."""

    params: MapParams
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_max(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def __getitem__(self, n):
        return self.values[n]


def y_sequence(params: MapParams, n_max: int) -> YSequence:
    """Compute ``y_0 = 1, y_n = f_1^{-1}(y_{n-1})`` for ``n <= n_max``."""
    n_max = int(n_max)
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    y = _y_loop(params.alpha, params.b_alpha, n_max)
    if np.any(y < 0.0):
        raise ConvergenceError("left-branch inversion did not converge")
    return YSequence(params, y)


@dataclass(frozen=True)
class YAsymptoticsReport:
    """Deviation of ``y_n (alpha b n)^{1/alpha}`` from 1 over a window."""

    window: tuple[int, int]
    max_scaled_deviation: float
    residual_slope: float | None
    n_points: int


def check_y_asymptotics(
    seq: YSequence, params: MapParams | None = None, window=None, n_fit: int = 40
) -> YAsymptoticsReport:
    """Compare the y-sequence with its leading asymptotic ``(alpha b n)^{-1/alpha}``.

    Parameters
    ----------
    seq : YSequence
    params : MapParams, optional
        Defaults to ``seq.params``.
    window : (int, int), optional
        Inclusive n-range; defaults to ``[n_max/10, n_max]``.
    n_fit : int
        Number of log-spaced points used for the slope fit of the residual.

    Returns
    -------
    YAsymptoticsReport
        ``residual_slope`` is the log-log slope of the relative deviation
        against n, or None when the window holds a single point.
    """
    params = params or seq.params
    a, b = params.alpha, params.b_alpha
    if window is None:
        window = (max(1, seq.n_max // 10), seq.n_max)
    lo, hi = int(window[0]), int(window[1])
    if not 1 <= lo <= hi <= seq.n_max:
        raise DomainError(f"window {window} outside [1, {seq.n_max}]")
    n = np.arange(lo, hi + 1)
    dev = np.abs(seq.values[lo : hi + 1] * (a * b * n) ** (1.0 / a) - 1.0)
    slope = None
    if hi > lo:
        pts = np.unique(np.geomspace(lo, hi, min(n_fit, hi - lo + 1)).round().astype(int))
        d = dev[pts - lo]
        ok = d > 0
        if ok.sum() >= 2:
            slope = float(np.polyfit(np.log(pts[ok]), np.log(d[ok]), 1)[0])
    return YAsymptoticsReport((lo, hi), float(dev.max()), slope, n.size)

"""First-return structure of the LSV map over Y = [1/2, 1].

A point of Y whose first return time is k leaves through the right branch and
then spends k - 1 steps climbing out of [0, 1/2] along the left branch.  The
inverse branch of the induced map on that cylinder is

    F_k^{-1}(x) = (1 + f_1^{-(k-1)}(x)) / 2,

and its weight is G_k(x) = |(F_k^{-1})'(x)| = (f_1^{-(k-1)})'(x) / 2, built from
the backward orbit by the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError
from .lsv_maps import MapParams, YSequence, _df1, _f1, _inv1, y_sequence

__all__ = ["InducedSystem", "AConditionReport", "spot_check_A_conditions"]


@numba.njit(cache=True)
def _backward(x, alpha, b, steps):
    """Apply the left inverse ``steps`` times; return points and derivatives."""
    n = x.size
    z = x.copy()
    d = np.ones(n)
    for i in range(n):
        zi = z[i]
        di = 1.0
        for _ in range(steps):
            zi = _inv1(zi, alpha, b)
            di /= _df1(zi, alpha, b)
        z[i] = zi
        d[i] = di
    return z, d


@numba.njit(cache=True)
def _backward_ratios(x, alpha, b, steps):
    """Backward orbit with the chain-rule ratios phi''/phi' and phi'''/phi'."""
    n = x.size
    z = x.copy()
    d = np.ones(n)
    r2 = np.zeros(n)
    r3 = np.zeros(n)
    c1 = b * (1.0 + alpha)
    for i in range(n):
        zi = z[i]
        di = 1.0
        a2 = 0.0
        a3 = 0.0
        for _ in range(steps):
            w = _inv1(zi, alpha, b)
            fp = 1.0 + c1 * w**alpha
            fpp = c1 * alpha * w ** (alpha - 1.0) if w > 0 else 0.0
            fppp = c1 * alpha * (alpha - 1.0) * w ** (alpha - 2.0) if w > 0 else 0.0
            q2 = -fpp / (fp * fp)
            q3 = -fppp / fp**3 + 3.0 * fpp * fpp / fp**4
            # order matters: a3 uses the previous a2
            a3 = q3 * di * di + 3.0 * q2 * di * a2 + a3
            a2 = q2 * di + a2
            di /= fp
            zi = w
        z[i] = zi
        d[i] = di
        r2[i] = a2
        r3[i] = a3
    return z, d, r2, r3


@numba.njit(cache=True)
def _forward_power(x, alpha, b, k):
    """Apply the full map k times (used for round-trip checks)."""
    out = x.copy()
    for i in range(x.size):
        v = x[i]
        for _ in range(k):
            if v <= 0.5:
                v = _f1(v, alpha, b)
            else:
                v = 2.0 * v - 1.0
        out[i] = v
    return out


def _as_y_points(x):
    xs = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xs)) or np.any(xs < 0.5) or np.any(xs > 1.0):
        raise DomainError("points must lie in Y = [1/2, 1]")
    return xs


@dataclass(frozen=True, eq=False)
class InducedSystem:
    """Induced map over Y, truncated at return time ``k_max``.

    Parameters
    ----------
    params : MapParams
    k_max : int
        Truncation index for operator sums.
    n_max : int, optional
        Length of the cached y-sequence, at least ``k_max``.

    Attributes
    ----------
    yseq : YSequence
    norms : ndarray
        ``norms[k-1] = sup_Y G_k = G_k(1/2)`` for k = 1..n_max.  The sup sits at
        the left end because the backward iterates of the left branch are concave.
    tail_bound_constant : float
        ``D_1 = max_k norms_k k^(1 + 1/alpha)`` over k <= k_max.
    """

    params: MapParams
    k_max: int = 10_000
    n_max: int | None = None
    yseq: YSequence = field(init=False, repr=False)
    norms: np.ndarray = field(init=False, repr=False)
    tail_bound_constant: float = field(init=False)

    def __post_init__(self):
        if self.k_max < 2:
            raise DomainError("k_max must be at least 2")
        n_max = max(self.k_max, self.n_max or 0) + 1
        object.__setattr__(self, "n_max", n_max)
        yseq = y_sequence(self.params, n_max)
        object.__setattr__(self, "yseq", yseq)
        a, b = self.params.alpha, self.params.b_alpha
        y = yseq.values
        # G_k(1/2) = 1/2 * prod_{m=2}^{k} 1/f'(y_m)
        logs = -np.log1p(b * (1.0 + a) * y[2:] ** a)
        norms = 0.5 * np.exp(np.concatenate(([0.0], np.cumsum(logs))))
        norms.setflags(write=False)
        object.__setattr__(self, "norms", norms)
        k = np.arange(1, self.k_max + 1)
        d1 = float(np.max(norms[: self.k_max] * k ** (1.0 + 1.0 / a)))
        object.__setattr__(self, "tail_bound_constant", d1)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    # -- single-k objects ---------------------------------------------------

    def cylinder(self, k: int) -> tuple[float, float]:
        """Cylinder ``{tau = k}`` as ``((1 + y_k)/2, (1 + y_{k-1})/2)``."""
        k = int(k)
        if k < 1:
            raise DomainError("k must be >= 1")
        y = self._y(k)
        return 0.5 * (1.0 + y[1]), 0.5 * (1.0 + y[0])

    def _y(self, k):
        if k <= self.yseq.n_max:
            return self.yseq.values[k - 1], self.yseq.values[k]
        z, _ = _backward(np.array([self.yseq.values[-1]]), self.alpha, self.params.b_alpha,
                         k - 1 - self.yseq.n_max)
        y_km1 = z[0]
        return y_km1, _inv1(y_km1, self.alpha, self.params.b_alpha)

    def backward_orbit(self, x, steps: int):
        """Return ``(f_1^{-steps}(x), (f_1^{-steps})'(x))`` for points x in [0, 1]."""
        xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        z, d = _backward(xs, self.alpha, self.params.b_alpha, int(steps))
        return z, d

    def inverse_branch_composed(self, k: int, x):
        """``F_k^{-1}(x) = (1 + f_1^{-(k-1)}(x))/2`` for x in Y."""
        xs = _as_y_points(x)
        if k < 1:
            raise DomainError("k must be >= 1")
        z, _ = self.backward_orbit(xs, k - 1)
        out = 0.5 * (1.0 + z)
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(xs.shape)

    def weight(self, k: int, x):
        """``G_k(x) = (f_1^{-(k-1)})'(x)/2`` by the chain rule."""
        xs = _as_y_points(x)
        if k < 1:
            raise DomainError("k must be >= 1")
        _, d = self.backward_orbit(xs, k - 1)
        out = 0.5 * d
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(xs.shape)

    def round_trip_error(self, k: int, x) -> float:
        """Max ``|f^k(F_k^{-1}(x)) - x|`` over the given points."""
        xs = np.atleast_1d(_as_y_points(x)).ravel()
        w = np.atleast_1d(self.inverse_branch_composed(k, xs))
        back = _forward_power(w, self.alpha, self.params.b_alpha, int(k))
        return float(np.max(np.abs(back - xs)))

    # -- truncation ---------------------------------------------------------

    def residual_mass(self, K: int | None = None) -> float:
        """Lebesgue length of ``{tau > K}``, which is ``y_K / 2`` exactly."""
        K = self.k_max if K is None else int(K)
        return 0.5 * float(self._y(K)[1] if K > self.yseq.n_max else self.yseq.values[K])

    def truncation_bound(self, K: int | None = None) -> float:
        """Integral-test bound ``D_1 alpha K^{-1/alpha}`` on ``sum_{k>K} ||G_k||``."""
        K = self.k_max if K is None else int(K)
        return self.tail_bound_constant * self.alpha * K ** (-1.0 / self.alpha)

    def norm_decay_slope(self, k_lo: int = 100, k_hi: int | None = None) -> float:
        """Log-log slope of ``||G_k||`` over ``[k_lo, k_hi]``."""
        k_hi = self.k_max if k_hi is None else int(k_hi)
        k = np.unique(np.geomspace(k_lo, k_hi, 60).round().astype(int))
        return float(np.polyfit(np.log(k), np.log(self.norms[k - 1]), 1)[0])


# --------------------------------------------------------------------------


@dataclass
class AConditionReport:
    """Observed suprema for the distortion and alpha-regularity conditions.

    Each ``sup_*`` maps alpha to the observed supremum over the grid and k-range.
    ``uniform`` records whether the spread over the alpha list stays within a
    factor ``stability_factor`` (a finite, stable bound).
    """

    alphas: list
    k_values: list
    a1_max_weight: dict
    sup_dG_over_G: dict
    sup_d2G_over_G: dict
    sup_dalpha_Finv: dict
    sup_dalpha_G_over_G: dict
    sup_dalpha_dG_over_G: dict
    a7_partial_sums: dict
    a7_cauchy_gap: dict
    uniform: dict
    stability_factor: float = 4.0


def _weights_and_ratios(alpha, k, x):
    p = MapParams.lsv(alpha)
    z, d, r2, r3 = _backward_ratios(x, p.alpha, p.b_alpha, k - 1)
    return 0.5 * (1.0 + z), 0.5 * d, r2, r3


def spot_check_A_conditions(sys: InducedSystem | None, alphas, k_range=(1, 10_000),
                            grid: int = 33, h_alpha: float = 1e-5, n_k: int = 24,
                            stability_factor: float = 4.0) -> AConditionReport:
    """Numerical spot checks of the induced-system regularity conditions.

    Parameters
    ----------
    sys : InducedSystem or None
        Only used for its ``k_max`` when given.
    alphas : list of float
    k_range : (int, int)
        Return times sampled log-uniformly in this range.
    grid : int
        Number of uniform points in Y.
    h_alpha : float
        Step for the central differences in alpha.

    Notes
    -----
    Distortion ratios ``G'/G`` and ``G''/G`` come from exact chain-rule
    propagation along the backward orbit.  Alpha derivatives are central
    differences.  For summability the proxy ``gamma_k`` is the largest of the
    three alpha-derivative suprema at k, interpolated log-log between samples.
    """
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if sys is not None:
        k_hi = min(k_hi, sys.k_max)
    ks = np.unique(np.geomspace(max(k_lo, 1), k_hi, n_k).round().astype(int))
    x = np.linspace(0.5, 1.0, grid)
    out = {name: {} for name in ("a1", "r2", "r3", "dF", "dG", "dGp", "a7", "gap")}
    for a in alphas:
        a1 = r2m = r3m = dFm = dGm = dGpm = 0.0
        gam = []
        for k in ks:
            F, G, r2, r3 = _weights_and_ratios(a, int(k), x)
            Fp, Gp, r2p, _ = _weights_and_ratios(a + h_alpha, int(k), x)
            Fm, Gm, r2m_, _ = _weights_and_ratios(a - h_alpha, int(k), x)
            dF = np.abs(Fp - Fm) / (2 * h_alpha)
            dG = np.abs(Gp - Gm) / (2 * h_alpha) / G
            # G'/G = r2, so d_alpha G' / G = d_alpha(r2 G)/G
            dGp = np.abs(r2p * Gp - r2m_ * Gm) / (2 * h_alpha) / G
            a1 = max(a1, float(G.max()))
            r2m = max(r2m, float(np.abs(r2).max()))
            r3m = max(r3m, float(np.abs(r3).max()))
            dFm = max(dFm, float(dF.max()))
            dGm = max(dGm, float(dG.max()))
            dGpm = max(dGpm, float(dGp.max()))
            gam.append(max(dF.max(), dG.max(), dGp.max(), 1.0))
        # summability of ||G_k|| gamma_k with gamma interpolated between samples
        p = MapParams.lsv(a)
        isys = sys if (sys is not None and sys.params == p) else InducedSystem(p, k_max=k_hi)
        kk = np.arange(1, k_hi + 1)
        lg = np.interp(np.log(kk), np.log(ks), np.log(gam))
        terms = isys.norms[:k_hi] * np.exp(lg)
        partial = np.cumsum(terms)
        out["a1"][a] = a1
        out["r2"][a] = r2m
        out["r3"][a] = r3m
        out["dF"][a] = dFm
        out["dG"][a] = dGm
        out["dGp"][a] = dGpm
        out["a7"][a] = float(partial[-1])
        out["gap"][a] = float((partial[-1] - partial[k_hi // 2 - 1]) / partial[-1])
    uniform = {}
    for name in ("r2", "r3", "dF", "dG", "dGp", "a7"):
        vals = np.array(list(out[name].values()))
        uniform[name] = bool(np.all(np.isfinite(vals))
                             and vals.max() <= stability_factor * max(vals.min(), 1e-300))
    return AConditionReport(
        alphas=list(alphas),
        k_values=ks.tolist(),
        a1_max_weight=out["a1"],
        sup_dG_over_G=out["r2"],
        sup_d2G_over_G=out["r3"],
        sup_dalpha_Finv=out["dF"],
        sup_dalpha_G_over_G=out["dG"],
        sup_dalpha_dG_over_G=out["dGp"],
        a7_partial_sums=out["a7"],
        a7_cauchy_gap=out["gap"],
        uniform=uniform,
        stability_factor=stability_factor,
    )

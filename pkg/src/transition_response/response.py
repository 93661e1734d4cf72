"""SRB integrals, physical-measure integrals and the one-sided derivative at alpha = 1.

Two independent routes compute ``S(alpha) = int (phi - phi(0)) dnu_alpha``:

* :func:`srb_integral` integrates over Y the excursion sum carried by each
  induced branch (Kac representation),

      g(x) = sum_k G_k(x) [sum_{l=1}^{k-1} psi(f_1^{-l} x) + psi(F_k^{-1} x)] h(F_k^{-1} x),

  with ``psi = phi - phi(0)``;
* :func:`srb_integral_pushforward_oracle` builds the density of ``nu`` on
  [0, 1/2) as a sum over backward iterates and integrates against it.

All densities on Y are w.r.t. ``lambda~ = 2 dx``; the Lebesgue density of ``nu``
on [0, 1/2) is written ``rho`` and is produced directly in Lebesgue units.
"""

from __future__ import annotations

import ast
import functools
import math
import operator
from dataclasses import dataclass, field, replace
from typing import Callable

import numba
import numpy as np

from .density_solver import DensityApprox, _interp_eval, solve_density
from .errors import DomainError, IllConditionedFit, TailNotSummable
from .induced_system import InducedSystem
from .lsv_maps import MapParams, _df1, _inv1, y_sequence
from .tail_analysis import KacResult, fit_power_law, fit_tail, hurwitz_zeta, kac_sum

__all__ = [
    "Potential",
    "builtin_potential",
    "parse_potential",
    "calibrated_potential",
    "SRBResult",
    "PushforwardMeasure",
    "srb_integral",
    "srb_integrals",
    "srb_integral_pushforward_oracle",
    "phy_integral",
    "AlphaPoint",
    "ResponseCurve",
    "DerivativeEstimate",
    "alpha_point",
    "transition_constants",
    "build_response_curve",
    "one_sided_derivative",
    "richardson",
]


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """A Holder observable on [0, 1].

    ``func`` must accept numpy arrays.  ``offset`` is added on evaluation but
    cancels in the centered function, so a constant shift is represented
    structurally and leaves every SRB integral bit-for-bit unchanged.
    """

    func: Callable = field(repr=False)
    holder_exponent: float = 1.0
    holder_constant: float = 1.0
    name: str = "custom"
    offset: float = 0.0

    def __post_init__(self):
        if not self.holder_exponent > 0:
            raise DomainError("Holder exponent must be positive")
        if self.holder_constant < 0:
            raise DomainError("Holder constant must be non-negative")

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float) + self.offset

    @functools.cached_property
    def _f0(self) -> float:
        return float(np.asarray(self.func(np.zeros(1)), dtype=float)[0])

    @property
    def value_at_zero(self) -> float:
        return self._f0 + self.offset

    def centered(self, x):
        """``phi(x) - phi(0)``."""
        x = np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=float) - self._f0

    def shifted(self, c: float) -> "Potential":
        """``phi - c``."""
        return replace(self, offset=self.offset - c, name=f"{self.name}-({c})")

    @property
    def is_constant(self) -> bool:
        return self.holder_constant == 0.0

    def holder_violation(self, n: int = 10_000) -> float:
        """``max |phi(x) - phi(0)| / (C x^eta)`` over n points; at most 1 if declared data hold."""
        x = np.linspace(0.0, 1.0, n + 1)[1:]
        bound = self.holder_constant * x**self.holder_exponent
        dev = np.abs(self.centered(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, dev / bound, np.where(dev > 0, np.inf, 0.0))
        return float(r.max())


_BUILTINS = {
    "x": (lambda x: x, 1.0, 1.0),
    "x2": (lambda x: x * x, 1.0, 1.0),
    "sqrt": (np.sqrt, 0.5, 1.0),
    "cos2pi": (lambda x: np.cos(2 * np.pi * x), 1.0, 2 * np.pi),
    "cos2pi_m1": (lambda x: np.cos(2 * np.pi * x) - 1.0, 1.0, 2 * np.pi),
    "const": (lambda x: np.ones_like(x), 1.0, 0.0),
}


def builtin_potential(name: str) -> Potential:
    """One of ``x, x2, sqrt, cos2pi, cos2pi_m1, const``."""
    if name not in _BUILTINS:
        raise DomainError(f"unknown potential {name!r}; choose from {sorted(_BUILTINS)}")
    f, eta, C = _BUILTINS[name]
    return Potential(f, eta, C, name)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
          "abs": np.abs, "tanh": np.tanh}
_CONSTS = {"pi": np.pi, "e": np.e}


def _compile_expr(expr: str):
    tree = ast.parse(expr, mode="eval")

    def ev(node, x):
        if isinstance(node, ast.Expression):
            return ev(node.body, x)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id in _CONSTS:
                return _CONSTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand, x))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0], x))
        raise DomainError(f"unsupported element in expression {expr!r}: {ast.dump(node)[:60]}")

    # validate once on a probe
    ev(tree, np.linspace(0, 1, 3))
    return lambda x: np.broadcast_to(ev(tree, x), np.shape(x)).astype(float)


def parse_potential(spec) -> Potential:
    """Build a potential from a name, an expression string or a dict.

    A dict has keys ``expression`` (or ``name``), ``eta`` and ``C``.  Expressions
    may use ``x``, ``pi``, ``e``, arithmetic and sin/cos/exp/log/sqrt/abs/tanh.
    """
    if isinstance(spec, Potential):
        return spec
    if isinstance(spec, str):
        if spec in _BUILTINS:
            return builtin_potential(spec)
        return Potential(_compile_expr(spec), 1.0, 1.0, spec)
    if isinstance(spec, dict):
        unknown = set(spec) - {"expression", "name", "eta", "C"}
        if unknown:
            raise DomainError(f"unknown potential keys {sorted(unknown)}")
        tag = spec.get("expression", spec.get("name"))
        if tag is None:
            raise DomainError("potential needs an 'expression' or 'name'")
        base = builtin_potential(tag) if tag in _BUILTINS else Potential(_compile_expr(tag), name=tag)
        return replace(base, holder_exponent=float(spec.get("eta", base.holder_exponent)),
                       holder_constant=float(spec.get("C", base.holder_constant)))
    raise DomainError(f"cannot build a potential from {spec!r}")


def calibrated_potential(beta: float) -> Potential:
    """``phi(x) = x - beta x^2``, Lipschitz with constant ``1 + 2|beta|``."""
    return Potential(lambda x: x - beta * x * x, 1.0, 1.0 + 2 * abs(beta), f"x-{beta:.12g}*x2")


# --------------------------------------------------------------------------
# numba kernel for backward orbits in blocks


@numba.njit(cache=True)
def _orbit_block(z, d, alpha, b, m):
    """Advance ``m`` backward steps; row r holds the state after r+1 steps."""
    n = z.size
    Z = np.empty((m, n))
    D = np.empty((m, n))
    for i in range(n):
        zi = z[i]
        di = d[i]
        for r in range(m):
            zi = _inv1(zi, alpha, b)
            di /= _df1(zi, alpha, b)
            Z[r, i] = zi
            D[r, i] = di
        z[i] = zi
        d[i] = di
    return Z, D


def _gauss(a, b, n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


# --------------------------------------------------------------------------
# main route


@dataclass(frozen=True)
class SRBResult:
    """``int (phi - phi(0)) dnu`` with its truncation data.

    ``value = partial + tail``; ``bound`` is the declared error of ``tail``.
    """

    alpha: float
    potential: str
    value: float
    partial: float
    tail: float
    bound: float
    k_max: int
    method: str
    extras: dict = field(default_factory=dict, repr=False)


def _tail_fit(terms, K):
    """Extrapolate ``sum_{k>K} term_k`` from a power-law fit on ``[K/2, K]``.

    The declared bound comes from doing the same thing one and two octaves
    earlier and checking the prediction against the exact window sums.
    """
    if np.all(terms[K // 8:] == 0.0):
        return 0.0, 0.0, None
    sign = np.sign(terms[K // 8:])
    if np.any(sign != sign[0]):
        raise TailNotSummable("branch terms change sign in the fit window")
    s = sign[0]
    a = np.abs(terms)

    def fit(lo, hi):
        k = np.unique(np.geomspace(lo, hi, 40).round().astype(int))
        return fit_power_law(k, a[k - 1], min_ratio=2.0)

    c, p, _ = fit(K // 2, K)
    if p <= 1.0:
        raise TailNotSummable(f"fitted decay exponent {p:.3f} is not summable")
    tail = s * c * hurwitz_zeta(p, K + 1.0)
    rel = 0.0
    for lo, hi, end in ((K // 8, K // 4, K // 2), (K // 4, K // 2, K)):
        c2, p2, _ = fit(lo, hi)
        k = np.arange(hi + 1, end + 1)
        pred = c2 * np.sum(k ** (-p2))
        actual = np.sum(a[hi:end])
        rel = max(rel, abs(pred - actual) / actual)
    return float(tail), float(rel * abs(tail)), float(p)


def srb_integrals(density: DensityApprox, sys: InducedSystem, phis, k_max: int = 200_000,
                  n_nodes: int = 32, block: int = 4096) -> list[SRBResult]:
    """Branch-sum SRB integrals for several potentials in one pass.

    Parameters
    ----------
    density : DensityApprox
        Induced density for ``sys``'s alpha.
    sys : InducedSystem
    phis : list of Potential
    k_max : int
        Number of induced branches summed explicitly; the rest is extrapolated.
    n_nodes : int
        Gauss-Legendre nodes on Y.
    """
    a = sys.alpha
    if a > 1.0 + 1e-12:
        raise DomainError("SRB integral of phi - phi(0) is only finite for alpha <= 1")
    for phi in phis:
        if not min(1.0, phi.holder_exponent / a) > 0:
            raise TailNotSummable("Holder data give no decay")
    b = sys.params.b_alpha
    x, w = _gauss(0.5, 1.0, n_nodes)
    wl = 2.0 * w
    hv = np.asarray(density.values)
    hh = density.h
    npot = len(phis)
    terms = np.zeros((npot, k_max))
    # k = 1: F = (1 + x)/2, weight 1/2, empty excursion
    F = 0.5 * (1.0 + x)
    hF = _interp_eval(0.5 * x, hv, hh)
    for j, phi in enumerate(phis):
        terms[j, 0] = np.sum(wl * 0.5 * phi.centered(F) * hF)
    z = x.copy()
    d = np.ones_like(x)
    S = np.zeros((npot, x.size))
    k = 1
    while k < k_max:
        m = min(block, k_max - k)
        Z, D = _orbit_block(z, d, a, b, m)
        hF = _interp_eval(0.5 * Z.ravel(), hv, hh).reshape(Z.shape)
        F = 0.5 * (1.0 + Z)
        G = 0.5 * D * wl
        for j, phi in enumerate(phis):
            P = phi.centered(Z)
            Sk = S[j] + np.cumsum(P, axis=0)
            terms[j, k:k + m] = np.sum(G * (Sk + phi.centered(F)) * hF, axis=1)
            S[j] = Sk[-1]
        k += m
    out = []
    for j, phi in enumerate(phis):
        partial = math.fsum(terms[j])
        try:
            tail, bound, p = _tail_fit(terms[j], k_max)
        except IllConditionedFit as exc:  # pragma: no cover - defensive
            raise TailNotSummable(str(exc)) from exc
        out.append(SRBResult(a, phi.name, partial + tail, partial, tail, bound, k_max,
                             "branch_sum", {"decay_exponent": p, "n_nodes": n_nodes}))
    return out


def srb_integral(density: DensityApprox, sys: InducedSystem, phi: Potential,
                 **kwargs) -> SRBResult:
    """``int (phi - phi(0)) dnu_alpha`` through the induced branch sum."""
    return srb_integrals(density, sys, [phi], **kwargs)[0]


# --------------------------------------------------------------------------
# pushforward representation


@dataclass(frozen=True, eq=False)
class PushforwardMeasure:
    """The invariant measure ``nu`` on [0, 1], normalized by ``nu(Y) = 1``.

    On [0, 1/2) its Lebesgue density is

        rho(z) = sum_{m>=0} (f_1^{-m})'(z) h((1 + f_1^{-m} z)/2),

    summed explicitly for ``m < n_trunc`` and in closed form (Hurwitz zeta,
    leading asymptotics of the backward orbit) beyond.  Integrals over [0, 1/2)
    use ``z = e^{-t}/2`` with Gauss-Legendre panels up to ``t_max``.
    """

    density: DensityApprox
    sys: InducedSystem
    n_trunc: int = 4000
    t_max: float = 72.0
    panel: float = 1.0
    nodes_per_panel: int = 10

    @functools.cached_property
    def _nodes(self):
        n_pan = int(round(self.t_max / self.panel))
        t0, w0 = np.polynomial.legendre.leggauss(self.nodes_per_panel)
        starts = np.arange(n_pan) * self.panel
        t = (starts[:, None] + 0.5 * self.panel * (t0 + 1.0)).ravel()
        w = np.tile(0.5 * self.panel * w0, n_pan)
        z = 0.5 * np.exp(-t)
        rho_full, rho_half = self.rho(z, both=True)
        return z, w * z, rho_full, rho_half

    def rho(self, z, both: bool = False):
        """Lebesgue density of ``nu`` at points of (0, 1/2)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        a, b = self.sys.alpha, self.sys.params.b_alpha
        hv = np.asarray(self.density.values)
        hh = self.density.h
        h_half = self.density.at_half
        M = int(self.n_trunc)
        zz = z.copy()
        dd = np.ones_like(z)
        acc = _interp_eval(0.5 * zz, hv, hh)
        checkpoints = {M // 2: None, M: None}
        done = 0
        for target in sorted(checkpoints):
            Z, D = _orbit_block(zz, dd, a, b, target - done)
            acc = acc + np.sum(D * _interp_eval(0.5 * Z.ravel(), hv, hh).reshape(Z.shape), axis=0)
            done = target
            wz = zz
            ua = wz ** (-a) / (a * b)
            tail = (dd * h_half * wz ** (-a - 1.0) * (a * b) ** (-1.0 - 1.0 / a)
                    * hurwitz_zeta(1.0 + 1.0 / a, 1.0 + ua))
            checkpoints[target] = acc + tail
        if both:
            return checkpoints[M], checkpoints[M // 2]
        return checkpoints[M]

    def _cut_bound(self, eta, C):
        a, b = self.sys.alpha, self.sys.params.b_alpha
        zT = 0.5 * math.exp(-self.t_max)
        p = 1.0 + eta - a
        if p <= 0:
            return math.inf
        # rho <= 2 h(1/2) / (b z^alpha) near 0, with a safety factor 2
        return 2.0 * C * 2.0 * self.density.bounds[1] / b * zT**p / p

    def integrate_left(self, psi, eta=1.0, C=1.0):
        """``int_0^{1/2} psi rho dz`` with (value, bound)."""
        z, wz, rf, rh = self._nodes
        pv = psi(z)
        full = math.fsum(wz * pv * rf)
        half = math.fsum(wz * pv * rh)
        return full, abs(full - half) + self._cut_bound(eta, C)

    def integrate_y(self, psi, n: int = 96):
        """``int_Y psi dnu~`` by Gauss-Legendre."""
        x, w = _gauss(0.5, 1.0, n)
        return math.fsum(2.0 * w * psi(x) * self.density(x))

    def mass_left(self, lo: float, hi: float, n: int = 16):
        """``nu([lo, hi))`` for ``0 <= lo < hi <= 1/2``; needs alpha < 1 when lo = 0."""
        if not 0.0 <= lo < hi <= 0.5:
            raise DomainError("interval must lie in [0, 1/2]")
        t_hi = math.log(0.5 / hi)
        t_lo = self.t_max if lo == 0.0 else math.log(0.5 / lo)
        n_pan = max(1, int(math.ceil((t_lo - t_hi) / self.panel)))
        edges = np.linspace(t_hi, t_lo, n_pan + 1)
        t0, w0 = np.polynomial.legendre.leggauss(n)
        half = 0.5 * np.diff(edges)
        t = (edges[:-1, None] + half[:, None] * (t0 + 1.0)).ravel()
        w = (half[:, None] * w0).ravel()
        z = 0.5 * np.exp(-t)
        val = math.fsum(w * z * self.rho(z))
        if lo == 0.0:
            a, b = self.sys.alpha, self.sys.params.b_alpha
            if a >= 1.0:
                raise DomainError("nu has infinite mass near 0 for alpha >= 1")
            zT = 0.5 * math.exp(-self.t_max)
            # rho ~ h(1/2) / (b z^alpha) below the last panel
            val += self.density.at_half / (b * (1.0 - a)) * zT ** (1.0 - a)
        return val

    def mass(self, lo: float, hi: float) -> float:
        """``nu([lo, hi))`` for any subinterval of [0, 1]."""
        total = 0.0
        if lo < 0.5:
            total += self.mass_left(lo, min(hi, 0.5))
        if hi > 0.5:
            total += float(self.density.mass(max(lo, 0.5), hi))
        return total


def srb_integral_pushforward_oracle(density: DensityApprox, sys: InducedSystem,
                                   phi: Potential, n_trunc: int = 4000,
                                   measure: PushforwardMeasure | None = None) -> SRBResult:
    """``int (phi - phi(0)) dnu`` from the density of ``nu`` on [0, 1/2).

    The bound adds the change between ``n_trunc/2`` and ``n_trunc`` explicit
    backward iterates to a Holder estimate of the mass below the last panel.
    """
    if sys.alpha > 1.0 + 1e-12:
        raise DomainError("oracle needs alpha <= 1")
    if measure is None:
        measure = PushforwardMeasure(density, sys, n_trunc=n_trunc)
    yv = measure.integrate_y(phi.centered)
    lv, lb = measure.integrate_left(phi.centered, phi.holder_exponent, phi.holder_constant)
    return SRBResult(sys.alpha, phi.name, yv + lv, yv + lv, 0.0, lb, measure.n_trunc,
                     "pushforward", {"y_part": yv, "left_part": lv})


def phy_integral(phi: Potential, srb: SRBResult | float | None, kac: KacResult | None,
                 alpha: float) -> float:
    """``int phi dmu`` for the physical measure.

    ``phi(0) + S / K`` below the transition, ``phi(0)`` at and beyond it where
    the physical measure is the point mass at 0.
    """
    if alpha >= 1.0:
        return phi.value_at_zero
    s = srb.value if isinstance(srb, SRBResult) else float(srb)
    return phi.value_at_zero + s / kac.total


# --------------------------------------------------------------------------
# the curve toward alpha = 1


@dataclass(frozen=True, eq=False)
class AlphaPoint:
    """Per-alpha pipeline output shared by all potentials."""

    alpha: float
    sys: InducedSystem = field(repr=False)
    density: DensityApprox = field(repr=False)
    kac: KacResult


@functools.lru_cache(maxsize=64)
def alpha_point(alpha: float, k_max: int = 10_000, grid_size: int = 1024,
                tol: float = 1e-10) -> AlphaPoint:
    """Induced system, density and Kac sum at one alpha (cached)."""
    sys = InducedSystem(MapParams.lsv(alpha), k_max=k_max)
    try:
        dens = solve_density(sys, grid_size=grid_size, tol=tol, second_start=False)
    except Exception as exc:
        exc.args = (f"alpha={alpha}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    return AlphaPoint(alpha, sys, dens, kac_sum(dens, sys.yseq))


@dataclass(frozen=True)
class TransitionConstants:
    """Quantities at alpha = 1 entering the derivative target."""

    h1_half: float
    rho1_half: float
    c1: float
    c1_predicted: float
    c1_half_slope: float
    fit_window: tuple


@functools.lru_cache(maxsize=8)
def transition_constants(k_max: int = 10_000, grid_size: int = 1024,
                         fit_window=(1000, 100_000)) -> TransitionConstants:
    """Density value and fitted tail constant at alpha = 1."""
    p = alpha_point(1.0, k_max, grid_size)
    yseq = y_sequence(p.sys.params, int(fit_window[1]))
    prof = fit_tail(p.density, yseq, fit_window)
    return TransitionConstants(p.density.at_half, 2.0 * p.density.at_half, prof.fitted_c,
                               prof.predicted_c, prof.predicted_c_half_slope,
                               tuple(fit_window))


@dataclass(frozen=True)
class DerivativeEstimate:
    """One-sided derivative at alpha = 1 against its analytic target."""

    estimate: float
    richardson_extrapolate: float | None
    analytic_target: float
    relative_gap: float | None
    analytic_target_half_slope: float
    relative_gap_half_slope: float | None
    table: list
    converged: bool
    flag: str | None


@dataclass(frozen=True)
class ResponseCurve:
    """Response data on an alpha grid accumulating at 1 from below."""

    potential: str
    phi0: float
    alphas: np.ndarray = field(repr=False)
    r_srb: np.ndarray = field(repr=False)
    srb_bounds: np.ndarray = field(repr=False)
    kac: np.ndarray = field(repr=False)
    r_phy: np.ndarray = field(repr=False)
    derivative_estimates: np.ndarray = field(repr=False)
    srb_at_one: float
    srb_at_one_bound: float
    constants: TransitionConstants
    analytic_target: float
    analytic_target_half_slope: float

    @property
    def phy(self):
        """``phi(0) + r_phy``, the physical-measure integrals."""
        return self.phi0 + self.r_phy

    def rows(self):
        for i in range(self.alphas.size):
            yield (float(self.alphas[i]), float(self.r_srb[i]), float(self.kac[i]),
                   float(self.r_phy[i]), float(self.derivative_estimates[i]))


def build_response_curve(phis, alpha_grid=None, k_max: int = 10_000, grid_size: int = 1024,
                         srb_k_max: int = 200_000, n_nodes: int = 32,
                         fit_window=(1000, 100_000)):
    """Assemble response curves for one or several potentials.

    Parameters
    ----------
    phis : Potential or list of Potential
    alpha_grid : sequence of float, optional
        Points in (0, 1); default ``1 - 2^{-j}``, j = 4..10.

    Returns
    -------
    ResponseCurve or list of ResponseCurve
    """
    single = isinstance(phis, Potential)
    plist = [phis] if single else list(phis)
    if alpha_grid is None:
        alpha_grid = [1.0 - 2.0**-j for j in range(4, 11)]
    alphas = np.asarray(sorted(float(a) for a in alpha_grid))
    if alphas.size == 0 or np.any(alphas <= 0) or np.any(alphas >= 1):
        raise DomainError("alpha grid must be non-empty and inside (0, 1)")
    consts = transition_constants(k_max, grid_size, tuple(fit_window))
    p1 = alpha_point(1.0, k_max, grid_size)
    at_one = srb_integrals(p1.density, p1.sys, plist, k_max=srb_k_max, n_nodes=n_nodes)
    per_alpha = []
    for a in alphas:
        pt = alpha_point(float(a), k_max, grid_size)
        per_alpha.append((pt, srb_integrals(pt.density, pt.sys, plist, k_max=srb_k_max,
                                            n_nodes=n_nodes)))
    curves = []
    for j, phi in enumerate(plist):
        r_srb = np.array([res[j].value for _, res in per_alpha])
        bnd = np.array([res[j].bound for _, res in per_alpha])
        kac = np.array([pt.kac.total for pt, _ in per_alpha])
        r_phy = r_srb / kac
        q = r_phy / (alphas - 1.0)
        s1 = at_one[j].value
        curves.append(ResponseCurve(
            potential=phi.name,
            phi0=phi.value_at_zero,
            alphas=alphas,
            r_srb=r_srb,
            srb_bounds=bnd,
            kac=kac,
            r_phy=r_phy,
            derivative_estimates=q,
            srb_at_one=s1,
            srb_at_one_bound=at_one[j].bound,
            constants=consts,
            # v(alpha) = 1/alpha, so v'(1) = -1
            analytic_target=0.0 - s1 / consts.c1,
            analytic_target_half_slope=0.0 - s1 / consts.c1_half_slope,
        ))
    return curves[0] if single else curves


def richardson(values, ratio: float = 2.0, order: int = 2):
    """Richardson table for values at step sizes ``h, h/ratio, h/ratio^2, ...``.

    Column m removes the ``h^m`` error term.  Returns the table as a list of
    rows, row i holding ``min(i, order) + 1`` entries.
    """
    v = [float(x) for x in values]
    table = []
    for i, val in enumerate(v):
        row = [val]
        for m in range(1, min(i, order) + 1):
            f = ratio**m
            row.append((f * row[m - 1] - table[i - 1][m - 1]) / (f - 1.0))
        table.append(row)
    return table


def one_sided_derivative(curve: ResponseCurve, order: int = 2,
                         rtol: float = 0.05) -> DerivativeEstimate:
    """Difference quotients toward alpha = 1 with Richardson extrapolation.

    The grid must be geometric in ``1 - alpha`` with ratio 2.  ``converged`` is
    False (and ``flag`` set) when the last extrapolated values move by more than
    ``rtol`` relative to their scale, or when there are too few points.
    """
    q = curve.derivative_estimates
    target = curve.analytic_target
    target2 = curve.analytic_target_half_slope

    def gap(v, t):
        if v is None:
            return None
        if t == 0.0:
            return abs(v)
        return abs(v - t) / abs(t)

    if q.size < 2:
        return DerivativeEstimate(float(q[-1]), None, target, None, target2, None, [],
                                  False, "single_point_no_extrapolation")
    steps = 1.0 - curve.alphas
    ratios = steps[:-1] / steps[1:]
    if not np.allclose(ratios, 2.0, rtol=1e-9):
        raise DomainError("Richardson extrapolation needs 1 - alpha halving along the grid")
    # alphas are sorted ascending, so the steps shrink along the grid
    table = richardson(q, 2.0, order)
    last = table[-1][-1]
    prev = table[-2][-1]
    scale = max(abs(last), abs(float(q[-1])), 1e-300)
    converged = abs(last - prev) <= rtol * scale
    flag = None if converged else "quotients_not_settled"
    return DerivativeEstimate(float(q[-1]), float(last), target, gap(last, target), target2,
                              gap(last, target2),
                              table, bool(converged), flag)

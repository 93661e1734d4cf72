"""Invariant density of the induced map on Y = [1/2, 1].

The density ``h`` is taken with respect to ``lambda~ = 2 * Lebesgue`` on Y, so
that ``int_Y h dlambda~ = 1``.  The Lebesgue density of the same measure is
``rho = 2 h``; :func:`to_lebesgue` is the one place that conversion happens.

Off-grid values come from a local four-point Lagrange cubic on a uniform grid
that includes both endpoints.  The interpolant is linear in the nodal data, so
the discretized transfer operator is an honest matrix and power iteration on it
is exact linear algebra.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError, NonConvergence
from .induced_system import InducedSystem
from .lsv_maps import MapParams, _df1, _inv1, y_sequence

__all__ = [
    "DensityApprox",
    "RuelleOperator",
    "UlamDensity",
    "to_lebesgue",
    "build_operator",
    "apply_ruelle",
    "solve_density",
    "ulam_oracle",
]


def to_lebesgue(h):
    """Convert a density w.r.t. ``lambda~ = 2 Leb|_Y`` into a Lebesgue density."""
    return 2.0 * np.asarray(h, dtype=float)


# --------------------------------------------------------------------------
# piecewise cubic on a uniform grid


@numba.njit(cache=True, inline="always")
def _stencil(p, h, G):
    # p is the offset from 1/2; returns stencil start and local coordinate
    s = p / h
    i = int(s)
    if i > G - 2:
        i = G - 2
    if i < 0:
        i = 0
    j0 = i - 1
    if j0 < 0:
        j0 = 0
    if j0 > G - 4:
        j0 = G - 4
    return j0, s - j0


@numba.njit(cache=True, inline="always")
def _lagrange4(t):
    w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0
    w1 = t * (t - 2.0) * (t - 3.0) / 2.0
    w2 = -t * (t - 1.0) * (t - 3.0) / 2.0
    w3 = t * (t - 1.0) * (t - 2.0) / 6.0
    return w0, w1, w2, w3


@numba.njit(cache=True)
def _interp_eval(p, values, h):
    G = values.size
    out = np.empty(p.size)
    for m in range(p.size):
        j0, t = _stencil(p[m], h, G)
        w0, w1, w2, w3 = _lagrange4(t)
        out[m] = (w0 * values[j0] + w1 * values[j0 + 1]
                  + w2 * values[j0 + 2] + w3 * values[j0 + 3])
    return out


@functools.lru_cache(maxsize=None)
def _power_coeffs(off):
    """Matrix taking the 4 stencil values to power coefficients in t.

    ``t`` is the local coordinate on the interval whose left node sits at
    position ``off`` inside the stencil.
    """
    nodes = np.arange(4.0) - off
    V = np.vander(nodes, 4, increasing=True)
    return np.linalg.inv(V)


def _interval_coeffs(values):
    """Power coefficients of the interpolant on each grid interval."""
    G = values.size
    i = np.arange(G - 1)
    j0 = np.clip(i - 1, 0, G - 4)
    off = i - j0
    idx = j0[:, None] + np.arange(4)
    out = np.empty((G - 1, 4))
    for o in (0, 1, 2):
        sel = off == o
        out[sel] = values[idx[sel]] @ _power_coeffs(o).T
    return out


def _quadrature_weights(G, h):
    """Weights q with ``q @ u = int_Y I[u] dlambda~`` (exact for the interpolant)."""
    q = np.zeros(G)
    cum = np.array([1.0, 1 / 2, 1 / 3, 1 / 4])
    for i in range(G - 1):
        j0 = min(max(i - 1, 0), G - 4)
        q[j0:j0 + 4] += 2.0 * h * (cum @ _power_coeffs(i - j0))
    return q


# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityApprox:
    """Grid representation of the induced invariant density.

    Attributes
    ----------
    grid : ndarray
        Uniform nodes on [1/2, 1], endpoints included.
    values : ndarray
        Density at the nodes, w.r.t. ``norm_convention``.
    norm_convention : str
        ``"wrt_lambda_tilde"`` or ``"wrt_lebesgue"``.
    residual : float
        Sup-norm of ``P h - h`` at the nodes.
    bounds : tuple
        (min, max) of the nodal values.
    """

    alpha: float
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    norm_convention: str = "wrt_lambda_tilde"
    residual: float = float("nan")
    bounds: tuple = (float("nan"), float("nan"))
    k_max: int = 0
    tail_bound: float = 0.0
    iterations: int = 0
    trace: tuple = ()
    second_start_gap: float | None = None

    def __post_init__(self):
        self.grid.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def size(self) -> int:
        return self.grid.size

    @functools.cached_property
    def _coeffs(self):
        c = _interval_coeffs(np.asarray(self.values))
        cum = np.concatenate(([0.0], np.cumsum(self.h * (c @ [1.0, 1 / 2, 1 / 3, 1 / 4]))))
        return c, cum

    def __call__(self, x):
        """Evaluate the interpolated density at points of Y."""
        xs = np.asarray(x, dtype=float)
        if np.any(xs < 0.5 - 1e-15) or np.any(xs > 1.0 + 1e-15):
            raise DomainError("density is defined on [1/2, 1]")
        out = _interp_eval(np.atleast_1d(xs - 0.5).ravel(), np.asarray(self.values), self.h)
        return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

    @property
    def at_half(self) -> float:
        """Value at the left endpoint, which is the first grid node."""
        return float(self.values[0])

    def to_lebesgue(self) -> "DensityApprox":
        if self.norm_convention == "wrt_lebesgue":
            return self
        return DensityApprox(self.alpha, self.grid.copy(), to_lebesgue(self.values),
                             "wrt_lebesgue", 2 * self.residual,
                             (2 * self.bounds[0], 2 * self.bounds[1]), self.k_max,
                             self.tail_bound, self.iterations, self.trace,
                             self.second_start_gap)

    def _scale(self):
        # measure of the integral: lambda~ = 2 dx for the native convention
        return 2.0 if self.norm_convention == "wrt_lambda_tilde" else 1.0

    def mass_from_left(self, delta):
        """Measure of ``[1/2, 1/2 + delta]``, exact for the piecewise cubic."""
        d = np.asarray(delta, dtype=float)
        c, cum = self._coeffs
        h = self.h
        s = np.clip(np.atleast_1d(d).ravel() / h, 0.0, self.size - 1)
        i = np.minimum(s.astype(int), self.size - 2)
        t = s - i
        ci = c[i]
        part = t * (ci[:, 0] + t * (ci[:, 1] / 2 + t * (ci[:, 2] / 3 + t * ci[:, 3] / 4)))
        out = self._scale() * (cum[i] + h * part)
        return float(out[0]) if d.ndim == 0 else out.reshape(d.shape)

    def mass(self, a, b):
        """Measure of ``[a, b]`` for ``1/2 <= a <= b <= 1``."""
        return self.mass_from_left(np.asarray(b) - 0.5) - self.mass_from_left(np.asarray(a) - 0.5)

    def total_mass(self) -> float:
        return float(self.mass_from_left(0.5))

    def polynomial_near_half(self):
        """Coefficients ``a_p`` with ``mass_from_left(d) = sum_p a_p d^(p+1)`` on the first interval."""
        c, _ = self._coeffs
        h = self.h
        return np.array([self._scale() * c[0, p] / ((p + 1) * h**p) for p in range(4)])


@dataclass(frozen=True, eq=False)
class RuelleOperator:
    """Transfer operator of the induced map acting on nodal values.

    ``main`` holds the branches k <= k_max; the branches beyond are lumped into a
    rank-one ``tail_col (x) tail_row`` term that maps the exact lambda~-average
    of u over ``{tau > k_max}`` with the total weight ``y_K / (y_{K-1} - y_K) G_K``.
    That choice keeps the operator mass preserving.
    """

    sys: InducedSystem
    grid: np.ndarray = field(repr=False)
    main: np.ndarray = field(repr=False)
    tail_col: np.ndarray = field(repr=False)
    tail_row: np.ndarray = field(repr=False)
    quad: np.ndarray = field(repr=False)

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    def tail_part(self, u):
        return self.tail_col * (self.tail_row @ u[:4])

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.main @ u + self.tail_part(u)

    def matrix(self):
        M = self.main.copy()
        M[:, :4] += np.outer(self.tail_col, self.tail_row)
        return M


@numba.njit(cache=True)
def _assemble(xn, alpha, b, K, h):
    G = xn.size
    M = np.zeros((G, G))
    dK = np.empty(G)
    for i in range(G):
        z = xn[i]
        d = 1.0
        for k in range(1, K + 1):
            if k > 1:
                z = _inv1(z, alpha, b)
                d /= _df1(z, alpha, b)
            g = 0.5 * d
            j0, t = _stencil(0.5 * z, h, G)
            w0, w1, w2, w3 = _lagrange4(t)
            M[i, j0] += g * w0
            M[i, j0 + 1] += g * w1
            M[i, j0 + 2] += g * w2
            M[i, j0 + 3] += g * w3
        dK[i] = d
    return M, dK


@functools.lru_cache(maxsize=16)
def _cached_operator(params: MapParams, k_max: int, grid_size: int):
    return _build(InducedSystem(params, k_max=k_max), grid_size)


def _build(sys, G):
    if G < 64:
        raise DomainError("grid_size must be at least 64")
    x = np.linspace(0.5, 1.0, G)
    h = 0.5 / (G - 1)
    K = sys.k_max
    M, dK = _assemble(x, sys.alpha, sys.params.b_alpha, K, h)
    y = sys.yseq.values
    # lumped tail: weight G_K scaled so its integral is y_K/2, applied to the
    # exact average of u over [1/2, 1/2 + y_K/2]
    tail_col = 0.5 * dK * y[K] / (y[K - 1] - y[K])
    delta = 0.5 * y[K]
    tau = delta / h
    if tau > 1.0:
        raise DomainError("grid too coarse for the requested k_max")
    powers = np.array([tau, tau**2 / 2, tau**3 / 3, tau**4 / 4])
    tail_row = (h / delta) * (powers @ _power_coeffs(0))
    q = _quadrature_weights(G, h)
    for arr in (x, M, tail_col, tail_row, q):
        arr.setflags(write=False)
    return RuelleOperator(sys, x, M, tail_col, tail_row, q)


def build_operator(sys: InducedSystem, grid_size: int = 1024) -> RuelleOperator:
    """Discretize the transfer operator of ``sys`` on a uniform grid (cached)."""
    if sys.n_max == sys.k_max + 1:
        return _cached_operator(sys.params, sys.k_max, int(grid_size))
    return _build(sys, int(grid_size))


def apply_ruelle(sys, u):
    """Apply the induced transfer operator to nodal values ``u``.

    Parameters
    ----------
    sys : InducedSystem or RuelleOperator
    u : array_like
        Values on the uniform grid of ``len(u)`` nodes over [1/2, 1].
    """
    u = np.asarray(u, dtype=float)
    op = sys if isinstance(sys, RuelleOperator) else build_operator(sys, u.size)
    return op(u)


def _power_iterate(op, u0, tol, max_iter):
    q = op.quad
    u = u0 / (q @ u0)
    trace = []
    for it in range(1, max_iter + 1):
        v = op(u)
        r = float(np.max(np.abs(v - u)))
        trace.append(r)
        u = v / (q @ v)
        if r <= tol:
            return u, r, it, trace
    raise NonConvergence(f"power iteration did not reach tol={tol} in {max_iter} steps", trace)


def solve_density(sys: InducedSystem, grid_size: int = 1024, tol: float = 1e-10,
                  max_iter: int = 500, second_start: bool = True) -> DensityApprox:
    """Fixed point of the induced transfer operator by power iteration.

    Starts from ``u = 1`` and renormalizes to unit lambda~-mass each step.  With
    ``second_start`` the iteration is repeated from ``2(x - 1/2) + 1/2`` and the
    sup-distance between the two results is stored.

    Raises
    ------
    NonConvergence
        If ``max_iter`` is reached; the residual trace is attached.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    op = build_operator(sys, grid_size)
    x = op.grid
    u, r, it, trace = _power_iterate(op, np.ones_like(x), tol, max_iter)
    gap = None
    if second_start:
        u2, _, _, _ = _power_iterate(op, 2 * (x - 0.5) + 0.5, tol, max_iter)
        gap = float(np.max(np.abs(u2 - u)))
    # residual of the stored vector, not of the previous iterate
    res = float(np.max(np.abs(op(u) - u)))
    return DensityApprox(
        alpha=sys.alpha,
        grid=x.copy(),
        values=u,
        residual=res,
        bounds=(float(u.min()), float(u.max())),
        k_max=sys.k_max,
        tail_bound=sys.truncation_bound(),
        iterations=it,
        trace=tuple(trace),
        second_start_gap=gap,
    )


# --------------------------------------------------------------------------
# Ulam oracle


@numba.njit(cache=True)
def _ulam_knots(edges, alpha, b, k0, K):
    n1 = edges.size
    knots = np.empty((k0 - 1, n1))
    rest = np.zeros(n1 - 1)
    last = np.zeros(n1 - 1)
    z = edges.copy()
    for k in range(1, K + 1):
        if k > 1:
            for i in range(n1):
                z[i] = _inv1(z[i], alpha, b)
        if k < k0:
            for i in range(n1):
                knots[k - 1, i] = 0.5 * (1.0 + z[i])
        else:
            for j in range(n1 - 1):
                rest[j] += 0.5 * (z[j + 1] - z[j])
        if k == K:
            for j in range(n1 - 1):
                last[j] = 0.5 * (z[j + 1] - z[j])
    return knots, rest, last


@dataclass(frozen=True, eq=False)
class UlamDensity:
    """Piecewise-constant density from the Ulam discretization of the induced map."""

    alpha: float
    edges: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    norm_convention: str = "wrt_lambda_tilde"
    iterations: int = 0
    residual: float = float("nan")
    row_sum_defect: float = float("nan")

    @property
    def cells(self) -> int:
        return self.values.size

    def l1_distance(self, density: DensityApprox, nodes: int = 6) -> float:
        """``int_Y |ulam - h| dlambda~`` by Gauss-Legendre on every cell."""
        t, w = np.polynomial.legendre.leggauss(nodes)
        a = self.edges[:-1, None]
        half = 0.5 * (self.edges[1] - self.edges[0])
        pts = np.clip(a + half * (t + 1.0), 0.5, 1.0)
        vals = density(pts)
        err = np.abs(vals - self.values[:, None]) @ w
        return float(2.0 * half * err.sum())


class _UlamOperator:
    """Ulam matrix applied without forming it.

    Left action: the new mass of cell j is the old mass lying over the image
    intervals ``F_k^{-1}(cell_j)``, read from the piecewise-linear cumulative
    distribution.  Cylinders for ``k >= k0`` sit inside cell 0, where the density
    is constant, so they only need total lengths.
    """

    def __init__(self, params, cells, k_max):
        self.N = int(cells)
        self.edges = np.linspace(0.5, 1.0, self.N + 1)
        self.h = 0.5 / self.N
        a, b = params.alpha, params.b_alpha
        # the lumped remainder must sit inside cell 0, so k_max may need to grow
        n_cell = int(1.5 / (a * b * (2.0 * self.h) ** a)) + 2
        y = y_sequence(params, max(k_max, n_cell) + 1).values
        k0 = int(np.argmax(y <= 2.0 * self.h)) + 1
        k_max = max(k_max, k0 + 1)
        k0 = max(2, k0)
        self.k_max = k_max
        knots, rest, last = _ulam_knots(self.edges, params.alpha, params.b_alpha, k0, k_max)
        rest += last * y[k_max] / (y[k_max - 1] - y[k_max])
        self.knots, self.rest = knots, rest

    def left(self, v):
        cdf = np.concatenate(([0.0], np.cumsum(v)))
        F = np.interp(self.knots, self.edges, cdf)
        return np.diff(F, axis=1).sum(axis=0) + (v[0] / self.h) * self.rest

    def right(self, u):
        lengths = np.diff(self.knots, axis=1)
        W = np.concatenate((np.zeros((lengths.shape[0], 1)), np.cumsum(lengths * u, axis=1)),
                           axis=1)
        out = np.zeros(self.N)
        for k in range(self.knots.shape[0]):
            out += np.diff(np.interp(self.edges, self.knots[k], W[k]))
        out[0] += self.rest @ u
        return out / self.h


def ulam_oracle(params: MapParams, cells: int = 4096, iterations: int = 400,
                k_max: int = 10_000, tol: float = 1e-11) -> UlamDensity:
    """Ulam approximation of the induced invariant density.

    Builds the cell-transition matrix of the induced map from exact images of
    cell endpoints and finds its left fixed vector by power iteration.

    Raises
    ------
    NonConvergence
        If ``iterations`` steps do not reach ``tol``.
    """
    if cells < 256:
        raise DomainError("cells must be at least 256")
    op = _UlamOperator(params, cells, k_max)
    v = np.full(op.N, 1.0 / op.N)
    trace = []
    for it in range(1, iterations + 1):
        w = op.left(v)
        w /= w.sum()
        r = float(np.max(np.abs(w - v)) * op.N)
        trace.append(r)
        v = w
        if r <= tol:
            break
    else:
        raise NonConvergence("Ulam power iteration did not converge", trace)
    rows = op.right(np.ones(op.N))
    return UlamDensity(params.alpha, op.edges, v / (2.0 * op.h), iterations=it,
                       residual=r, row_sum_defect=float(np.max(np.abs(rows - 1.0))))

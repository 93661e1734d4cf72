"""Monte Carlo orbit ensembles for the LSV map.

Each orbit gets its own Philox stream spawned from one seed sequence, so results
do not depend on how orbits are scheduled.  A numba kernel writes blocks of
states; potentials are applied to each block with numpy and summed in a fixed
order, which keeps every run bit-for-bit reproducible on one platform.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .errors import DomainError
from .lsv_maps import _f1

__all__ = [
    "OrbitEnsembleConfig",
    "EnsembleRun",
    "BirkhoffResult",
    "run_ensemble",
    "birkhoff_average",
    "occupation_near_zero",
    "cell_histogram",
    "esslim_demo",
    "FLOOR",
]

FLOOR = 1e-300


@dataclass(frozen=True)
class OrbitEnsembleConfig:
    """Orbit ensemble settings.

    Parameters
    ----------
    alpha : float
    n_steps : int
        Iterates averaged per orbit, after ``burn_in`` discarded ones.
    n_orbits : int
    seed : int
    initial_law : {"unit", "Y"}
        Uniform on [0, 1] or on [1/2, 1].
    """

    alpha: float
    n_steps: int
    n_orbits: int
    seed: int = 0
    initial_law: str = "unit"
    burn_in: int = 1000
    block: int = 1 << 16
    threads: int = 1

    def __post_init__(self):
        if self.n_steps < 1 or self.n_orbits < 1:
            raise DomainError("n_steps and n_orbits must be >= 1")
        if self.initial_law not in ("unit", "Y"):
            raise DomainError("initial_law must be 'unit' or 'Y'")
        if self.alpha <= 0:
            raise DomainError("alpha must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def initial_points(self) -> np.ndarray:
        streams = np.random.SeedSequence(self.seed).spawn(self.n_orbits)
        u = np.array([np.random.Generator(np.random.Philox(s)).random() for s in streams])
        return u if self.initial_law == "unit" else 0.5 + 0.5 * u


@numba.njit(cache=True, nogil=True)
def _advance(x, alpha, b, out):
    """Write ``len(out)`` successive states starting at x; return next state and floor hits."""
    hits = 0
    for t in range(out.size):
        out[t] = x
        if x <= 0.5:
            x = _f1(x, alpha, b)
            if x < FLOOR:
                x = FLOOR
                hits += 1
        else:
            x = 2.0 * x - 1.0
            if x < FLOOR:
                x = FLOOR
                hits += 1
    return x, hits


@numba.njit(cache=True, nogil=True)
def _skip(x, alpha, b, n):
    for _ in range(n):
        if x <= 0.5:
            x = _f1(x, alpha, b)
            if x < FLOOR:
                x = FLOOR
        else:
            x = 2.0 * x - 1.0
            if x < FLOOR:
                x = FLOOR
    return x


@dataclass
class EnsembleRun:
    """Raw per-orbit accumulators at each checkpoint.

    ``sums[o, j, c]`` is the sum of potential j over the first ``checkpoints[c]``
    iterates of orbit o; ``near_zero[o, c]`` counts iterates in ``[0, radius)``.
    """

    config: OrbitEnsembleConfig
    checkpoints: np.ndarray
    sums: np.ndarray = field(repr=False)
    near_zero: np.ndarray = field(repr=False)
    radius: float | None
    hist: np.ndarray | None = field(repr=False)
    floor_hits: np.ndarray = field(repr=False)

    def averages(self, j: int = 0, c: int = -1) -> np.ndarray:
        return self.sums[:, j, c] / self.checkpoints[c]

    def occupation(self, c: int = -1) -> np.ndarray:
        return self.near_zero[:, c] / self.checkpoints[c]


def _one_orbit(x0, cfg, b, funcs, radius, bins, ckpts):
    x = _skip(float(x0), cfg.alpha, b, cfg.burn_in)
    nf = len(funcs)
    sums = np.zeros((nf, ckpts.size))
    near = np.zeros(ckpts.size)
    hist = np.zeros(bins, dtype=np.int64) if bins else None
    run = np.zeros(nf)
    cnt = 0
    done = 0
    hits = 0
    buf = np.empty(cfg.block)
    for c, stop in enumerate(ckpts):
        while done < stop:
            m = int(min(cfg.block, stop - done))
            out = buf[:m]
            x, h = _advance(x, cfg.alpha, b, out)
            hits += h
            for j, f in enumerate(funcs):
                run[j] += float(np.sum(f(out)))
            if radius is not None:
                cnt += int(np.count_nonzero(out < radius))
            if bins:
                idx = np.minimum((out * bins).astype(np.int64), bins - 1)
                hist += np.bincount(idx, minlength=bins)
            done += m
        sums[:, c] = run
        near[c] = cnt
    return sums, near, hist, hits


def run_ensemble(cfg: OrbitEnsembleConfig, phis=(), radius: float | None = None,
                 bins: int = 0, checkpoints=None) -> EnsembleRun:
    """Iterate every orbit once and accumulate all requested statistics.

    Parameters
    ----------
    cfg : OrbitEnsembleConfig
    phis : sequence of callables
        Vectorized potentials; their raw values are summed.
    radius : float, optional
        Count iterates in ``[0, radius)``.
    bins : int
        If positive, histogram of the iterates over that many equal cells.
    checkpoints : sequence of int, optional
        Step counts at which the accumulators are recorded; always includes
        ``n_steps``.
    """
    b = 2.0**cfg.alpha
    ck = {cfg.n_steps} if checkpoints is None else set(int(c) for c in checkpoints) | {cfg.n_steps}
    ckpts = np.array(sorted(c for c in ck if 0 < c <= cfg.n_steps), dtype=np.int64)
    if radius is not None and not 0.0 < radius <= 1.0:
        raise DomainError("radius must lie in (0, 1]")
    funcs = [p.evaluate if hasattr(p, "evaluate") else p for p in phis]
    x0 = cfg.initial_points()

    def work(i):
        return _one_orbit(x0[i], cfg, b, funcs, radius, bins, ckpts)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(work, range(cfg.n_orbits)))
    else:
        results = [work(i) for i in range(cfg.n_orbits)]
    sums = np.stack([r[0] for r in results])
    near = np.stack([r[1] for r in results])
    hist = np.stack([r[2] for r in results]) if bins else None
    hits = np.array([r[3] for r in results])
    # radius 1 covers every state, including the endpoint
    if radius == 1.0:
        near = np.broadcast_to(ckpts.astype(float), near.shape).copy()
    return EnsembleRun(cfg, ckpts, sums, near, radius, hist, hits)


@dataclass(frozen=True)
class BirkhoffResult:
    """Ensemble statistics of per-orbit time averages."""

    mean: float
    std_error: float
    median: float
    values: np.ndarray = field(repr=False)
    floor_hits: int = 0

    def to_dict(self, with_values=False):
        d = {"mean": self.mean, "std_error": self.std_error, "median": self.median,
             "floor_hits": self.floor_hits}
        if with_values:
            d["values"] = self.values.tolist()
        return d


def _stats(values, hits=0):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return BirkhoffResult(float(v.mean()), se, float(np.median(v)), v, int(np.sum(hits)))


def birkhoff_average(cfg: OrbitEnsembleConfig, phi) -> BirkhoffResult:
    """Ensemble mean and standard error of ``(1/n) sum phi(f^i x)``."""
    run = run_ensemble(cfg, [phi])
    return _stats(run.averages(0), run.floor_hits)


def occupation_near_zero(cfg: OrbitEnsembleConfig, radius: float) -> BirkhoffResult:
    """Fraction of time spent in ``[0, radius)``."""
    run = run_ensemble(cfg, (), radius=radius)
    return _stats(run.occupation(), run.floor_hits)


def cell_histogram(cfg: OrbitEnsembleConfig, bins: int = 64):
    """Per-cell occupation frequencies: ensemble mean and standard error per cell."""
    run = run_ensemble(cfg, (), bins=bins)
    freq = run.hist / cfg.n_steps
    se = freq.std(axis=0, ddof=1) / math.sqrt(cfg.n_orbits) if cfg.n_orbits > 1 else None
    return freq.mean(axis=0), se


def esslim_demo(phi, alpha_grid, n_schedule, n_orbits: int = 16, seed: int = 0,
                inner_targets: dict | None = None, analytic_target: float | None = None,
                threads: int = 1, burn_in: int = 1000):
    """Centered, rescaled Birkhoff averages ``(A_n phi - phi(0)) / (alpha - 1)``.

    For every alpha the ensemble is run once up to ``max(n_schedule)`` with
    checkpoints at the schedule.  Returns a list of row dicts with the ensemble
    median, mean and standard error of the quotient, and the distance of the
    median to ``inner_targets[alpha]`` and to ``analytic_target`` when given.
    """
    rows = []
    phi0 = float(phi.value_at_zero) if hasattr(phi, "value_at_zero") else float(phi(np.zeros(1))[0])
    n_max = int(max(n_schedule))
    for i, a in enumerate(alpha_grid):
        if not a < 1.0:
            raise DomainError("alpha grid must lie below 1")
        cfg = OrbitEnsembleConfig(float(a), n_max, n_orbits, seed + i, burn_in=burn_in,
                                  threads=threads)
        run = run_ensemble(cfg, [phi], checkpoints=n_schedule)
        for c, n in enumerate(run.checkpoints):
            q = (run.sums[:, 0, c] / n - phi0) / (a - 1.0)
            st = _stats(q)
            row = {"alpha": float(a), "n": int(n), "median": st.median, "mean": st.mean,
                   "std_error": st.std_error}
            if inner_targets is not None and a in inner_targets:
                row["inner_target"] = float(inner_targets[a])
                row["gap_inner"] = abs(st.median - inner_targets[a])
            if analytic_target is not None:
                row["analytic_target"] = float(analytic_target)
                row["gap_analytic"] = abs(st.median - analytic_target)
            rows.append(row)
    return rows


def config_dict(cfg: OrbitEnsembleConfig) -> dict:
    return asdict(cfg)

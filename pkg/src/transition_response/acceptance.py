"""End-to-end acceptance checks, shared by ``transition-response reproduce`` and the tests.

Each check returns a :class:`CheckResult` with a one-line summary.  Numbered
checks are the release criteria, at their stated tolerances.  Checks with a
letter suffix are supplementary: either the same quantity against a corrected
reference, so a red numbered line can be read next to its green counterpart,
or a related invariant evaluated at the same scale.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .density_solver import solve_density, ulam_oracle
from .induced_system import InducedSystem
from .lsv_maps import MapParams, check_y_asymptotics, y_sequence
from .orbit_sim import OrbitEnsembleConfig, run_ensemble
from .response import (
    PushforwardMeasure,
    alpha_point,
    build_response_curve,
    builtin_potential,
    calibrated_potential,
    one_sided_derivative,
    phy_integral,
    srb_integral,
    srb_integral_pushforward_oracle,
    srb_integrals,
    transition_constants,
)
from .tail_analysis import abel_identity, fit_tail, tail_mass, zeta

__all__ = ["CheckResult", "AcceptanceRun", "CHECKS", "run_checks", "format_line"]

FIT_WINDOW = (1000, 100_000)
J_RANGE = range(4, 11)


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return {"key": self.key, "title": self.title, "passed": self.passed,
                "summary": self.summary, "details": self.details, "seconds": self.seconds}


def format_line(r: CheckResult) -> str:
    return f"{'PASS' if r.passed else 'FAIL'}  [{r.key:>3}] {r.title}: {r.summary}"


def _rel(a, b):
    return abs(a - b) / abs(b)


class AcceptanceRun:
    """Holds the shared expensive pieces (response curves, ensembles) of one run."""

    def __init__(self, seed: int = 0, threads: int = 1, n_steps: int = 10**7,
                 n_orbits: int = 64):
        self.seed = seed
        self.threads = threads
        self.n_steps = n_steps
        self.n_orbits = n_orbits
        self.grid = [1.0 - 2.0**-j for j in J_RANGE]

    @functools.cached_property
    def potentials(self):
        return {n: builtin_potential(n) for n in ("x", "x2", "cos2pi_m1")}

    @functools.cached_property
    def curves(self):
        cs = build_response_curve(list(self.potentials.values()), self.grid,
                                  fit_window=FIT_WINDOW)
        return dict(zip(self.potentials, cs))

    @functools.cached_property
    def derivatives(self):
        return {k: one_sided_derivative(c) for k, c in self.curves.items()}

    @functools.cached_property
    def constants(self):
        return transition_constants(fit_window=FIT_WINDOW)

    @functools.cached_property
    def ensembles(self):
        x = self.potentials["x"]
        out = {}
        for a in (0.8, 1.25):
            cfg = OrbitEnsembleConfig(a, self.n_steps, self.n_orbits, self.seed,
                                      threads=self.threads)
            out[a] = run_ensemble(cfg, [x], radius=0.05, bins=64 if a < 1 else 0)
        return out


# --------------------------------------------------------------------------


def check_1(run):
    rows = {}
    ok = True
    for a in (0.5, 0.8, 1.0, 1.25):
        p = MapParams.lsv(a)
        rep = check_y_asymptotics(y_sequence(p, 100_000), window=(10_000, 100_000))
        good = rep.max_scaled_deviation <= 0.02 and rep.residual_slope is not None \
            and rep.residual_slope < 0
        ok &= good
        rows[a] = {"max_dev": rep.max_scaled_deviation, "slope": rep.residual_slope}
    worst = max(r["max_dev"] for r in rows.values())
    return ok, f"max |y_n (a b n)^(1/a) - 1| = {worst:.2e} on [1e4, 1e5], slopes " + \
        ", ".join(f"{r['slope']:.2f}" for r in rows.values()), rows


def check_2(run):
    rows = {}
    ok = True
    for a in (0.8, 1.0, 1.25):
        p = MapParams.lsv(a)
        sys = InducedSystem(p, k_max=10_000)
        d = solve_density(sys, grid_size=1024, tol=1e-10, second_start=True)
        gaps = [ulam_oracle(p, cells=c).l1_distance(d) for c in (1024, 2048, 4096)]
        ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
        good = (d.residual <= 1e-10 and d.bounds[0] > 0 and d.second_start_gap <= 1e-9
                and gaps[-1] <= 5e-3 and all(1.5 <= r <= 2.5 for r in ratios))
        ok &= good
        rows[a] = {"residual": d.residual, "min": d.bounds[0], "second_start_gap":
                   d.second_start_gap, "ulam_gaps": gaps, "refinement_ratios": ratios,
                   "h_half": d.at_half}
    return ok, "; ".join(
        f"a={a}: res {r['residual']:.1e}, L1@4096 {r['ulam_gaps'][-1]:.1e}, "
        f"ratios {r['refinement_ratios'][0]:.2f}/{r['refinement_ratios'][1]:.2f}"
        for a, r in rows.items()), rows


@functools.lru_cache(maxsize=None)
def _tail_profiles():
    out = {}
    for a in (0.6, 0.8, 1.0, 1.25):
        pt = alpha_point(a)
        out[a] = fit_tail(pt.density, y_sequence(pt.sys.params, FIT_WINDOW[1]), FIT_WINDOW)
    return out


def _tail_check(use_half_slope):
    rows = {}
    ok = True
    for a, prof in _tail_profiles().items():
        ref = prof.predicted_c_half_slope if use_half_slope else prof.predicted_c
        e_gap = _rel(prof.fitted_exponent, 1.0 / a)
        c_gap = _rel(prof.fitted_c, ref)
        ok &= e_gap <= 0.02 and c_gap <= 0.03
        rows[a] = {"exponent": prof.fitted_exponent, "exponent_gap": e_gap,
                   "c_fit": prof.fitted_c, "c_ref": ref, "c_gap": c_gap}
    summ = ", ".join(f"a={a}: v gap {r['exponent_gap']:.1%}, c/c_ref {r['c_fit'] / r['c_ref']:.3f}"
                     for a, r in rows.items())
    return ok, summ, rows


def check_3(run):
    return _tail_check(use_half_slope=True)


def check_3b(run):
    return _tail_check(use_half_slope=False)


def check_4(run):
    js = list(range(4, 9))
    vals = []
    for j in js:
        a = 1.0 - 2.0**-j
        vals.append((1.0 / a - 1.0) * alpha_point(a).kac.total)
    d = np.diff(vals)
    ratios = (d[1:] / d[:-1]).tolist()
    c1 = run.constants.c1
    gap = _rel(vals[-1], c1)
    z2 = abs(zeta(2.0) - math.pi**2 / 6)
    s = np.linspace(1.001, 1.1, 12)
    pole = np.abs((s - 1.0) * np.array([zeta(float(x)) for x in s]) - 1.0) / (s - 1.0)
    ok = (all(abs(r - 0.5) <= 0.1 for r in ratios) and gap <= 0.05 and z2 <= 1e-12
          and float(pole.max()) <= 2.0)
    return ok, (f"(1/a-1)K = {vals[-1]:.4f} vs c1 {c1:.4f} (gap {gap:.2%}), "
                f"difference ratios {', '.join(f'{r:.3f}' for r in ratios)}, "
                f"|zeta(2)-pi^2/6| = {z2:.1e}, max |(s-1)zeta(s)-1|/(s-1) = {pole.max():.3f}"), \
        {"values": vals, "ratios": ratios, "c1": c1, "gap": gap, "zeta2_err": z2,
         "pole_ratio_max": float(pole.max())}


def check_5(run):
    phis = [builtin_potential(n) for n in ("x", "x2", "sqrt")]
    rows = []
    ok = True
    for a in (0.8, 0.9, 1.0):
        pt = alpha_point(a)
        main = srb_integrals(pt.density, pt.sys, phis)
        meas = PushforwardMeasure(pt.density, pt.sys)
        for phi, m in zip(phis, main):
            o = srb_integral_pushforward_oracle(pt.density, pt.sys, phi, measure=meas)
            diff = abs(m.value - o.value)
            tot = m.bound + o.bound
            good = diff <= tot and tot <= 1e-3 * abs(m.value)
            ok &= good
            rows.append({"alpha": a, "phi": phi.name, "main": m.value, "oracle": o.value,
                         "diff": diff, "bounds": tot, "ok": good})
    worst = max(r["diff"] / r["bounds"] for r in rows)
    wb = max(r["bounds"] / abs(r["main"]) for r in rows)
    return ok, f"max diff/bounds = {worst:.2f}, max bounds/value = {wb:.1e} over 9 cases", \
        {"cases": rows}


def check_6(run):
    ok = True
    rows = {}
    for name, c in run.curves.items():
        dist = np.abs(c.r_srb - c.srb_at_one)
        inc = np.abs(np.diff(c.r_srb))
        good = bool(np.all(np.diff(inc) < 0) and np.all(np.diff(dist) < 0)
                    and np.all(np.diff(np.abs(c.r_phy)) < 0))
        ok &= good
        rows[name] = {"r_srb": c.r_srb, "srb_at_one": c.srb_at_one,
                      "r_phy": c.r_phy, "increments": inc}
    x = rows["x"]
    return ok, (f"phi=x: |S(a)-S(1)| {abs(x['r_srb'][0] - x['srb_at_one']):.2e} -> "
                f"{abs(x['r_srb'][-1] - x['srb_at_one']):.2e}, R_phy {x['r_phy'][0]:.3e} -> "
                f"{x['r_phy'][-1]:.3e}"), rows


def _deriv_check(run, half_slope):
    rows = {}
    ok = True
    for name, est in run.derivatives.items():
        gap = est.relative_gap_half_slope if half_slope else est.relative_gap
        tgt = est.analytic_target_half_slope if half_slope else est.analytic_target
        ok &= gap is not None and gap <= 0.05
        rows[name] = {"extrapolate": est.richardson_extrapolate, "target": tgt, "gap": gap}
    return ok, ", ".join(f"{k}: {r['extrapolate']:.4f} vs {r['target']:.4f} ({r['gap']:.1%})"
                         for k, r in rows.items()), rows


def check_7(run):
    """Target ``-8/rho_1(1/2) * S(1)``."""
    return _deriv_check(run, half_slope=True)


def check_7b(run):
    """Target ``-S(1)/c_1`` with the fitted tail constant."""
    return _deriv_check(run, half_slope=False)


def check_8(run):
    s_x = run.curves["x"].srb_at_one
    s_x2 = run.curves["x2"].srb_at_one
    beta = s_x / s_x2
    cal = build_response_curve(calibrated_potential(beta), run.grid, fit_window=FIT_WINDOW)
    d_cal = one_sided_derivative(cal).richardson_extrapolate
    d_x = run.derivatives["x"].richardson_extrapolate
    calib = abs(cal.srb_at_one) / abs(s_x)
    ratio = abs(d_cal) / abs(d_x)
    ok = calib <= 1e-6 and ratio <= 1e-2
    return ok, (f"beta = {beta:.10f}, |S_cal(1)|/|S_x(1)| = {calib:.1e}, "
                f"derivative ratio {ratio:.1e}"), \
        {"beta": beta, "srb_cal": cal.srb_at_one, "calibration": calib,
         "derivative_cal": d_cal, "derivative_x": d_x, "ratio": ratio}


def check_9(run):
    x = run.potentials["x"]
    e08 = run.ensembles[0.8]
    v = e08.averages()
    se = v.std(ddof=1) / math.sqrt(v.size)
    pt = alpha_point(0.8)
    phy = phy_integral(x, srb_integral(pt.density, pt.sys, x), pt.kac, 0.8)
    z08 = abs(v.mean() - phy) / se
    e125 = run.ensembles[1.25]
    occ = e125.occupation().mean()
    w = e125.averages()
    se2 = w.std(ddof=1) / math.sqrt(w.size)
    z125 = abs(w.mean()) / se2
    ok = z08 <= 3 and occ >= 0.99 and z125 <= 3
    return ok, (f"a=0.8: mean {v.mean():.5f} vs phy {phy:.5f} ({z08:.1f} SE); "
                f"a=1.25: occupation {occ:.4f}, mean x {w.mean():.4f} ({z125:.1f} SE from 0)"), \
        {"mean_08": v.mean(), "se_08": se, "phy_08": phy, "z_08": z08,
         "occupation_125": occ, "mean_125": w.mean(), "se_125": se2, "z_125": z125,
         "seed": run.seed, "n_steps": run.n_steps, "n_orbits": run.n_orbits}


def check_9c(run):
    """Alpha = 0.8: 64-cell occupation frequencies against normalized nu masses."""
    e = run.ensembles[0.8]
    pt = alpha_point(0.8)
    m = PushforwardMeasure(pt.density, pt.sys)
    edges = np.linspace(0.0, 1.0, 65)
    nu = np.array([m.mass(edges[i], edges[i + 1]) for i in range(64)]) / pt.kac.total
    f = e.hist / run.n_steps
    se = f.std(axis=0, ddof=1) / math.sqrt(f.shape[0])
    z = np.abs(f.mean(axis=0) - nu) / se
    occ = e.occupation()
    occ_z = abs(occ.mean() - m.mass(0.0, 0.05) / pt.kac.total) / (occ.std(ddof=1)
                                                                   / math.sqrt(occ.size))
    ok = bool(np.all(z <= 3) and occ_z <= 3)
    return ok, (f"max cell deviation {z.max():.2f} SE over 64 cells, occupation of "
                f"[0, 0.05) {occ_z:.2f} SE from nu-mass"), \
        {"z": z, "nu": nu, "occupation_z": occ_z}


def check_9b(run):
    """Alpha = 1.25 trend: occupation rises and the mean of x falls along n."""
    x = run.potentials["x"]
    cfg = OrbitEnsembleConfig(1.25, run.n_steps, 16, run.seed + 1, threads=run.threads)
    ck = [run.n_steps // 100, run.n_steps // 10, run.n_steps]
    e = run_ensemble(cfg, [x], radius=0.05, checkpoints=ck)
    occ = [float(e.occupation(c).mean()) for c in range(len(e.checkpoints))]
    mx = [float(e.averages(0, c).mean()) for c in range(len(e.checkpoints))]
    ok = all(np.diff(occ) > 0) and all(np.diff(mx) < 0)
    return ok, "occupation " + " -> ".join(f"{o:.3f}" for o in occ) + "; mean x " + \
        " -> ".join(f"{m:.4f}" for m in mx), {"checkpoints": ck, "occupation": occ, "mean": mx}


def check_10(run):
    pt = alpha_point(0.8)
    t = tail_mass(pt.density, pt.sys.yseq, np.arange(pt.sys.yseq.n_max + 1))
    abel = abel_identity(t)
    kac_ulps = 0.0
    for c in run.curves.values():
        for r_srb, K, r_phy, a in zip(c.r_srb, c.kac, c.r_phy, c.alphas):
            kac_ulps = max(kac_ulps, abs(r_phy * K - r_srb) / np.spacing(abs(r_srb)))
    p1 = alpha_point(1.0)
    shift_ulps = 0.0
    for name in ("x", "x2", "cos2pi_m1"):
        phi = builtin_potential(name)
        base = srb_integral(p1.density, p1.sys, phi, k_max=20_000).value
        for cst in (0.3, -2.5, 1e3):
            s = srb_integral(p1.density, p1.sys, phi.shifted(cst), k_max=20_000).value
            shift_ulps = max(shift_ulps, abs(s - base) / np.spacing(abs(base)))
    ok = abel.ulps <= 4 and kac_ulps <= 4 and shift_ulps <= 4
    return ok, (f"Abel {abel.ulps:.0f} ulp, Kac rearrangement {kac_ulps:.1f} ulp, "
                f"shift invariance {shift_ulps:.0f} ulp"), \
        {"abel_ulps": abel.ulps, "kac_ulps": kac_ulps, "shift_ulps": shift_ulps}


CHECKS = {
    "1": ("y-sequence asymptotics", check_1),
    "2": ("induced fixed point and Ulam oracle", check_2),
    "3": ("tail expansion, reference h(1/2)/2/(a b)^(1/a)", check_3),
    "3b": ("tail expansion, reference h(1/2)/(a b)^(1/a)", check_3b),
    "4": ("Kac sum pole and zeta", check_4),
    "5": ("SRB integral, branch sum vs pushforward", check_5),
    "6": ("continuity at the transition", check_6),
    "7": ("one-sided derivative, target -8 S(1)/rho_1(1/2)", check_7),
    "7b": ("one-sided derivative, target -S(1)/c_1", check_7b),
    "8": ("differentiability criterion, calibrated potential", check_8),
    "9": ("orbit ensembles vs physical measure", check_9),
    "9b": ("alpha = 1.25 ensemble trend toward delta_0", check_9b),
    "9c": ("alpha = 0.8 empirical distribution vs nu", check_9c),
    "10": ("algebraic identities", check_10),
}


def run_checks(keys=None, run: AcceptanceRun | None = None, log=None) -> list[CheckResult]:
    """Run the selected checks (all by default) in order and return their results."""
    run = run or AcceptanceRun()
    out = []
    for key in (keys or list(CHECKS)):
        title, fn = CHECKS[key]
        t0 = time.perf_counter()
        passed, summary, details = fn(run)
        res = CheckResult(key, title, bool(passed), summary, details,
                          time.perf_counter() - t0)
        out.append(res)
        if log is not None:
            log(format_line(res))
    return out

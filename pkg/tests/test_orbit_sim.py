import numpy as np
import pytest

from transition_response.errors import DomainError
from transition_response.orbit_sim import (
    OrbitEnsembleConfig,
    birkhoff_average,
    cell_histogram,
    esslim_demo,
    occupation_near_zero,
    run_ensemble,
)
from transition_response.response import builtin_potential


def test_config_validation():
    with pytest.raises(DomainError):
        OrbitEnsembleConfig(0.8, 0, 4)
    with pytest.raises(DomainError):
        OrbitEnsembleConfig(0.8, 10, 4, initial_law="gauss")
    cfg = OrbitEnsembleConfig(0.8, 10, 4, initial_law="Y")
    assert np.all(cfg.initial_points() >= 0.5)


def test_constant_potential_exactly_one():
    r = birkhoff_average(OrbitEnsembleConfig(0.9, 50_000, 4, seed=1), builtin_potential("const"))
    assert np.all(r.values == 1.0)
    assert r.mean == 1.0


def test_radius_one_is_whole_space():
    r = occupation_near_zero(OrbitEnsembleConfig(1.1, 10_000, 3), 1.0)
    assert np.all(r.values == 1.0)


def test_bad_radius():
    with pytest.raises(DomainError):
        occupation_near_zero(OrbitEnsembleConfig(1.1, 100, 1), 0.0)


def test_deterministic_bitwise():
    cfg = OrbitEnsembleConfig(0.8, 200_000, 4, seed=99)
    x = builtin_potential("x")
    a = run_ensemble(cfg, [x], radius=0.1, bins=16)
    b = run_ensemble(cfg, [x], radius=0.1, bins=16)
    np.testing.assert_array_equal(a.sums, b.sums)
    np.testing.assert_array_equal(a.hist, b.hist)


def test_threads_do_not_change_results():
    x = builtin_potential("x")
    a = run_ensemble(OrbitEnsembleConfig(0.8, 100_000, 4, seed=5), [x])
    b = run_ensemble(OrbitEnsembleConfig(0.8, 100_000, 4, seed=5, threads=2), [x])
    np.testing.assert_array_equal(a.sums, b.sums)


def test_seeds_differ():
    x = builtin_potential("x")
    a = birkhoff_average(OrbitEnsembleConfig(0.8, 10_000, 2, seed=1), x)
    b = birkhoff_average(OrbitEnsembleConfig(0.8, 10_000, 2, seed=2), x)
    assert not np.array_equal(a.values, b.values)


def test_checkpoints_consistent():
    x = builtin_potential("x")
    cfg = OrbitEnsembleConfig(0.8, 100_000, 2, seed=7)
    full = run_ensemble(cfg, [x], checkpoints=[1000, 50_000])
    short = run_ensemble(OrbitEnsembleConfig(0.8, 50_000, 2, seed=7), [x])
    assert full.checkpoints.tolist() == [1000, 50_000, 100_000]
    np.testing.assert_allclose(full.sums[:, 0, 1], short.sums[:, 0, -1], rtol=1e-12)


def test_no_floor_hits_in_practice():
    r = run_ensemble(OrbitEnsembleConfig(1.5, 500_000, 2, seed=3), ())
    assert r.floor_hits.sum() == 0


def test_histogram_frequencies_sum_to_one():
    freq, se = cell_histogram(OrbitEnsembleConfig(0.8, 100_000, 4, seed=11), 16)
    assert freq.sum() == pytest.approx(1.0, rel=1e-14)
    assert se.shape == (16,) and np.all(se > 0)


def test_delta0_regime_occupation_increases():
    cfg = OrbitEnsembleConfig(1.25, 10**6, 8, seed=4)
    r = run_ensemble(cfg, [builtin_potential("x")], radius=0.05,
                     checkpoints=[10**4, 10**5])
    occ = [r.occupation(c).mean() for c in range(3)]
    assert occ[0] < occ[1] < occ[2]
    means = [r.averages(0, c).mean() for c in range(3)]
    assert means[0] > means[1] > means[2] > 0


def test_esslim_const_zero():
    rows = esslim_demo(builtin_potential("const"), [0.9], [1000, 5000], n_orbits=3)
    assert len(rows) == 2
    assert all(r["median"] == 0.0 and r["mean"] == 0.0 for r in rows)


def test_esslim_median_and_mean_agree():
    rows = esslim_demo(builtin_potential("x"), [0.9], [10**5, 10**6], n_orbits=16, seed=8,
                       inner_targets={0.9: -1.4}, analytic_target=-1.92)
    last = rows[-1]
    assert abs(last["median"] - last["mean"]) <= 3 * last["std_error"]
    assert "gap_inner" in last and "gap_analytic" in last


def test_esslim_rejects_alpha_at_one():
    with pytest.raises(DomainError):
        esslim_demo(builtin_potential("x"), [1.0], [100])

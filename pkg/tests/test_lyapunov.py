import math
import os

import numpy as np
import pytest

from skewshift.cocycle import fundamental_matrix
from skewshift.lyapunov import (
    BudgetError,
    LyapunovEstimate,
    Sampler,
    almost_invariance_defect,
    counter_uniform,
    lyapunov_all_kinds,
    lyapunov_finite,
    lyapunov_profile,
    sample_log_norms,
    subadditivity_check,
)
from skewshift.torus import TorusPoint

from conftest import constant_model, make_model


def test_counter_uniform_deterministic():
    idx = np.arange(1000, dtype=np.uint64)
    u1 = counter_uniform(42, idx)
    u2 = counter_uniform(42, idx)
    assert np.array_equal(u1, u2)
    assert not np.array_equal(u1, counter_uniform(43, idx))


def test_counter_uniform_order_free():
    # value at index i never depends on which other indices are drawn
    full = counter_uniform(7, np.arange(100, dtype=np.uint64))
    part = counter_uniform(7, np.array([17, 3, 99], dtype=np.uint64))
    assert part[0] == full[17]
    assert part[1] == full[3]
    assert part[2] == full[99]


def test_counter_uniform_range_and_mean():
    u = counter_uniform(0, np.arange(50_000, dtype=np.uint64))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_sampler_grid_points():
    s = Sampler.grid(4)
    x, y = s.points()
    assert len(x) == 16
    # midpoint rule
    assert sorted(set(np.round(x, 12))) == pytest.approx(
        [0.125, 0.375, 0.625, 0.875])


def test_sampler_mc_total():
    s = Sampler.monte_carlo(500, seed=3)
    x, y = s.points()
    assert len(x) == 500
    assert np.all((x >= 0) & (x < 1)) and np.all((y >= 0) & (y < 1))


def test_sample_log_norms_matches_pointwise(tame_model):
    s = Sampler.grid(3)
    vals = sample_log_norms(tame_model, 0.3, 10, s)
    x, y = s.points()
    for i in range(s.total):
        cp = fundamental_matrix(tame_model, TorusPoint(float(x[i]), float(y[i])),
                                0.3, 10)
        assert vals[i] == pytest.approx(cp.log_norm / 10, abs=1e-8)


def test_constant_cocycle_exact():
    # a=1, v=0, E=3: L_n -> log((3+sqrt 5)/2), the top eigenvalue of [[3,-1],[1,0]]
    m = constant_model(a0=1.0, v0=0.0, lam=0.0)
    gamma = math.log((3 + math.sqrt(5)) / 2)
    for n in (10, 100, 1000):
        est = lyapunov_finite(m, 3.0, n, Sampler.grid(2))
        assert abs(est.value - gamma) < 2.0 / n


def test_budget_refusal(tame_model):
    with pytest.raises(BudgetError) as ei:
        lyapunov_finite(tame_model, 0.0, 10**6, Sampler.monte_carlo(10**9, 0),
                        budget=1e6)
    assert ei.value.cost > ei.value.budget


def test_grid_estimate_has_zero_se(tame_model):
    est = lyapunov_finite(tame_model, 0.1, 8, Sampler.grid(8))
    assert est.std_error == 0.0
    assert est.kind == "plain"


def test_mc_estimate_reproducible(tame_model):
    s = Sampler.monte_carlo(2000, seed=11)
    e1 = lyapunov_finite(tame_model, 0.1, 12, s)
    e2 = lyapunov_finite(tame_model, 0.1, 12, s)
    assert e1.value == e2.value
    assert e1.std_error == e2.std_error
    assert e1.std_error > 0


def test_mc_agrees_with_grid(tame_model):
    g = lyapunov_finite(tame_model, 0.1, 12, Sampler.grid(64))
    mc = lyapunov_finite(tame_model, 0.1, 12, Sampler.monte_carlo(4000, 5))
    assert abs(mc.value - g.value) < 6 * mc.std_error + 1e-3


def test_thread_invariance(tame_model):
    s = Sampler.monte_carlo(3000, seed=2)
    v1 = lyapunov_finite(tame_model, 0.2, 15, s, threads=1).value
    v4 = lyapunov_finite(tame_model, 0.2, 15, s, threads=4).value
    assert v1 == v4
    g1 = sample_log_norms(tame_model, 0.2, 15, Sampler.grid(32), threads=1)
    g3 = sample_log_norms(tame_model, 0.2, 15, Sampler.grid(32), threads=3)
    assert np.array_equal(g1, g3)


def test_all_kinds_consistent(tame_model):
    m = tame_model
    out = lyapunov_all_kinds(m, 0.0, 20, Sampler.grid(16))
    assert set(out) == {"plain", "unimodular", "a_normalized"}
    # L^a - L^u = D = mean log|a| (integrated normalization identity)
    assert out["a_normalized"].value - out["unimodular"].value == pytest.approx(
        m.log_avg_a, abs=5e-3)
    # unimodular can only exceed plain by half the det magnitude, tiny here
    assert abs(out["unimodular"].value - out["plain"].value) < 0.05


def test_profile_running_infimum(tame_model):
    ests, running = lyapunov_profile(tame_model, 0.0, [5, 10, 20, 40],
                                     Sampler.grid(16))
    assert len(ests) == len(running) == 4
    vals = [e.value for e in ests]
    assert running == [min(vals[: i + 1]) for i in range(4)]
    assert all(b <= a + 1e-12 for a, b in zip(running, running[1:]))


def test_profile_requires_ascending(tame_model):
    with pytest.raises(ValueError):
        lyapunov_profile(tame_model, 0.0, [10, 5], Sampler.grid(4))


def test_subadditivity_exact_on_matched_grid(tame_model):
    out = subadditivity_check(tame_model, 0.3, 6, 6, Sampler.grid(32))
    assert out["lhs"] <= out["rhs"] + 1e-9
    assert out["slack"] >= -1e-9


def test_almost_invariance_zero_at_k0(tame_model):
    assert almost_invariance_defect(tame_model, 0.1, 10, 0, Sampler.grid(8)) == 0.0


def test_almost_invariance_small(tame_model):
    # averaging over K shifts moves the Birkhoff-type average by O(K/n)
    d = almost_invariance_defect(tame_model, 0.1, 50, 3, Sampler.grid(16))
    assert 0.0 <= d < 3 * 2 * tame_model.scaling_factor(0.1) / 50


def test_estimate_to_json(tame_model):
    est = lyapunov_finite(tame_model, 0.1, 5, Sampler.grid(4))
    rec = est.to_json()
    assert rec["n"] == 5
    assert rec["value"] == est.value
    assert rec["model_hash"] == tame_model.model_hash

import csv
import math

import numpy as np
import pytest
from scipy import stats

from cbss.levy_path import (
    PathConfig,
    SamplePath,
    Scheme,
    endpoint_and_max,
    first_passage_down,
    first_passage_up,
    jump_independence_check,
    overshoot_conditional_tail,
    passage_times,
    running_max,
    simulate_path,
    small_jump_variance_rate,
    write_path_csv,
)
from cbss.stable import StableParams, levy_tail_mass, sample_stable, stable_cdf


def test_scheme_parse():
    assert Scheme.parse("grid") is Scheme.GridIncrements
    assert Scheme.parse("HYBRID") is Scheme.HybridJumpDiffusion
    assert Scheme.parse("hybridjumpdiffusion") is Scheme.HybridJumpDiffusion
    with pytest.raises(ValueError):
        Scheme.parse("euler")


def test_resolve_rates():
    p = StableParams(1.0)
    code, dt, h, rate, sig2 = PathConfig(dt=0.1, jump_threshold=10.0).resolve(p)
    assert (dt, h) == (0.1, 10.0)
    assert rate == pytest.approx(0.2)  # two tails of mass 1/10 each
    assert sig2 == pytest.approx(small_jump_variance_rate(p, 10.0)) == pytest.approx(20.0)
    # default threshold follows the time step
    assert PathConfig(dt=0.01).threshold(StableParams(0.5)) == pytest.approx(1e-4)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": -1.0}, {"jump_threshold": 0.0}, {"scheme": "bad"}])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        PathConfig(**kw)


def test_sample_path_validation():
    with pytest.raises(ValueError):
        SamplePath([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        SamplePath([0.5, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        SamplePath([0.0, 1.0, 1.0], [0.0, 1.0, 2.0])


def test_zero_horizon_path(rng):
    path = simulate_path(StableParams(1.0), PathConfig(), 3.0, 0.0, rng)
    assert path.times.tolist() == [0.0]
    assert path.values.tolist() == [3.0]
    assert running_max(path, 0.0) == 3.0


def test_big_jump_count(rng):
    # h = 10 at alpha = 1 gives 0.2 big jumps per unit time
    p = StableParams(1.0)
    cfg = PathConfig(dt=0.5, jump_threshold=10.0)
    counts = [simulate_path(p, cfg, 0.0, 50.0, rng).big_jumps.shape[0] for _ in range(400)]
    z = (np.mean(counts) - 10.0) / math.sqrt(10.0 / 400)
    assert abs(z) < 4
    assert stats.poisson(10.0).cdf(np.max(counts)) > 0.5


def test_hybrid_jumps_exact_at_nodes(rng):
    p = StableParams(0.7)
    cfg = PathConfig(dt=0.1, jump_threshold=0.5)
    path = simulate_path(p, cfg, 1.0, 20.0, rng)
    assert path.start == 1.0 and path.horizon == pytest.approx(20.0)
    assert path.big_jumps.shape[0] > 0
    assert np.all(np.abs(path.big_jumps[:, 1]) > 0.5)
    left = path.left_limits()
    pos = np.searchsorted(path.times, path.big_jumps[:, 0])
    np.testing.assert_allclose(path.values[pos] - left[pos], path.big_jumps[:, 1], rtol=1e-12, atol=1e-12)


def test_jump_interarrivals_exponential(rng):
    p = StableParams(1.2)
    cfg = PathConfig(dt=1.0, jump_threshold=0.3)
    path = simulate_path(p, cfg, 0.0, 400.0, rng)
    rate = cfg.resolve(p)[3]
    gaps = np.diff(np.concatenate(([0.0], path.big_jumps[:, 0])))
    assert stats.kstest(gaps, "expon", args=(0, 1 / rate)).pvalue > 0.001


def test_grid_marginal_matches_stable_law(rng):
    p = StableParams(1.3)
    final, _ = endpoint_and_max(p, PathConfig(dt=0.25, scheme="grid"), 2.0, 4000, rng)
    assert stats.kstest(final, lambda v: stable_cdf(p, 2.0, v)).pvalue > 0.001


@pytest.mark.parametrize("alpha", [0.8, 1.5])
def test_hybrid_matches_grid(alpha, rng):
    p = StableParams(alpha)
    a, _ = endpoint_and_max(p, PathConfig(dt=0.005), 1.0, 20_000, rng)
    b = sample_stable(p, 1.0, rng, 20_000)
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_grid_path_thin(rng):
    path = simulate_path(StableParams(1.0), PathConfig(dt=0.1, scheme="grid"), 0.0, 1.0, rng)
    assert path.times.size == 11
    coarse = path.thin(3)
    assert coarse.times.tolist() == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    np.testing.assert_array_equal(coarse.values, path.values[[0, 3, 6, 9, 10]])


def test_running_max_properties(rng):
    path = simulate_path(StableParams(1.1), PathConfig(dt=0.05), -2.0, 10.0, rng)
    ts = np.linspace(0, 10, 41)
    m = [running_max(path, t) for t in ts]
    assert m[0] == -2.0
    assert np.all(np.diff(m) >= 0)
    assert m[-1] == path.values.max()
    with pytest.raises(ValueError):
        running_max(path, 10.5)


def test_reflection_inequality(rng):
    p = StableParams(1.0)
    n = 20_000
    final, top = endpoint_and_max(p, PathConfig(dt=0.01), 1.0, n, rng)
    assert np.all(top >= np.maximum(final, 0.0))
    for y in (2.0, 5.0):
        lhs, rhs = np.mean(top >= y), 2 * np.mean(final >= y)
        assert lhs - rhs < 3 * math.sqrt((lhs + rhs) / n)


def test_passage_scaling(rng):
    # the hybrid scheme with h = dt^(1/alpha) is self-similar, so the
    # scaled passage times have exactly the same law
    alpha, A = 1.2, 8.0
    p = StableParams(alpha)
    dt = 0.002
    t1, _, c1 = passage_times(p, PathConfig(dt=dt), 0.0, 1.0, 50.0, 5000, rng)
    t8, _, c8 = passage_times(p, PathConfig(dt=dt * A**alpha), 0.0, A, 50.0 * A**alpha, 5000, rng)
    assert stats.ks_2samp(t1[~c1], t8[~c8] / A**alpha).pvalue > 0.001


def test_passage_symmetry(rng):
    p = StableParams(0.9)
    cfg = PathConfig(dt=0.01)
    up, pu, cu = passage_times(p, cfg, 0.0, 3.0, 100.0, 5000, rng, direction=1)
    dn, pd, cd = passage_times(p, cfg, 0.0, -3.0, 100.0, 5000, rng, direction=-1)
    assert np.all(pu[~cu] >= 3.0) and np.all(pd[~cd] <= -3.0)
    assert stats.ks_2samp(up, dn).pvalue > 0.001


def test_single_passage_records(rng):
    p = StableParams(1.0)
    r = first_passage_up(p, PathConfig(), 0.0, 2.0, 1e4, rng)
    assert not r.censored and r.position >= 2.0 and r.tau > 0
    r = first_passage_down(p, PathConfig(), 0.0, -2.0, 1e4, rng)
    assert r.position <= -2.0
    r = first_passage_up(p, PathConfig(), 0.0, 1e9, 1.0, rng)
    assert r.censored and r.tau == 1.0


def test_short_time_passage_rate(rng):
    p = StableParams(1.0)
    eps, A = 1e-3, 2.0
    n = 1_000_000
    tau, _, cens = passage_times(p, PathConfig(dt=eps / 10, jump_threshold=A / 10), 0.0, A, eps, n, rng)
    k = int(np.sum(~cens & (tau < eps)))
    target = levy_tail_mass(p, A)
    assert abs(k / n / eps / target - 1) < 0.1 + 3 / math.sqrt(k)


@pytest.mark.parametrize("alpha,expected", [(1.0, 0.5), (0.5, 2**-0.5)])
def test_overshoot_tail(alpha, expected, rng):
    r = overshoot_conditional_tail(StableParams(alpha), 1.0, 2.0, 1e-3, 1_000_000, rng)
    assert not r.wide_ci
    assert abs(r.p_hat - expected) < 3 * r.std_err + 0.01
    assert float(r) == r.p_hat


def test_overshoot_edge_cases(rng):
    p = StableParams(1.0)
    assert overshoot_conditional_tail(p, 1.0, 1.0, 1e-3, 10, rng).p_hat == 1.0
    with pytest.raises(ValueError):
        overshoot_conditional_tail(p, 2.0, 1.0, 1e-3, 10, rng)
    few = overshoot_conditional_tail(p, 1.0, 2.0, 1e-3, 1000, rng)
    assert few.wide_ci


def test_jump_independence(rng):
    rep = jump_independence_check(StableParams(1.0), (5.0, math.inf), 20_000, rng)
    assert rep.p_value > 0.001 and not rep.insufficient
    assert rep.size_ks_pvalue > 0.001
    assert rep.table.sum() == 20_000


def test_jump_independence_constant_functional(rng):
    rep = jump_independence_check(StableParams(1.0), (-math.inf, -5.0), 2000, rng,
                                  functional=lambda size, f, nu: np.ones_like(size))
    assert rep.p_value == 1.0


@pytest.mark.parametrize("J", [(1.0, 1.0), (-1.0, 2.0), (0.001, 1.0)])
def test_jump_interval_rejected(J, rng):
    with pytest.raises(ValueError):
        jump_independence_check(StableParams(1.0), J, 100, rng, config=PathConfig(dt=0.01, jump_threshold=0.01))


def test_csv_round_trip(tmp_path, rng):
    path = simulate_path(StableParams(1.0), PathConfig(dt=0.1, jump_threshold=0.5), 0.0, 5.0, rng)
    f = tmp_path / "path.csv"
    side = write_path_csv(path, f)
    with open(f) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time", "value"]
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], path.values)
    with open(side) as fh:
        jumps = list(csv.reader(fh))[1:]
    assert len(jumps) == path.big_jumps.shape[0]


def test_max_points_censors(rng):
    path = simulate_path(StableParams(1.0), PathConfig(dt=0.01), 0.0, 100.0, rng, max_points=500)
    assert path.censored and path.times.size <= 500

import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from cbss.branching import (
    Fate,
    population_at,
    progeny_pmf,
    progeny_tail,
    sample_progeny,
    sample_tree,
    skeleton_stats,
    survival_prob_exact,
    write_tree_csv,
)


def _progeny_oracle(nmax):
    # xi = 1 with prob 1/2, otherwise 1 + xi' + xi''; exact recursive convolution
    p = [Fraction(0)] * (nmax + 1)
    p[1] = Fraction(1, 2)
    for n in range(2, nmax + 1):
        p[n] = Fraction(1, 2) * sum(p[i] * p[n - 1 - i] for i in range(1, n - 1))
    return p


def test_pmf_matches_recursion():
    p = _progeny_oracle(61)
    for k in range(30):
        assert progeny_pmf(k) == pytest.approx(float(p[2 * k + 1]), rel=1e-12)
        assert p[2 * k + 2] == 0
    assert [progeny_pmf(k) for k in range(3)] == pytest.approx([0.5, 0.125, 0.0625], rel=1e-14)


def test_tail_matches_recursion():
    p = _progeny_oracle(61)
    for m in range(1, 60):
        exact = 1 - float(sum(p[:m]))
        assert progeny_tail(m) == pytest.approx(exact, rel=1e-11)
    assert progeny_tail(0) == 1.0


def test_tail_asymptotics():
    for m in (10**4, 10**6, 10**8, 10**12):
        assert math.sqrt(m) * progeny_tail(m) == pytest.approx(math.sqrt(2 / math.pi), rel=2 / m)


def test_survival_exact():
    assert survival_prob_exact(0.0) == 1.0
    assert survival_prob_exact(2.0) == 0.5
    assert survival_prob_exact(math.inf) == 0.0
    with pytest.raises(ValueError):
        survival_prob_exact(-1.0)


def test_survival_statistics(rng):
    n = 100_000
    times = np.array([1.0, 2.0, 10.0])
    # counts up to the time cap are exact, and the cap keeps huge trees cheap
    pop, ext, prog, capped = skeleton_stats(times, n, rng, time_cap=10.0)
    for k, t in enumerate(times):
        p = survival_prob_exact(t)
        assert abs(np.mean(pop[:, k] > 0) - p) < 3.5 * math.sqrt(p * (1 - p) / n)
        # alive at t exactly when extinction happens after t
        np.testing.assert_array_equal(pop[:, k] > 0, ext > t)
    assert np.all(prog % 2 == 1)


def test_criticality(rng):
    n = 100_000
    pop, *_ = skeleton_stats(np.array([0.5, 5.0]), n, rng, time_cap=5.0)
    for k in range(2):
        assert abs(pop[:, k].mean() - 1.0) < 3.5 * pop[:, k].std(ddof=1) / math.sqrt(n)


def test_progeny_sampler_statistics(rng):
    n = 200_000
    xi = sample_progeny(n, rng)
    assert np.all(xi % 2 == 1)
    for k, m in enumerate((1, 3, 5)):
        p = progeny_pmf(k)
        assert abs(np.mean(xi == m) - p) < 3.5 * math.sqrt(p * (1 - p) / n)
    band = [math.sqrt(m) * np.mean(xi >= m) for m in (10, 100, 1000, 10_000)]
    assert all(0.6 < b < 1.0 for b in band)


def test_inverse_and_walk_agree(rng):
    a = sample_progeny(20_000, rng, cap=10**5, method="inverse")
    b = sample_progeny(20_000, rng, cap=10**5, method="walk")
    assert a.max() <= 10**5 + 1 and b.max() <= 10**5 + 1
    edges = np.array([1, 2, 4, 6, 20, 100, 1000, 10**5 + 2])
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    assert stats.chi2_contingency(np.vstack([ca, cb]))[1] > 0.001


def test_progeny_cap(rng):
    xi = sample_progeny(10_000, rng, cap=11)
    assert set(np.unique(xi)) <= {1, 3, 5, 7, 9, 11, 12}
    assert np.mean(xi == 12) == pytest.approx(progeny_tail(12), abs=0.02)
    with pytest.raises(ValueError):
        sample_progeny(10, rng, method="bisect")


def test_tree_invariants(rng):
    for _ in range(50):
        tree = sample_tree(rng)
        assert not tree.caps_hit
        ids = {nd.id for nd in tree.nodes}
        assert tree.progeny == len(tree.nodes) == len(ids)
        assert tree.nodes[0].parent is None and tree.nodes[0].birth_time == 0.0
        births = [nd.birth_time for nd in tree.nodes]
        assert births == sorted(births)
        by_id = {nd.id: nd for nd in tree.nodes}
        for nd in tree.nodes:
            kids = tree.children(nd.id)
            assert len(kids) == (2 if nd.fate is Fate.Split else 0)
            for c in kids:
                assert c.birth_time == by_id[nd.id].death_time
        assert tree.extinction_time == max(nd.death_time for nd in tree.nodes)
        assert population_at(tree, 0.0) == 1
        assert population_at(tree, tree.extinction_time) == 0


def test_population_counts_consistent(rng):
    tree = sample_tree(rng)
    while tree.progeny < 15:
        tree = sample_tree(rng)
    change = {}
    for nd in tree.nodes:
        change[nd.birth_time] = change.get(nd.birth_time, 0) + 1
        change[nd.death_time] = change.get(nd.death_time, 0) - 1
    alive = 0
    for t in sorted(change):
        alive += change[t]
        assert population_at(tree, t) == alive


def test_tree_caps(rng):
    tree = sample_tree(rng, progeny_cap=5)
    while not tree.caps_hit:
        tree = sample_tree(rng, progeny_cap=5)
    assert tree.progeny <= 5 and math.isfinite(tree.horizon)
    population_at(tree, tree.horizon)
    with pytest.raises(ValueError):
        population_at(tree, tree.horizon + 1.0)
    timed = sample_tree(rng, time_cap=1e-9)
    assert timed.progeny == 1
    assert timed.caps_hit == (timed.nodes[0].fate is Fate.Split)


def test_tree_csv(tmp_path, rng):
    tree = sample_tree(rng)
    f = tmp_path / "tree.csv"
    write_tree_csv(tree, f)
    with open(f) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == tree.progeny
    assert rows[0]["parent"] == ""
    assert {r["fate"] for r in rows} <= {"split", "die"}

import itertools
import math

import numpy as np
import pytest

from tritrain.analysis import (ScoredModelPool, enumerate_bucket_ensembles, exact_best_of_mean,
                               exact_expected_test, expected_test_best_of, read_score_table,
                               simulate_best_of, summarize, write_distribution)


def enum_best_of(pool, k):
    subsets = list(itertools.combinations(pool, k))
    return sum(max(s) for s in subsets) / len(subsets)


def enum_expected_test(dev, test, k):
    total = 0.0
    subsets = list(itertools.combinations(range(len(dev)), k))
    for s in subsets:
        best = min(s, key=lambda i: (-dev[i], i))
        total += test[best]
    return total / len(subsets)


def test_pairs_example():
    assert exact_best_of_mean([1, 2, 3, 4], 2) == pytest.approx(10 / 3)
    dist = simulate_best_of([1, 2, 3, 4], 2, 60_000, seed=1)
    se = dist.summary["sd"] / math.sqrt(60_000)
    assert abs(dist.mean - 10 / 3) < 3 * se


def test_degenerate_pools():
    assert set(simulate_best_of([75.0] * 5, 3, 100, 0).samples) == {75.0}
    assert set(simulate_best_of([1, 5, 3], 3, 50, 0).samples) == {5.0}


def test_samples_within_pool_range(rng):
    pool = [rng.uniform(60, 80) for _ in range(20)]
    s = simulate_best_of(pool, 5, 5000, 3).samples
    assert s.min() >= min(pool) and s.max() <= max(pool)
    assert len(s) == 5000


def test_with_replacement_allows_k_above_pool():
    assert len(simulate_best_of([1, 2], 5, 10, 0, replace=True).samples) == 10
    with pytest.raises(ValueError):
        simulate_best_of([1, 2], 5, 10, 0)
    with pytest.raises(ValueError):
        simulate_best_of([], 1, 10, 0)
    with pytest.raises(ValueError):
        simulate_best_of([1], 1, 0, 0)


def test_same_seed_same_samples():
    a = simulate_best_of(list(range(30)), 4, 1000, 9).samples
    b = simulate_best_of(list(range(30)), 4, 1000, 9).samples
    assert np.array_equal(a, b)


def test_exact_oracles_match_enumeration(rng):
    for _ in range(30):
        n = rng.randint(1, 7)
        k = rng.randint(1, n)
        dev = [float(rng.randint(0, 4)) for _ in range(n)]  # plenty of ties
        test = [rng.uniform(0, 100) for _ in range(n)]
        assert exact_best_of_mean(dev, k) == pytest.approx(enum_best_of(dev, k), abs=1e-12)
        assert exact_expected_test(dev, test, k) == pytest.approx(
            enum_expected_test(dev, test, k), abs=1e-9)


def test_expected_test_monte_carlo_near_exact(rng):
    dev = [70.0, 71.0, 71.0, 72.5, 69.0, 70.2]
    test = [68.0, 70.0, 65.0, 71.0, 60.0, 69.5]
    exact = enum_expected_test(dev, test, 3)
    mc = expected_test_best_of(dev, test, 3, 100_000, seed=2)
    assert mc == pytest.approx(exact, abs=0.1)
    assert expected_test_best_of(dev, test, 3, 1, 0, exact=True) == pytest.approx(exact)


def test_dev_equals_test_matches_simulation():
    pool = [70.0, 71.5, 69.0, 73.0, 72.0]
    dist = simulate_best_of(pool, 3, 20_000, seed=4)
    assert expected_test_best_of(pool, pool, 3, 20_000, seed=4) == pytest.approx(dist.mean, abs=1e-9)


def test_k1_is_test_mean():
    dev, test = [1.0, 2.0, 3.0], [10.0, 20.0, 33.0]
    assert expected_test_best_of(dev, test, 1, 10, 0) == pytest.approx(21.0, abs=1e-12)


def test_misaligned_scores():
    with pytest.raises(ValueError):
        expected_test_best_of([1, 2], [1], 1, 10, 0)


def test_bucket_enumeration():
    pool = ScoredModelPool([[(f"m{l}-{k}", float(k)) for k in range(48)] for l in range(3)])
    buckets = pool.buckets(0)
    assert [len(b) for b in buckets] == [3] * 16
    assert sorted(m for b in buckets for m in b) == sorted(pool.learners[0])
    triples = enumerate_bucket_ensembles(pool, seed=1)
    assert len(triples) == 4096
    assert triples == enumerate_bucket_ensembles(pool, seed=1)
    # buckets are ordered by score, so bucket b of learner 0 holds scores 3b..3b+2
    assert all(int(t[0].split("-")[1]) // 3 == i // 256 for i, t in enumerate(triples))


def test_bucket_enumeration_degenerate_and_small(caplog):
    full = ScoredModelPool([[(k, float(k)) for k in range(16)]] * 3)
    assert set(enumerate_bucket_ensembles(full, 0)) == set(itertools.product(range(16), repeat=3))
    small = ScoredModelPool([[(k, float(k)) for k in range(4)]] * 3)
    assert len(enumerate_bucket_ensembles(small, 0)) == 64
    assert "buckets" in caplog.text
    with pytest.raises(ValueError):
        enumerate_bucket_ensembles(ScoredModelPool([[]]), 0)


def test_score_table_and_distribution_files(tmp_path):
    table = tmp_path / "scores.tsv"
    table.write_text("model\tdev\ttest\na\t70.5\t69.0\nb\t71.0\t70.0\n")
    ids, dev, test = read_score_table(table)
    assert ids == ["a", "b"] and dev == [70.5, 71.0] and test == [69.0, 70.0]
    table.write_text("a\t70.5\nb\t71.0\n")
    assert read_score_table(table)[2] is None
    out = tmp_path / "dist.tsv"
    write_distribution(simulate_best_of(dev, 1, 100, 0), out, bins=5)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# n\t100")
    assert len([l for l in lines if not l.startswith("#")]) == 6


def test_summarize():
    s = summarize([1.0, 2.0, 3.0])
    assert s["mean"] == 2.0 and s["p50"] == 2.0 and s["sd"] == 1.0

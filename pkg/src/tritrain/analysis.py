"""Baseline-distribution machinery for comparing against model selection.

Tri-training picks the best of ``T + 1`` candidate ensembles by development
LAS, so a fair baseline also gets to pick the best of ``T + 1`` draws from a
large pool of baseline ensembles. The functions here build that pool and
simulate the selection.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PERCENTILES = (5, 25, 50, 75, 95)
CHUNK_CELLS = 4_000_000  # random keys drawn per vectorised chunk


@dataclass
class ScoredModelPool:
    """Per-learner lists of ``(model_id, dev_las)``."""

    learners: list[list[tuple[Hashable, float]]]
    bucket_count: int = 16

    def buckets(self, learner: int, bucket_count: int | None = None) -> list[list[tuple]]:
        models = sorted(self.learners[learner], key=lambda m: (m[1], str(m[0])))
        k = bucket_count or self.bucket_count
        return [list(part) for part in _split_even(models, k)]


def _split_even(items: list, k: int) -> list[list]:
    """Contiguous runs whose sizes differ by at most one (larger runs first)."""
    q, r = divmod(len(items), k)
    out, start = [], 0
    for b in range(k):
        size = q + (1 if b < r else 0)
        out.append(items[start:start + size])
        start += size
    return out


@dataclass
class ScoreDistribution:
    samples: np.ndarray
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.summary:
            self.summary = summarize(self.samples)

    @property
    def mean(self) -> float:
        return self.summary["mean"]

    def histogram(self, bins: int = 50) -> list[tuple[float, float, int]]:
        counts, edges = np.histogram(self.samples, bins=bins)
        return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def summarize(samples) -> dict:
    samples = np.asarray(samples, dtype=float)
    # fsum keeps constant samples free of rounding drift
    mean = math.fsum(samples.tolist()) / samples.size
    sd = math.sqrt(math.fsum(((samples - mean) ** 2).tolist()) / (samples.size - 1)) \
        if samples.size > 1 else 0.0
    out = {"n": int(samples.size), "mean": mean, "sd": sd}
    for p, v in zip(PERCENTILES, np.percentile(samples, PERCENTILES)):
        out[f"p{p}"] = float(v)
    return out


def enumerate_bucket_ensembles(pool: ScoredModelPool, seed: int) -> list[tuple]:
    """One model triple (per learner tuple) for every combination of buckets."""
    if not pool.learners or any(len(m) == 0 for m in pool.learners):
        raise ValueError("model pool is empty")
    k = pool.bucket_count
    smallest = min(len(m) for m in pool.learners)
    if smallest < k:
        logger.warning("only %d models for some learner; using %d buckets instead of %d",
                       smallest, smallest, k)
        k = smallest
    buckets = [pool.buckets(i, k) for i in range(len(pool.learners))]
    rng = np.random.default_rng(seed)
    out = []
    for combo in itertools.product(range(k), repeat=len(buckets)):
        triple = []
        for learner, b in enumerate(combo):
            bucket = buckets[learner][b]
            triple.append(bucket[int(rng.integers(len(bucket)))][0])
        out.append(tuple(triple))
    return out


def _sample_indices(rng: np.random.Generator, n: int, k: int, reps: int,
                    replace: bool = False):
    """Yield (chunk_reps, k) index arrays, ``reps`` rows in total."""
    chunk = max(1, CHUNK_CELLS // max(n, 1))
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        if replace:
            idx = rng.integers(0, n, size=(m, k))
        elif k == n:
            idx = np.broadcast_to(np.arange(n), (m, n))
        else:
            keys = rng.random((m, n))
            idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
        yield idx
        done += m


def _check(n: int, k: int, reps: int, replace: bool) -> None:
    if n == 0:
        raise ValueError("score pool is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not replace and k > n:
        raise ValueError(f"cannot draw k={k} scores without replacement from {n}")
    if reps < 1:
        raise ValueError("reps must be >= 1")


def simulate_best_of(scores: Sequence[float], k: int, reps: int, seed: int,
                     replace: bool = False) -> ScoreDistribution:
    """Distribution of the maximum of ``k`` scores drawn from the pool."""
    pool = np.asarray(scores, dtype=float)
    _check(pool.size, k, reps, replace)
    rng = np.random.default_rng(seed)
    parts = [pool[idx].max(axis=1) for idx in _sample_indices(rng, pool.size, k, reps, replace)]
    return ScoreDistribution(np.concatenate(parts))


def expected_test_best_of(dev_scores: Sequence[float], test_scores: Sequence[float], k: int,
                          reps: int, seed: int, replace: bool = False,
                          exact: bool = False) -> float:
    """Mean test score of the dev-best model over repeated draws of ``k`` models.

    Dev ties go to the lowest pool index. ``exact=True`` returns the closed-form
    expectation (sampling without replacement) instead of a simulation. With
    ``k == 1`` selection is trivial and the closed form is always used.
    """
    dev = np.asarray(dev_scores, dtype=float)
    test = np.asarray(test_scores, dtype=float)
    if dev.shape != test.shape:
        raise ValueError("dev and test score lists are not aligned")
    _check(dev.size, k, max(reps, 1) if exact else reps, replace)
    if k == 1:
        return float(math.fsum(test.tolist()) / test.size)
    if exact:
        if replace:
            raise ValueError("exact expectation is only available without replacement")
        return exact_expected_test(dev, test, k)
    rng = np.random.default_rng(seed)
    total = 0.0
    for idx in _sample_indices(rng, dev.size, k, reps, replace):
        idx = np.sort(idx, axis=1)
        best = np.argmax(dev[idx], axis=1)
        total += float(test[idx[np.arange(idx.shape[0]), best]].sum())
    return total / reps


def exact_best_of_mean(scores: Sequence[float], k: int) -> float:
    """E[max of k drawn without replacement] from order statistics.

    With the pool sorted ascending, the j-th smallest (1-based) is the maximum
    in C(j-1, k-1) of the C(n, k) subsets.
    """
    s = sorted(scores)
    n = len(s)
    return sum(math.comb(j - 1, k - 1) * s[j - 1] for j in range(k, n + 1)) / math.comb(n, k)


def exact_expected_test(dev_scores: Sequence[float], test_scores: Sequence[float], k: int) -> float:
    """Closed form of :func:`expected_test_best_of` without replacement.

    Rank models by selection priority (dev descending, index ascending); the
    model at priority position j (0-based) wins iff it is drawn and none of the
    j models ahead of it are, which happens in C(n-1-j, k-1) of C(n, k) subsets.
    """
    n = len(dev_scores)
    order = sorted(range(n), key=lambda i: (-dev_scores[i], i))
    total = math.comb(n, k)
    return sum(math.comb(n - 1 - j, k - 1) * float(test_scores[i])
               for j, i in enumerate(order)) / total


def read_score_table(path) -> tuple[list[str], list[float], list[float] | None]:
    """TSV rows of ``model_id, dev_las[, test_las]``; a header row is optional."""
    ids, dev, test = [], [], []
    with open(path, encoding="utf-8") as f:
        for row in csv.reader(f, delimiter="\t"):
            if not row or row[0].startswith("#"):
                continue
            try:
                d = float(row[1])
            except (IndexError, ValueError):
                if not ids:
                    continue  # header
                raise ValueError(f"bad score row {row!r}") from None
            ids.append(row[0])
            dev.append(d)
            test.append(float(row[2]) if len(row) > 2 and row[2] else None)
    if any(t is None for t in test):
        return ids, dev, None
    return ids, dev, test


def write_distribution(dist: ScoreDistribution, path, bins: int = 50) -> None:
    """Summary block followed by histogram rows, tab separated."""
    with open(path, "w", encoding="utf-8") as f:
        for key, value in dist.summary.items():
            f.write(f"# {key}\t{value}\n")
        f.write("bin_low\tbin_high\tcount\n")
        for lo, hi, c in dist.histogram(bins):
            f.write(f"{lo:.6f}\t{hi:.6f}\t{c}\n")

"""Shared generators for randomized tests.

The channel generators build mixtures with a shared positive floor row, so
the target budget holds by construction; tests still audit the results
rather than trusting the algebra here.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ctxldp.core import Channel, Distribution, Partition

REPO_ROOT = Path(__file__).resolve().parents[1]
SYNTHETIC_CHECKINS = REPO_ROOT / "data" / "synthetic_checkins.tsv"


def random_distribution(rng: np.random.Generator, k: int, zeros: bool = False) -> Distribution:
    w = rng.random(k)
    if zeros and k > 2:
        w[rng.integers(0, k)] = 0.0
    return Distribution(w / w.sum())


def random_channel(rng: np.random.Generator, k_in: int, k_out: int) -> Channel:
    rows = rng.random((k_in, k_out)) + 0.02
    return Channel(rows / rows.sum(axis=1, keepdims=True))


def _floor_mixture(rng: np.random.Generator, eps: float, k_out: int) -> tuple[np.ndarray, float]:
    v = rng.random(k_out) + 0.5
    v /= v.sum()
    lam_max = math.expm1(eps) * v.min() / (1.0 + math.expm1(eps) * v.min())
    return v, lam_max * rng.uniform(0.3, 1.0)


def random_eldp_channel(rng: np.random.Generator, k: int, eps: float, k_out: int | None = None) -> Channel:
    """A channel whose attained budgets are all <= eps (uniform regime)."""
    k_out = k_out or k
    v, lam = _floor_mixture(rng, eps, k_out)
    P = rng.random((k, k_out))
    P /= P.sum(axis=1, keepdims=True)
    return Channel((1.0 - lam) * v + lam * P)


def random_high_low_channel(
    rng: np.random.Generator, k: int, s: int, eps: float, k_out: int | None = None
) -> Channel:
    """Rows 0..s-1 satisfy the high-low pattern: each is <= e^eps times every row.

    Sensitive rows are floor mixtures; non-sensitive rows keep at least the
    same floor mass (1 - lam) on the shared row, which dominates the
    sensitive rows' excursions.
    """
    k_out = k_out or k
    v, lam = _floor_mixture(rng, eps, k_out)
    P = rng.random((s, k_out))
    P /= P.sum(axis=1, keepdims=True)
    D = rng.random((k - s, k_out))
    D /= D.sum(axis=1, keepdims=True)
    rows = np.vstack([(1.0 - lam) * v + lam * P, lam * D + (1.0 - lam) * v])
    return Channel(rows)


def random_partition(rng: np.random.Generator, k: int) -> Partition:
    m = int(rng.integers(1, k + 1))
    cuts = np.sort(rng.choice(np.arange(1, k), size=m - 1, replace=False)) if m > 1 else np.array([], dtype=int)
    sizes = np.diff(np.concatenate([[0], cuts, [k]]))
    return Partition.from_sizes(sizes.tolist())


def integer_partitions(k: int):
    """All multisets of positive integers summing to k, non-increasing order."""
    if k == 0:
        yield []
        return
    def rec(remaining, max_part):
        if remaining == 0:
            yield []
            return
        for first in range(min(remaining, max_part), 0, -1):
            for rest in rec(remaining - first, first):
                yield [first] + rest
    yield from rec(k, k)


def all_subsets(k_out: int):
    """All subsets of range(k_out) as index arrays (2^k_out of them)."""
    for mask in range(1 << k_out):
        yield [y for y in range(k_out) if mask >> y & 1]

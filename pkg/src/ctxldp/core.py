"""Shared domain types for locally private estimation.

Probability vectors, privatization channels (row-stochastic matrices),
pairwise privacy-budget matrices, domain partitions, Sylvester-Hadamard
matrices, and the distances used to score estimates.

Conventions used throughout the package:

* domain symbols, channel outputs, Hadamard rows/columns, and block ids
  are all 0-based;
* an unbounded privacy budget is ``math.inf`` (saturating arithmetic,
  never a large finite float);
* exact-algebra checks use an absolute tolerance of 1e-9 on probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PROB_ATOL = 1e-9

__all__ = [
    "PROB_ATOL",
    "Distribution",
    "RawEstimate",
    "Channel",
    "PrivacyMatrix",
    "Partition",
    "SensitiveSet",
    "HadamardMatrix",
    "sylvester",
    "tv_distance",
    "l2_sq_distance",
    "apply_channel",
    "uniform_budgets",
    "high_low_budgets",
    "block_budgets",
    "validate_triangle",
    "distribution_to_dict",
    "distribution_from_dict",
    "channel_to_dict",
    "channel_from_dict",
    "privacy_matrix_to_dict",
    "privacy_matrix_from_dict",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Distribution:
    """A probability vector over ``k`` symbols (weights >= 0, sum 1)."""

    weights: np.ndarray

    def __init__(self, weights):
        w = _frozen_array(weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > PROB_ATOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, x: int) -> "Distribution":
        w = np.zeros(k)
        w[x] = 1.0
        return cls(w)


@dataclass(frozen=True)
class RawEstimate:
    """An unconstrained estimate vector; entries may be negative or exceed 1."""

    values: np.ndarray

    def __init__(self, values):
        v = _frozen_array(values)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a non-empty vector")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.size


def _vec(obj) -> np.ndarray:
    if isinstance(obj, Distribution):
        return obj.weights
    if isinstance(obj, RawEstimate):
        return obj.values
    return np.asarray(obj, dtype=float)


@dataclass(frozen=True)
class Channel:
    """A privatization channel: row ``x`` is the output distribution given input ``x``.

    ``labels`` optionally names each output symbol, e.g. ``(block, index)``
    pairs for block-structured mechanisms.
    """

    rows: np.ndarray
    labels: tuple | None

    def __init__(self, rows, labels: Sequence | None = None):
        r = _frozen_array(rows)
        if r.ndim != 2 or r.shape[0] == 0 or r.shape[1] == 0:
            raise ValueError("rows must be a non-empty 2-d matrix")
        if np.any(r < 0):
            raise ValueError("channel entries must be non-negative")
        sums = r.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROB_ATOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"row {bad} sums to {sums[bad]!r}, expected 1")
        if labels is not None:
            labels = tuple(tuple(l) if isinstance(l, (tuple, list)) else l for l in labels)
            if len(labels) != r.shape[1]:
                raise ValueError("one label per output symbol required")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "labels", labels)

    @property
    def k_in(self) -> int:
        return self.rows.shape[0]

    @property
    def k_out(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def identity(cls, k: int) -> "Channel":
        return cls(np.eye(k))

    @classmethod
    def constant(cls, k_in: int, output: Distribution) -> "Channel":
        return cls(np.tile(output.weights, (k_in, 1)))


@dataclass(frozen=True)
class PrivacyMatrix:
    """Pairwise budgets ``eps[x, x']``: how distinguishable x may be from x'.

    Entries live in [0, inf]; the diagonal is identically 0 and ``inf``
    marks an unconstrained pair.
    """

    eps: np.ndarray

    def __init__(self, eps):
        e = _frozen_array(eps)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] == 0:
            raise ValueError("eps must be a non-empty square matrix")
        if np.any(np.isnan(e)) or np.any(e < 0):
            raise ValueError("entries must be in [0, inf]")
        if np.any(np.diag(e) != 0):
            raise ValueError("diagonal must be 0")
        object.__setattr__(self, "eps", e)

    @property
    def k(self) -> int:
        return self.eps.shape[0]


@dataclass(frozen=True)
class Partition:
    """Assignment of each of ``k`` symbols to one of ``m`` non-empty blocks."""

    block_of: np.ndarray

    def __init__(self, block_of):
        b = np.array(block_of, dtype=int)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("block_of must be a non-empty integer vector")
        m = int(b.max()) + 1
        if b.min() < 0:
            raise ValueError("block ids must be non-negative")
        counts = np.bincount(b, minlength=m)
        if np.any(counts == 0):
            raise ValueError("every block id up to max(block_of) must be used")
        b.setflags(write=False)
        object.__setattr__(self, "block_of", b)

    @property
    def k(self) -> int:
        return self.block_of.size

    @property
    def m(self) -> int:
        return int(self.block_of.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.block_of, minlength=self.m)

    def members(self, j: int) -> np.ndarray:
        """Symbols of block ``j`` in ascending order."""
        return np.flatnonzero(self.block_of == j)

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> "Partition":
        sizes = list(sizes)
        if not sizes or any(s <= 0 for s in sizes):
            raise ValueError("sizes must be positive")
        return cls(np.repeat(np.arange(len(sizes)), sizes))

    @classmethod
    def single_block(cls, k: int) -> "Partition":
        return cls(np.zeros(k, dtype=int))


@dataclass(frozen=True)
class SensitiveSet:
    """The protected subset of the domain, canonically relabeled to {0..s-1}.

    Callers with arbitrary sensitive symbols are expected to permute the
    domain so the sensitive ones come first and carry the permutation back
    at the presentation layer.
    """

    k: int
    s: int

    def __post_init__(self):
        if self.k < 1 or not (0 < self.s <= self.k):
            raise ValueError("need 1 <= s <= k")

    @property
    def members(self) -> range:
        return range(self.s)


# ---------------------------------------------------------------------------
# Hadamard matrices (Sylvester construction)


def _parity_of_and(r: int, cols: np.ndarray) -> np.ndarray:
    """Parity of popcount(r & c) for each c; 0 = even, 1 = odd."""
    return (np.bitwise_count(np.bitwise_and(cols, r)) & 1).astype(np.int64)


@dataclass(frozen=True)
class HadamardMatrix:
    """The K x K +/-1 matrix with entry(r, c) = (-1)^popcount(r & c).

    Entries are computed on demand from the bit pattern of the indices,
    so no O(K^2) storage is ever allocated.  This is exactly the matrix
    produced by the doubling recursion H_{2m} = [[H_m, H_m], [H_m, -H_m]]
    starting from H_1 = [1].
    """

    K: int

    def __post_init__(self):
        if self.K < 1 or (self.K & (self.K - 1)) != 0:
            raise ValueError(f"K must be a power of two, got {self.K}")

    def entry(self, r: int, c: int) -> int:
        self._check_index(r)
        self._check_index(c)
        return -1 if (r & c).bit_count() & 1 else 1

    def row_signs(self, r: int) -> np.ndarray:
        """Row ``r`` as a +/-1 vector of length K."""
        self._check_index(r)
        return 1 - 2 * _parity_of_and(r, np.arange(self.K, dtype=np.int64))

    def plus_set(self, r: int) -> np.ndarray:
        """Column indices carrying +1 in row ``r``; K/2 of them for r >= 1."""
        self._check_index(r)
        return np.flatnonzero(self.row_signs(r) == 1)

    def to_array(self) -> np.ndarray:
        if self.K > 4096:
            raise ValueError("refusing to materialize a Hadamard matrix this large")
        rows = np.arange(self.K, dtype=np.int64)[:, None]
        cols = np.arange(self.K, dtype=np.int64)[None, :]
        return 1 - 2 * (np.bitwise_count(np.bitwise_and(rows, cols)) & 1).astype(np.int64)

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.K:
            raise IndexError(f"index {i} out of range for K={self.K}")


def sylvester(K: int) -> HadamardMatrix:
    """Hadamard matrix of power-of-two order K."""
    return HadamardMatrix(K)


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 1 << (n - 1).bit_length()


# ---------------------------------------------------------------------------
# Distances


def tv_distance(p, q) -> float:
    """Total variation distance, 0.5 * sum |p_i - q_i|.

    Accepts raw estimates as well; on the simplex this equals the usual
    max-over-events |p(S) - q(S)|.
    """
    a, b = _vec(p), _vec(q)
    if a.shape != b.shape:
        raise ValueError("size mismatch")
    return 0.5 * float(np.abs(a - b).sum())


def l2_sq_distance(p, q) -> float:
    """Squared Euclidean distance sum (p_i - q_i)^2."""
    a, b = _vec(p), _vec(q)
    if a.shape != b.shape:
        raise ValueError("size mismatch")
    d = a - b
    return float(np.dot(d, d))


def apply_channel(Q: Channel, p: Distribution) -> Distribution:
    """Exact output distribution when the input is drawn from ``p``."""
    if Q.k_in != p.k:
        raise ValueError("channel input size does not match distribution")
    return Distribution(p.weights @ Q.rows)


# ---------------------------------------------------------------------------
# Canonical budget matrices


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0:
        raise ValueError("privacy budget must be positive")
    return eps


def uniform_budgets(k: int, eps: float) -> PrivacyMatrix:
    """Every pair of distinct symbols shares the same finite budget."""
    eps = _check_eps(eps)
    e = np.full((k, k), eps)
    np.fill_diagonal(e, 0.0)
    return PrivacyMatrix(e)


def high_low_budgets(sensitive: SensitiveSet, eps: float) -> PrivacyMatrix:
    """Finite budget only for rows in the sensitive set; others unconstrained."""
    eps = _check_eps(eps)
    k = sensitive.k
    e = np.full((k, k), math.inf)
    e[: sensitive.s, :] = eps
    np.fill_diagonal(e, 0.0)
    return PrivacyMatrix(e)


def block_budgets(partition: Partition, eps: float) -> PrivacyMatrix:
    """Finite budget inside each block, unconstrained across blocks."""
    eps = _check_eps(eps)
    b = partition.block_of
    same = b[:, None] == b[None, :]
    e = np.where(same, eps, math.inf)
    np.fill_diagonal(e, 0.0)
    return PrivacyMatrix(e)


def validate_triangle(E: PrivacyMatrix) -> list[tuple[int, int, int]]:
    """Triples (i, j, l) where eps[i,j] > eps[i,l] + eps[l,j].

    An empty list means the budget matrix is self-consistent: any channel
    meeting the (i,l) and (l,j) constraints automatically meets a bound of
    eps[i,l] + eps[l,j] on the (i,j) pair, so a tighter stated budget than
    that could never be informative.  Uses saturating inf arithmetic.
    """
    e = E.eps
    k = E.k
    bad = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            for l in range(k):
                if l == i or l == j:
                    continue
                if e[i, j] > e[i, l] + e[l, j] + 1e-12:
                    bad.append((i, j, l))
    return bad


# ---------------------------------------------------------------------------
# JSON serialization (schema shared by the CLI and test fixtures)


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ValueError(f"unrecognized numeric string {v!r}")
    return float(v)


def distribution_to_dict(p: Distribution) -> dict:
    return {"k": p.k, "weights": [float(w) for w in p.weights]}


def distribution_from_dict(d: dict) -> Distribution:
    p = Distribution(d["weights"])
    if "k" in d and int(d["k"]) != p.k:
        raise ValueError("declared k does not match weights length")
    return p


def channel_to_dict(Q: Channel) -> dict:
    d = {
        "k_in": Q.k_in,
        "k_out": Q.k_out,
        "rows": [[float(v) for v in row] for row in Q.rows],
    }
    if Q.labels is not None:
        d["labels"] = [list(l) if isinstance(l, tuple) else l for l in Q.labels]
    return d


def channel_from_dict(d: dict) -> Channel:
    Q = Channel(d["rows"], labels=d.get("labels"))
    if "k_in" in d and int(d["k_in"]) != Q.k_in:
        raise ValueError("declared k_in does not match rows")
    if "k_out" in d and int(d["k_out"]) != Q.k_out:
        raise ValueError("declared k_out does not match rows")
    return Q


def privacy_matrix_to_dict(E: PrivacyMatrix) -> dict:
    return {"k": E.k, "eps": [[_enc(v) for v in row] for row in E.eps]}


def privacy_matrix_from_dict(d: dict) -> PrivacyMatrix:
    eps = [[_dec(v) for v in row] for row in d["eps"]]
    E = PrivacyMatrix(eps)
    if "k" in d and int(d["k"]) != E.k:
        raise ValueError("declared k does not match eps shape")
    return E

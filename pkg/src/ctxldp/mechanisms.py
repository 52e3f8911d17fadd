"""Privatization mechanisms and sampling.

Builds the optimal binary channel (interpolating Warner's randomized
response and Mangat's improved response), Hadamard-response channels for
the high-low and block-structured privacy regimes, and draws privatized
outputs deterministically from seeded streams.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import Channel, Partition, SensitiveSet, next_pow2, sylvester

__all__ = [
    "optimal_binary_channel",
    "HighLowLayout",
    "BlockLayout",
    "high_low_hr_channel",
    "block_hr_channel",
    "sample_output",
    "privatize_all",
    "message_bits",
]


def optimal_binary_channel(eps12: float, eps21: float) -> Channel:
    """The 2x2 channel that is optimal under asymmetric binary budgets.

    ``eps12`` bounds how distinguishable input 0 may be from input 1 and
    ``eps21`` the reverse direction.  Both budgets bind with equality.
    Special cases are returned in their exact closed forms: equal budgets
    give Warner's randomized response, ``eps12 = inf`` gives Mangat's
    response with truthful second answer and flip probability
    ``p = exp(-eps21)``.

    ``eps21 = inf`` with finite ``eps12`` is rejected (the closed form
    needs the second direction finite); both infinite budgets degenerate
    to the identity channel, returned with a warning.
    """
    if not eps12 > 0 or not eps21 > 0:
        raise ValueError("budgets must be positive")
    if math.isinf(eps12) and math.isinf(eps21):
        warnings.warn("both budgets unbounded; returning the identity channel")
        return Channel.identity(2)
    if math.isinf(eps21):
        raise ValueError("eps21 must be finite (swap the roles of the symbols)")
    if math.isinf(eps12):
        p = math.exp(-eps21)
        return Channel([[1.0 - p, p], [0.0, 1.0]])
    if eps12 == eps21:
        w = math.exp(eps12) / (math.exp(eps12) + 1.0)
        return Channel([[w, 1.0 - w], [1.0 - w, w]])
    a = math.exp(-eps12)
    b = math.exp(eps21)
    denom = b - a
    rows = [
        [(b - 1.0) / denom, (1.0 - a) / denom],
        [a * (b - 1.0) / denom, b * (1.0 - a) / denom],
    ]
    return Channel(rows)


@dataclass(frozen=True)
class HighLowLayout:
    """Output layout of the high-low Hadamard-response channel.

    The first ``S`` outputs (S = smallest power of two > s) form the
    Hadamard part shared by all inputs; the remaining ``t = k - s``
    outputs are per-symbol flags, one for each non-sensitive input.
    Sensitive input ``x`` owns the +1 set of row ``x + 1`` of H_S (row 0
    is the all-ones row and is never assigned).
    """

    k: int
    s: int

    def __post_init__(self):
        if not 1 <= self.s < self.k:
            raise ValueError("need 1 <= s < k")

    @property
    def t(self) -> int:
        return self.k - self.s

    @property
    def S(self) -> int:
        return next_pow2(self.s + 1)

    @property
    def out_size(self) -> int:
        return self.S + self.t

    def tail_output(self, x: int) -> int:
        """The flag output owned by non-sensitive input ``x``."""
        if not self.s <= x < self.k:
            raise ValueError("not a non-sensitive symbol")
        return x + self.S - self.s

    @cached_property
    def plus_masks(self) -> np.ndarray:
        """Boolean (s, S) matrix; row x marks the +1 set of input x."""
        H = sylvester(self.S)
        return np.stack([H.row_signs(x + 1) == 1 for x in range(self.s)])


@dataclass(frozen=True)
class BlockLayout:
    """Output layout of the block Hadamard-response channel.

    Each block ``j`` of size ``k_j`` gets its own Hadamard matrix of order
    ``K_j`` (smallest power of two > k_j) and the contiguous output slice
    ``[offset_j, offset_j + K_j)``; the i-th member of the block owns the
    +1 set of row ``i + 1`` of that matrix.
    """

    partition: Partition

    @property
    def m(self) -> int:
        return self.partition.m

    @cached_property
    def block_members(self) -> list[np.ndarray]:
        return [self.partition.members(j) for j in range(self.m)]

    @cached_property
    def K(self) -> np.ndarray:
        return np.array([next_pow2(len(mem) + 1) for mem in self.block_members])

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.K)[:-1]])

    @property
    def out_size(self) -> int:
        return int(self.K.sum())

    @cached_property
    def labels(self) -> tuple:
        out = []
        for j in range(self.m):
            out.extend((j, i) for i in range(int(self.K[j])))
        return tuple(out)

    @cached_property
    def plus_masks(self) -> list[np.ndarray]:
        """Per block: boolean (k_j, K_j) matrix of +1 sets, member order."""
        masks = []
        for j in range(self.m):
            K = int(self.K[j])
            H = sylvester(K)
            masks.append(np.stack([H.row_signs(b + 1) == 1 for b in range(len(self.block_members[j]))]))
        return masks

    def locate(self, x: int) -> tuple[int, int]:
        """Map a domain symbol to (block id, rank within block)."""
        j = int(self.partition.block_of[x])
        b = int(np.searchsorted(self.block_members[j], x))
        return j, b


def high_low_hr_channel(sensitive: SensitiveSet, eps: float) -> Channel:
    """Hadamard-response channel protecting only the sensitive prefix.

    Sensitive inputs mix over the shared Hadamard outputs, boosting their
    own +1 set by a factor e^eps; non-sensitive inputs put the excess mass
    (e^eps - 1)/(e^eps + 1) on their private flag output instead.  Every
    attained ratio against a sensitive input is exactly e^eps.
    """
    if not eps > 0 or math.isinf(eps):
        raise ValueError("eps must be positive and finite")
    lay = HighLowLayout(sensitive.k, sensitive.s)
    u = math.exp(eps)
    hi = 2.0 * u / (lay.S * (u + 1.0))
    lo = 2.0 / (lay.S * (u + 1.0))
    rows = np.zeros((lay.k, lay.out_size))
    rows[: lay.s, : lay.S] = np.where(lay.plus_masks, hi, lo)
    rows[lay.s :, : lay.S] = lo
    for x in range(lay.s, lay.k):
        rows[x, lay.tail_output(x)] = (u - 1.0) / (u + 1.0)
    Q = Channel(rows)
    # one message costs at most two bits over a plain symbol
    assert message_bits(Q) <= max(1, (lay.k - 1).bit_length()) + 2
    return Q


def block_hr_channel(partition: Partition, eps: float) -> Channel:
    """Hadamard response run independently inside each block.

    Input x in block j only ever emits outputs of block j's slice, with
    its +1 set boosted by e^eps.  With a single block this is the plain
    LDP Hadamard-response baseline.  Output labels are (block, index)
    pairs.
    """
    if not eps > 0 or math.isinf(eps):
        raise ValueError("eps must be positive and finite")
    lay = BlockLayout(partition)
    u = math.exp(eps)
    rows = np.zeros((partition.k, lay.out_size))
    for j in range(lay.m):
        K = int(lay.K[j])
        off = int(lay.offsets[j])
        hi = 2.0 * u / (K * (1.0 + u))
        lo = 2.0 / (K * (1.0 + u))
        rows[lay.block_members[j], off : off + K] = np.where(lay.plus_masks[j], hi, lo)
    Q = Channel(rows, labels=lay.labels)
    assert message_bits(Q) <= max(1, (partition.k - 1).bit_length()) + 2
    return Q


def message_bits(Q: Channel) -> int:
    """Bits needed to transmit one output symbol of ``Q``."""
    return max(1, (Q.k_out - 1).bit_length())


def _row_cdfs(Q: Channel) -> np.ndarray:
    cdf = np.cumsum(Q.rows, axis=1)
    cdf[:, -1] = 1.0  # guard inverse-CDF sampling against rounding
    return cdf


def sample_output(Q: Channel, x: int, rng: np.random.Generator) -> int:
    """One draw from row ``x`` by inversion; deterministic given the rng state."""
    if not 0 <= x < Q.k_in:
        raise ValueError(f"input {x} out of range")
    cdf = np.cumsum(Q.rows[x])
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def privatize_all(Q: Channel, xs, seed) -> np.ndarray:
    """Privatize a vector of inputs with per-index derived randomness.

    The uniform variate used at position ``i`` is the i-th element of the
    stream keyed by ``seed``, so ``ys[i]`` depends only on
    ``(seed, i, xs[i])``: re-running with the same seed reproduces every
    position independently of execution order, and positions whose input
    is unchanged keep their output.
    """
    xs = np.asarray(xs, dtype=int)
    if xs.size == 0:
        return np.zeros(0, dtype=int)
    if xs.min() < 0 or xs.max() >= Q.k_in:
        raise ValueError("input symbol out of range")
    rng = np.random.default_rng(seed)
    u = rng.random(xs.size)
    cdfs = _row_cdfs(Q)
    ys = np.empty(xs.size, dtype=int)
    for x in np.unique(xs):
        idx = np.flatnonzero(xs == x)
        ys[idx] = np.searchsorted(cdfs[x], u[idx], side="right")
    return ys

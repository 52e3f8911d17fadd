"""Unbiased distribution estimators for the Hadamard-response channels.

Both estimators are affine functions of empirical output frequencies; the
same affine map applied to exact output probabilities recovers the input
distribution exactly, which is the unbiasedness oracle used by the tests.

High-low decoding, with u = e^eps and c = (u+1)/(u-1):

    mass(A)_hat = c * (freq[S-part] - 2/(u+1))
    p_hat[x]    = 2c * (freq[plus set of x] - 1/(u+1)) - mass(A)_hat   (sensitive)
    p_hat[x]    = c * freq[flag output of x]                           (non-sensitive)

Block decoding:

    p_hat[x] = 2c * (freq[plus set of x] - freq[block of x] / 2)

These invert the exact identities relating output to input probabilities:

    P(Y in S-part)        = 2/(u+1) + ((u-1)/(u+1)) * mass(A)
    P(Y in plus set of x) = 1/(u+1) + ((u-1)/(2(u+1))) * (mass(A) + p[x])
    P(Y in plus set of x) = P(block)/2 + ((u-1)/(2(u+1))) * p[x]   (block model)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import Channel, Distribution, Partition, RawEstimate, l2_sq_distance, tv_distance
from .mechanisms import BlockLayout, HighLowLayout, privatize_all

__all__ = [
    "HighLowEstimatorSpec",
    "BlockEstimatorSpec",
    "high_low_estimate",
    "block_estimate",
    "project_to_simplex",
    "exact_expected_estimate",
    "run_trial",
    "empirical_risk",
]


def _amplification(eps: float) -> float:
    u = math.exp(eps)
    return (u + 1.0) / (u - 1.0)


@dataclass(frozen=True)
class HighLowEstimatorSpec:
    """Decoder matched to ``high_low_hr_channel(SensitiveSet(k, s), eps)``."""

    k: int
    s: int
    eps: float

    @cached_property
    def layout(self) -> HighLowLayout:
        return HighLowLayout(self.k, self.s)

    @property
    def out_size(self) -> int:
        return self.layout.out_size

    def _from_output_freqs(self, freq: np.ndarray) -> np.ndarray:
        lay = self.layout
        c = _amplification(self.eps)
        u = math.exp(self.eps)
        f_spart = float(freq[: lay.S].sum())
        f_plus = lay.plus_masks @ freq[: lay.S]
        mass_a = c * (f_spart - 2.0 / (u + 1.0))
        est = np.empty(self.k)
        est[: self.s] = 2.0 * c * (f_plus - 1.0 / (u + 1.0)) - mass_a
        est[self.s :] = c * freq[lay.S :]
        return est

    def estimate_from_counts(self, counts: np.ndarray, n: int) -> RawEstimate:
        return RawEstimate(self._from_output_freqs(counts / n))

    def estimate_from_marginal(self, marginal: Distribution) -> RawEstimate:
        return RawEstimate(self._from_output_freqs(marginal.weights))


@dataclass(frozen=True)
class BlockEstimatorSpec:
    """Decoder matched to ``block_hr_channel(partition, eps)``."""

    partition: Partition
    eps: float

    @property
    def k(self) -> int:
        return self.partition.k

    @cached_property
    def layout(self) -> BlockLayout:
        return BlockLayout(self.partition)

    @property
    def out_size(self) -> int:
        return self.layout.out_size

    def _from_output_freqs(self, freq: np.ndarray) -> np.ndarray:
        lay = self.layout
        c = _amplification(self.eps)
        est = np.empty(self.k)
        for j in range(lay.m):
            off = int(lay.offsets[j])
            block_freq = freq[off : off + int(lay.K[j])]
            f_block = float(block_freq.sum())
            f_plus = lay.plus_masks[j] @ block_freq
            est[lay.block_members[j]] = 2.0 * c * (f_plus - f_block / 2.0)
        return est

    def estimate_from_counts(self, counts: np.ndarray, n: int) -> RawEstimate:
        return RawEstimate(self._from_output_freqs(counts / n))

    def estimate_from_marginal(self, marginal: Distribution) -> RawEstimate:
        return RawEstimate(self._from_output_freqs(marginal.weights))


def _counts(ys: np.ndarray, out_size: int) -> tuple[np.ndarray, int]:
    ys = np.asarray(ys, dtype=int)
    if ys.size == 0:
        raise ValueError("empty sample")
    if ys.min() < 0 or ys.max() >= out_size:
        raise ValueError("output symbol out of range for this decoder")
    return np.bincount(ys, minlength=out_size).astype(float), ys.size


def high_low_estimate(ys, spec: HighLowEstimatorSpec) -> RawEstimate:
    """Decode privatized outputs of the high-low channel."""
    counts, n = _counts(ys, spec.out_size)
    return spec.estimate_from_counts(counts, n)


def block_estimate(ys, spec: BlockEstimatorSpec) -> RawEstimate:
    """Decode privatized outputs of the block channel (global output indices)."""
    counts, n = _counts(ys, spec.out_size)
    return spec.estimate_from_counts(counts, n)


def project_to_simplex(v: RawEstimate) -> Distribution:
    """Clip negatives to zero and renormalize; uniform if nothing remains.

    At most doubles the total variation distance to any true distribution.
    """
    w = np.maximum(v.values, 0.0)
    total = float(w.sum())
    if total <= 0.0:
        return Distribution.uniform(v.k)
    return Distribution(w / total)


def exact_expected_estimate(Q: Channel, spec, p: Distribution) -> RawEstimate:
    """The estimator's exact expectation under channel Q and input ``p``.

    Feeds exact output probabilities through the decoder's affine map; for
    a matched (channel, decoder) pair this returns ``p`` itself, which is
    the unbiasedness oracle.
    """
    if Q.k_in != p.k:
        raise ValueError("channel and distribution sizes differ")
    if getattr(spec, "out_size", Q.k_out) != Q.k_out or getattr(spec, "k", Q.k_in) != Q.k_in:
        raise ValueError("decoder does not match the channel shape")
    marginal = Distribution(p.weights @ Q.rows)
    return spec.estimate_from_marginal(marginal)


_METRICS = {"tv": tv_distance, "l2sq": l2_sq_distance}


def _estimate_for(spec, ys) -> RawEstimate:
    if isinstance(spec, HighLowEstimatorSpec):
        return high_low_estimate(ys, spec)
    if isinstance(spec, BlockEstimatorSpec):
        return block_estimate(ys, spec)
    raise TypeError(f"unsupported decoder spec {type(spec).__name__}")


def run_trial(
    p: Distribution,
    Q: Channel,
    spec,
    n: int,
    seed,
    project: bool = False,
    estimator=None,
) -> tuple[float, float]:
    """One simulated round: sample n users, privatize, decode, score.

    Returns (tv, l2sq) of the estimate against ``p``.  ``seed`` may be an
    int or a ``numpy.random.SeedSequence``; inputs and privatization use
    independent child streams so either half is reproducible on its own.
    ``estimator`` overrides the decoder (a callable on the output vector),
    used by diagnostics.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ss_inputs, ss_priv = ss.spawn(2)
    rng = np.random.default_rng(ss_inputs)
    cdf = np.cumsum(p.weights)
    cdf[-1] = 1.0
    xs = np.searchsorted(cdf, rng.random(n), side="right")
    ys = privatize_all(Q, xs, ss_priv)
    if estimator is not None:
        est = estimator(ys)
    else:
        est = _estimate_for(spec, ys)
    if project and isinstance(est, RawEstimate):
        est = project_to_simplex(est)
    return tv_distance(p, est), l2_sq_distance(p, est)


def empirical_risk(
    p: Distribution,
    Q: Channel,
    spec,
    n: int,
    reps: int,
    seed,
    metric: str = "tv",
    project: bool = False,
    estimator=None,
) -> tuple[float, float]:
    """Mean and standard deviation of the estimation error over ``reps`` trials."""
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {sorted(_METRICS)}")
    if reps < 1:
        raise ValueError("need at least one repetition")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    vals = []
    for r, child in enumerate(ss.spawn(reps)):
        tv, l2 = run_trial(p, Q, spec, n, child, project=project, estimator=estimator)
        vals.append(tv if metric == "tv" else l2)
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std())

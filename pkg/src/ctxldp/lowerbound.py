"""Packing families and information diagnostics for estimation lower bounds.

A packing family is a set of distributions obtained by signed
perturbations of the uniform distribution, indexed by sign vectors
z in {+1,-1}^B.  The chi-square functional averages, over the family,
the chi-square divergence between each member's privatized output
marginal and the privatized uniform marginal; a small value certifies
that no estimator can distinguish the members quickly, which yields a
sample-complexity floor of

    (log2 |family| - log2 C_alpha) * ln 2 / chi_square.

The helpers here also verify the two explicit inequalities that bound the
chi-square functional for constraint-respecting channels: the high-low
bound (e^eps - 1) + k (1 - e^-eps) on a normalized row-difference sum,
and the block bound 8 k alpha^2 (e^eps - 1)^2 / sum_j k_j^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Channel, Distribution, Partition, apply_channel, block_budgets
from .audit import verify_eldp, _attained_matrix

__all__ = [
    "PackingFamily",
    "ChiSquareReport",
    "high_low_packing",
    "block_packing",
    "chi_square",
    "sample_complexity_floor",
    "check_claim1",
    "check_block_chi_bound",
    "binary_entropy_bits",
]

_FEAS_TOL = 1e-15
ENUM_CAP = 1 << 20


def binary_entropy_bits(x: float) -> float:
    """x log2(1/x) + (1-x) log2(1/(1-x)) for x in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie strictly between 0 and 1")
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class PackingFamily:
    """Signed perturbations of uniform: member(z) = uniform + z @ perturbations.

    ``n_bits`` is the length of the sign vector z.  Members whose weights
    leave the simplex are rejected (counted, never clipped); ``log2_size``
    is the log-cardinality of the feasible family and ``c_alpha_log2``
    upper-bounds the log-count of members within distance alpha/3 of any
    fixed member.
    """

    kind: str
    k: int
    alpha: float
    n_bits: int
    perturbations: np.ndarray
    log2_size: float
    c_alpha_log2: float
    n_feasible: int
    n_rejected: int

    @property
    def base(self) -> np.ndarray:
        return np.full(self.k, 1.0 / self.k)

    def member_weights(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_bits,):
            raise ValueError(f"z must have {self.n_bits} entries")
        return self.base + z @ self.perturbations

    def is_feasible(self, z) -> bool:
        return bool(self.member_weights(z).min() >= -_FEAS_TOL)

    def member(self, z) -> Distribution:
        w = self.member_weights(z)
        if w.min() < -_FEAS_TOL:
            raise ValueError("infeasible sign vector for this alpha")
        return Distribution(np.maximum(w, 0.0))

    def sign_vectors(self) -> Iterator[np.ndarray]:
        """All sign vectors in index order (feasible or not); 2^n_bits of them."""
        for idx in range(1 << self.n_bits):
            yield _signs_of_indices(np.array([idx]), self.n_bits)[0]


def _signs_of_indices(idx: np.ndarray, n_bits: int) -> np.ndarray:
    bits = (idx[:, None] >> np.arange(n_bits)[None, :]) & 1
    return 2.0 * bits - 1.0


def high_low_packing(k: int, s: int, alpha: float) -> PackingFamily:
    """Family for the high-low regime: one sign bit per non-sensitive symbol.

    Member p_z keeps the middle sensitive symbols at 1/k, moves each
    non-sensitive symbol s+j to 1/k + alpha z_j / k', and balances the
    total on the first symbol: p_z[0] = 1/k - alpha (sum_j z_j) / k'.
    The first coordinate can leave the simplex for lopsided z; such
    members are rejected and counted.
    """
    if not 1 <= s < k / 2:
        raise ValueError("need 1 <= s < k/2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    kp = k - s
    pert = np.zeros((kp, k))
    pert[:, 0] = -alpha / kp
    pert[np.arange(kp), s + np.arange(kp)] = alpha / kp
    tails_ok = 1.0 / k - alpha / kp >= -_FEAS_TOL
    n_feasible = 0
    for w in range(kp + 1):  # w = number of -1 bits
        if w > 0 and not tails_ok:
            continue
        coord0 = 1.0 / k - alpha * (kp - 2 * w) / kp
        if coord0 >= -_FEAS_TOL:
            n_feasible += math.comb(kp, w)
    if n_feasible == 0:
        raise ValueError("alpha is infeasible for every sign vector")
    return PackingFamily(
        kind="high-low",
        k=k,
        alpha=alpha,
        n_bits=kp,
        perturbations=pert,
        log2_size=math.log2(n_feasible),
        c_alpha_log2=(1.0 - binary_entropy_bits(1.0 / 3.0)) * kp,
        n_feasible=n_feasible,
        n_rejected=(1 << kp) - n_feasible,
    )


def block_packing(partition: Partition, alpha: float) -> PackingFamily:
    """Family for the block regime: one sign bit per within-block pair.

    Consecutive members of each block are paired; the bit for pair
    (a, b) in block j moves a up and b down by delta_j = 2 e_j alpha /
    sum_t e_t^2, where e_j is the block size rounded down to even (an odd
    leftover element stays at 1/k).  Every member is then a distribution
    at exact total-variation distance alpha from uniform.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = partition.k
    even_sizes = partition.sizes - (partition.sizes % 2)
    denom = float(np.sum(even_sizes.astype(float) ** 2))
    if denom == 0:
        raise ValueError("no block has a pairable pair of elements")
    deltas = 2.0 * even_sizes * alpha / denom
    if np.any(deltas > 1.0 / k + _FEAS_TOL):
        raise ValueError("alpha is infeasible: a perturbation exceeds 1/k")
    rows = []
    for j in range(partition.m):
        members = partition.members(j)
        for i in range(int(even_sizes[j]) // 2):
            row = np.zeros(k)
            row[members[2 * i]] = deltas[j]
            row[members[2 * i + 1]] = -deltas[j]
            rows.append(row)
    pert = np.stack(rows)
    n_bits = pert.shape[0]
    return PackingFamily(
        kind="block",
        k=k,
        alpha=alpha,
        n_bits=n_bits,
        perturbations=pert,
        log2_size=float(n_bits),
        c_alpha_log2=n_bits * binary_entropy_bits(1.0 / 3.0),
        n_feasible=1 << n_bits,
        n_rejected=0,
    )


@dataclass(frozen=True)
class ChiSquareReport:
    """Mean chi-square divergence of privatized members from privatized uniform."""

    value: float
    terms: np.ndarray
    n_members: int
    sampled: bool
    mc_std: float | None
    bound: float | None
    slack: float | None

    @property
    def ok(self) -> bool:
        """Whether the value respects the analytic bound (true if none given)."""
        return self.slack is None or self.slack >= -1e-9


def chi_square(
    Q: Channel,
    fam: PackingFamily,
    max_members: int = ENUM_CAP,
    sample: int | None = None,
    seed=None,
    bound: float | None = None,
) -> ChiSquareReport:
    """Average d_chi2(member^Q, uniform^Q) over the feasible family.

    Enumerates the family exactly when 2^n_bits <= max_members; otherwise
    a seeded Monte Carlo sample of ``sample`` feasible sign vectors must be
    requested, and the report carries the standard error of the mean.

    Outputs with zero mass under privatized uniform contribute nothing
    when unreachable from every member; a member putting mass there would
    make the divergence infinite and raises instead.
    """
    if Q.k_in != fam.k:
        raise ValueError("channel input size does not match family domain")
    u_q = apply_channel(Q, Distribution(fam.base)).weights
    V = fam.perturbations @ Q.rows  # per-bit output perturbation
    dead = u_q <= 0.0
    if np.any(dead & (np.abs(V) > 0).any(axis=0)):
        raise ValueError("a member reaches an output that uniform cannot reach")
    live = ~dead
    inv_u = np.zeros_like(u_q)
    inv_u[live] = 1.0 / u_q[live]

    total = 1 << fam.n_bits
    if total > max_members and sample is None:
        raise ValueError(
            f"family of 2^{fam.n_bits} members exceeds the enumeration cap; "
            "pass sample= to estimate by Monte Carlo"
        )

    if total <= max_members:
        terms = []
        for start in range(0, total, 1 << 16):
            idx = np.arange(start, min(start + (1 << 16), total))
            Z = _signs_of_indices(idx, fam.n_bits)
            ok = (fam.base + Z @ fam.perturbations).min(axis=1) >= -_FEAS_TOL
            if not ok.any():
                continue
            diff = Z[ok] @ V
            terms.append((diff * diff) @ inv_u)
        terms = np.concatenate(terms) if terms else np.zeros(0)
        if terms.size == 0:
            raise ValueError("no feasible members to average over")
        value = float(terms.mean())
        report = ChiSquareReport(
            value=value, terms=terms, n_members=terms.size, sampled=False,
            mc_std=None, bound=bound, slack=None if bound is None else bound - value,
        )
        return report

    rng = np.random.default_rng(seed)
    got, attempts, batch = [], 0, max(1024, sample)
    while sum(z.shape[0] for z in got) < sample:
        attempts += batch
        if attempts > 1000 * sample:
            raise ValueError("could not sample enough feasible members")
        Z = rng.choice([-1.0, 1.0], size=(batch, fam.n_bits))
        ok = (fam.base + Z @ fam.perturbations).min(axis=1) >= -_FEAS_TOL
        if ok.any():
            got.append(Z[ok])
    Z = np.concatenate(got)[:sample]
    diff = Z @ V
    terms = (diff * diff) @ inv_u
    value = float(terms.mean())
    mc_std = float(terms.std(ddof=1) / math.sqrt(sample)) if sample > 1 else math.inf
    return ChiSquareReport(
        value=value, terms=terms, n_members=sample, sampled=True,
        mc_std=mc_std, bound=bound, slack=None if bound is None else bound - value,
    )


def sample_complexity_floor(fam: PackingFamily, max_chi: float) -> float:
    """Lower bound on the samples needed to learn within the family's radius."""
    if not max_chi > 0:
        raise ValueError("max_chi must be positive")
    return (fam.log2_size - fam.c_alpha_log2) * math.log(2.0) / max_chi


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    bound: float
    ok: bool
    eps: float

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "bound": self.bound, "ok": self.ok, "eps": self.eps}


def check_claim1(Q: Channel, s: int) -> InequalityReport:
    """Row-difference bound used in the high-low sample-complexity floor.

    Requires the first row to be dominated: Q(y|0) <= e^eps Q(y|x) for all
    x and y, with eps taken as the tightest such exponent.  Then

        sum_y sum_{x >= s} (Q(y|x) - Q(y|0))^2 / sum_j Q(y|j)
            <= (e^eps - 1) + k (1 - e^-eps).
    """
    if not 1 <= s < Q.k_in:
        raise ValueError("need 1 <= s < k")
    attained = _attained_matrix(Q.rows)
    eps = float(np.max(np.delete(attained[0], 0)))
    if math.isinf(eps):
        raise ValueError("first row is not dominated by every other row")
    eps = max(eps, 0.0)
    colsum = Q.rows.sum(axis=0)
    live = colsum > 0
    diffs = Q.rows[s:, live] - Q.rows[0, live]
    lhs = float(((diffs * diffs) / colsum[live]).sum())
    bound = math.expm1(eps) + Q.k_in * (1.0 - math.exp(-eps))
    return InequalityReport(lhs=lhs, bound=bound, ok=lhs <= bound + 1e-9, eps=eps)


def check_block_chi_bound(
    Q: Channel, partition: Partition, alpha: float, eps: float
) -> ChiSquareReport:
    """Exact chi-square of the block family against its analytic ceiling.

    The ceiling 8 k alpha^2 (e^eps - 1)^2 / sum_j e_j^2 (e_j = block size
    rounded down to even, matching the family actually built) applies to
    any channel meeting the within-block budget ``eps``; the channel is
    audited against that budget first.
    """
    report = verify_eldp(Q, block_budgets(partition, eps))
    if not report.ok:
        raise ValueError("channel does not satisfy the within-block budget")
    fam = block_packing(partition, alpha)
    even_sizes = partition.sizes - (partition.sizes % 2)
    denom = float(np.sum(even_sizes.astype(float) ** 2))
    bound = 8.0 * partition.k * alpha**2 * math.expm1(eps) ** 2 / denom
    return chi_square(Q, fam, bound=bound)

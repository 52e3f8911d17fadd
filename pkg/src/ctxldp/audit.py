"""Channel auditing against pairwise privacy budgets.

Certifies that a channel satisfies a budget matrix, computes the tightest
budgets it attains, realizes the hypothesis-testing trade-off region for
binary budgets, and checks the structural properties (post-processing,
adaptive composition, robustness to priors).

For a finite output alphabet the supremum of Q(S|x)/Q(S|x') over output
events S equals the maximum over singletons: a ratio of sums of positives
never exceeds the largest termwise ratio (mediant inequality).  All audits
therefore scan singleton ratios only; the reduction itself is covered by a
brute-force test over all subsets at small sizes.

Ratio conventions: 0/0 contributes 0 (an event with no mass under either
input imposes no constraint) and positive/0 contributes +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Channel, Distribution, PrivacyMatrix, _enc

AUDIT_ATOL = 1e-9

__all__ = [
    "AUDIT_ATOL",
    "AuditReport",
    "ErrorRegion",
    "attained_privacy",
    "verify_eldp",
    "error_region",
    "check_testing_inequalities",
    "compose",
    "postprocess",
    "posterior_ratio_bound",
]


def _log_ratio_candidates(rows: np.ndarray, x: int) -> np.ndarray:
    """Per-output attained log-ratios of row x against every row.

    Returns a (k_in, k_out) matrix whose (x', y) entry is the contribution
    of output y to eps_hat[x, x']: ln(Q(y|x)/Q(y|x')) with 0/0 -> 0,
    pos/0 -> +inf, 0/pos -> -inf (never the max).
    """
    with np.errstate(divide="ignore"):
        logs = np.where(rows > 0, np.log(np.where(rows > 0, rows, 1.0)), 0.0)
    pos = rows > 0
    a_pos = pos[x]
    cand = np.where(
        a_pos & pos,
        logs[x] - logs,
        np.where(a_pos & ~pos, math.inf, np.where(~a_pos & pos, -math.inf, 0.0)),
    )
    return cand


def _attained_matrix(rows: np.ndarray) -> np.ndarray:
    """eps_hat[x, x'] = max_y ln(Q(y|x) / Q(y|x')) with the 0-conventions."""
    k = rows.shape[0]
    out = np.zeros((k, k))
    for x in range(k):
        out[x] = _log_ratio_candidates(rows, x).max(axis=1)
        out[x, x] = 0.0
    return out


def attained_privacy(Q: Channel) -> PrivacyMatrix:
    """The tightest budget matrix for which ``Q`` passes the audit (slack 0)."""
    return PrivacyMatrix(np.maximum(_attained_matrix(Q.rows), 0.0))


@dataclass(frozen=True)
class AuditReport:
    """Outcome of auditing a channel against a budget matrix."""

    ok: bool
    attained: np.ndarray
    worst_pair: tuple[int, int, int] | None
    slack: float

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "attained": [[_enc(v) for v in row] for row in self.attained],
            "worst_pair": list(self.worst_pair) if self.worst_pair is not None else None,
            "slack": _enc(self.slack),
        }


def verify_eldp(Q: Channel, E: PrivacyMatrix) -> AuditReport:
    """Check Q(y|x) <= e^{eps[x,x']} Q(y|x') for every pair and output.

    ``ok`` tolerates AUDIT_ATOL of additive slack on the attained budgets.
    ``worst_pair`` is the (x, x', y) whose violation margin (attained minus
    budget) is largest; ``slack`` is the smallest remaining margin over
    pairs with finite budgets (negative or -inf when violated).
    """
    if Q.k_in != E.k:
        raise ValueError("channel and budget matrix sizes differ")
    k = E.k
    attained = _attained_matrix(Q.rows)
    if k == 1:
        return AuditReport(ok=True, attained=attained, worst_pair=None, slack=math.inf)

    budget_inf = np.isinf(E.eps)
    with np.errstate(invalid="ignore"):
        margins = np.where(
            budget_inf, -math.inf, np.where(np.isinf(attained), math.inf, attained - E.eps)
        )
    np.fill_diagonal(margins, -math.inf)
    ok = bool(np.all(margins <= AUDIT_ATOL))

    finite = ~budget_inf & ~np.eye(k, dtype=bool)
    slack = float(np.min(E.eps[finite] - attained[finite])) if finite.any() else math.inf

    x, x2 = np.unravel_index(int(np.argmax(margins)), margins.shape)
    y = int(np.argmax(_log_ratio_candidates(Q.rows, int(x))[int(x2)]))
    return AuditReport(ok=ok, attained=attained, worst_pair=(int(x), int(x2), y), slack=slack)


# ---------------------------------------------------------------------------
# Hypothesis-testing view


@dataclass(frozen=True)
class ErrorRegion:
    """Achievable (false alarm, missed detection) region for a binary pair.

    The region is the convex hull of three vertices plus all dominated
    points.  The trivial rules give (1, 0) and (0, 1); the informative
    vertex has the asymmetric coordinates
    P_FA = (e^eps21 - 1) / (e^{eps12+eps21} - 1),
    P_MD = (e^eps12 - 1) / (e^{eps12+eps21} - 1),
    which coincide (both 1/(1+e^eps)) when the budgets are equal.
    """

    vertices: tuple[tuple[float, float], ...]
    eps12: float
    eps21: float


def error_region(eps12: float, eps21: float) -> ErrorRegion:
    if not eps12 > 0 or not eps21 > 0:
        raise ValueError("budgets must be positive")
    if math.isinf(eps12) and math.isinf(eps21):
        corner = (0.0, 0.0)
    elif math.isinf(eps12):
        corner = (math.exp(-eps21), 0.0)
    elif math.isinf(eps21):
        corner = (0.0, math.exp(-eps12))
    else:
        denom = math.expm1(eps12 + eps21)
        corner = (math.expm1(eps21) / denom, math.expm1(eps12) / denom)
    return ErrorRegion(vertices=((1.0, 0.0), (0.0, 1.0), corner), eps12=eps12, eps21=eps21)


def check_testing_inequalities(
    Q: Channel, x: int, x2: int, S: Sequence[int]
) -> tuple[bool, bool]:
    """Test the two trade-off inequalities for the rule "guess x iff Y in S".

    With budgets taken from the attained matrix, every subset rule must
    satisfy P_FA + e^{eps[x2,x]} P_MD >= 1 and e^{eps[x,x2]} P_FA + P_MD >= 1.
    They are evaluated in the overflow-free forms
    P_MD >= e^{-eps[x2,x]} (1 - P_FA) and P_FA >= e^{-eps[x,x2]} (1 - P_MD).
    """
    S = np.asarray(list(S), dtype=int)
    if S.size and (S.min() < 0 or S.max() >= Q.k_out):
        raise ValueError("subset contains an out-of-range output")
    attained = _attained_matrix(Q.rows)
    p_fa = float(Q.rows[x2, S].sum()) if S.size else 0.0
    p_md = 1.0 - (float(Q.rows[x, S].sum()) if S.size else 0.0)
    first = p_md >= math.exp(-attained[x2, x]) * (1.0 - p_fa) - AUDIT_ATOL
    second = p_fa >= math.exp(-attained[x, x2]) * (1.0 - p_md) - AUDIT_ATOL
    return first, second


# ---------------------------------------------------------------------------
# Structural properties


def compose(Q1: Channel, Q2: Channel | Sequence[Channel]) -> Channel:
    """Joint channel releasing both outputs; attained budgets add entrywise.

    ``Q2`` may be a single channel (run independently of the first output)
    or one channel per first-stage output for the adaptive case.  Output
    (y1, y2) is encoded as y1 * k_out2 + y2.
    """
    if isinstance(Q2, Channel):
        stages = [Q2] * Q1.k_out
    else:
        stages = list(Q2)
        if len(stages) != Q1.k_out:
            raise ValueError("need one second-stage channel per first-stage output")
    k = Q1.k_in
    k2 = stages[0].k_out
    for W in stages:
        if W.k_in != k or W.k_out != k2:
            raise ValueError("second-stage channels must share input and output sizes")
    rows = np.zeros((k, Q1.k_out * k2))
    for y1, W in enumerate(stages):
        rows[:, y1 * k2 : (y1 + 1) * k2] = Q1.rows[:, y1 : y1 + 1] * W.rows
    return Channel(rows)


def postprocess(Q: Channel, W: Channel) -> Channel:
    """Feed Q's output through W; attained budgets can only shrink."""
    if Q.k_out != W.k_in:
        raise ValueError("post-processor input size must match channel output size")
    return Channel(Q.rows @ W.rows)


def posterior_ratio_bound(
    Q: Channel, prior: Distribution, x1: int, x2: int, y: int
) -> bool:
    """Check the posterior-odds bound given auxiliary information.

    After observing output ``y`` under the given prior, the posterior odds
    of x1 against x2 may exceed the prior odds by at most a factor of
    e^{attained eps[x1, x2]}.
    """
    if Q.k_in != prior.k:
        raise ValueError("prior size does not match channel")
    if prior.weights[x2] <= 0:
        raise ValueError("prior must be positive at x2")
    p_y = float(prior.weights @ Q.rows[:, y])
    if p_y == 0:
        raise ValueError("output y has zero probability under the prior")
    num = prior.weights[x1] * Q.rows[x1, y]
    den = prior.weights[x2] * Q.rows[x2, y]
    eps = _attained_matrix(Q.rows)[x1, x2] if x1 != x2 else 0.0
    if den == 0:
        # posterior odds are +inf (or vacuous 0/0); consistent only with an
        # unbounded attained budget
        return num == 0 or math.isinf(eps)
    if math.isinf(eps):
        return True
    bound = math.exp(eps) * prior.weights[x1] / prior.weights[x2]
    return num / den <= bound + AUDIT_ATOL

"""Synthetic estimation-error sweeps over sample size, blocks, and budgets.

A sweep takes one model configuration (plain LDP baseline, high-low, or
block-structured; the baseline is the block channel with a single block),
a source distribution, a grid of sample sizes, and a repetition count, and
records per-trial raw-estimate errors.  All randomness derives from one
base seed through a documented tree, so any single row can be re-derived
in isolation:

    SeedSequence(base_seed, spawn_key=(setting_index, n_index, rep))
        child 0 -> input sampling stream
        child 1 -> privatization stream
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Channel, Distribution, Partition, SensitiveSet
from .estimation import BlockEstimatorSpec, HighLowEstimatorSpec, run_trial
from .mechanisms import block_hr_channel, high_low_hr_channel

__all__ = [
    "DistributionSpec",
    "ExperimentConfig",
    "ResultRow",
    "make_distribution",
    "stride_permutation",
    "index_partition",
    "run_sweep",
    "rows_to_csv",
    "summarize",
]

CSV_HEADER = "model,k,s_or_m,eps,n,rep,tv,l2sq,seed"


def stride_permutation(k: int, m: int) -> np.ndarray:
    """perm[i] = (i*b mod k) + floor(i*b / k) with stride b = k/m; needs m | k.

    Round-robins adjacent symbols over the m contiguous blocks of size
    k/m: symbols 0..m-1 land in blocks 0..m-1, then the cycle repeats one
    position deeper.  (A stride smaller than the block size would pile the
    first symbols into block 0 instead of spreading them.)
    """
    if m < 1 or k % m != 0:
        raise ValueError("stride permutation needs m >= 1 dividing k")
    b = k // m
    i = np.arange(k)
    return (i * b) % k + (i * b) // k


@dataclass(frozen=True)
class DistributionSpec:
    """Source distribution recipe: uniform, geometric, zipf, or permuted geometric.

    ``geometric``: weight of symbol i proportional to (1-lam)^i.
    ``zipf``: weight proportional to (i+1)^-lam.
    ``geometric_permuted``: geometric weights pushed through the stride
    permutation (stride = number of blocks) to spread heavy symbols across
    blocks; set ``perm_seed`` to use a seeded random permutation instead.
    """

    kind: str
    lam: float | None = None
    stride: int | None = None
    perm_seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric", "zipf", "geometric_permuted"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind != "uniform":
            if self.lam is None:
                raise ValueError("lam is required")
            if self.kind in ("geometric", "geometric_permuted") and not 0 < self.lam < 1:
                raise ValueError("geometric lam must be in (0, 1)")
            if self.kind == "zipf" and not self.lam > 0:
                raise ValueError("zipf lam must be positive")


def make_distribution(spec: DistributionSpec, k: int) -> Distribution:
    if spec.kind == "uniform":
        return Distribution.uniform(k)
    i = np.arange(k, dtype=float)
    if spec.kind == "zipf":
        w = (i + 1.0) ** (-spec.lam)
    else:
        w = (1.0 - spec.lam) ** i
    w = w / w.sum()
    if spec.kind == "geometric_permuted":
        if spec.perm_seed is not None:
            perm = np.random.default_rng(spec.perm_seed).permutation(k)
        else:
            perm = stride_permutation(k, spec.stride if spec.stride else 1)
        out = np.empty(k)
        out[perm] = w
        w = out
    return Distribution(w)


def index_partition(k: int, m: int) -> Partition:
    """Contiguous index blocks of size k // m; the last absorbs any remainder."""
    if not 1 <= m <= k:
        raise ValueError("need 1 <= m <= k")
    base = k // m
    sizes = [base] * (m - 1) + [base + k % m]
    return Partition.from_sizes(sizes)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a model family, its parameter grid, and the sampling plan."""

    k: int
    eps: float
    model: str  # "ldp" | "hlldp" | "bsldp"
    n_grid: tuple[int, ...]
    reps: int
    seed: int
    dist: DistributionSpec = field(default_factory=lambda: DistributionSpec("uniform"))
    m_grid: tuple[int, ...] = ()  # bsldp block counts
    s_grid: tuple[int, ...] = ()  # hlldp sensitive-set sizes
    project: bool = False
    out: str | None = None

    def __post_init__(self):
        if self.model not in ("ldp", "hlldp", "bsldp"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n grid must be non-empty and positive")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ValueError("n grid must be strictly increasing")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.model == "bsldp" and (not self.m_grid or any(not 1 <= m <= self.k for m in self.m_grid)):
            raise ValueError("bsldp needs block counts m in [1, k]")
        if self.model == "hlldp" and (not self.s_grid or any(not 1 <= s < self.k for s in self.s_grid)):
            raise ValueError("hlldp needs sensitive sizes s in [1, k)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def settings(self) -> tuple[int, ...]:
        if self.model == "bsldp":
            return tuple(self.m_grid)
        if self.model == "hlldp":
            return tuple(self.s_grid)
        return (1,)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        dist = d.get("distribution", {"kind": "uniform"})
        spec = DistributionSpec(
            kind=dist.get("kind", "uniform"),
            lam=dist.get("lam"),
            stride=dist.get("stride"),
            perm_seed=dist.get("perm_seed"),
        )
        def as_grid(v):
            if v is None:
                return ()
            return tuple(v) if isinstance(v, (list, tuple)) else (int(v),)
        return cls(
            k=int(d["k"]),
            eps=float(d["eps"]),
            model=str(d["model"]),
            n_grid=tuple(int(n) for n in d["n_grid"]),
            reps=int(d.get("reps", 1)),
            seed=int(d.get("seed", 0)),
            dist=spec,
            m_grid=as_grid(d.get("m")),
            s_grid=as_grid(d.get("s")),
            project=bool(d.get("project", False)),
            out=d.get("out"),
        )

    def to_dict(self) -> dict:
        d = {
            "k": self.k,
            "eps": self.eps,
            "model": self.model,
            "n_grid": list(self.n_grid),
            "reps": self.reps,
            "seed": self.seed,
            "project": self.project,
            "distribution": {
                "kind": self.dist.kind,
                "lam": self.dist.lam,
                "stride": self.dist.stride,
                "perm_seed": self.dist.perm_seed,
            },
        }
        if self.model == "bsldp":
            d["m"] = list(self.m_grid)
        if self.model == "hlldp":
            d["s"] = list(self.s_grid)
        if self.out is not None:
            d["out"] = self.out
        return d


@dataclass(frozen=True)
class ResultRow:
    model: str
    k: int
    s_or_m: int
    eps: float
    n: int
    rep: int
    tv: float
    l2sq: float
    seed: int
    wall_time: float  # informational only; never written to result files


def _build(config: ExperimentConfig, setting: int) -> tuple[Channel, object]:
    k, eps = config.k, config.eps
    if config.model == "hlldp":
        Q = high_low_hr_channel(SensitiveSet(k, setting), eps)
        return Q, HighLowEstimatorSpec(k, setting, eps)
    partition = index_partition(k, setting if config.model == "bsldp" else 1)
    Q = block_hr_channel(partition, eps)
    return Q, BlockEstimatorSpec(partition, eps)


def _source(config: ExperimentConfig, setting: int) -> Distribution:
    dist = config.dist
    if dist.kind == "geometric_permuted" and dist.stride is None:
        dist = DistributionSpec(dist.kind, dist.lam, stride=setting, perm_seed=dist.perm_seed)
    return make_distribution(dist, config.k)


def run_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Run every (setting, n, rep) cell; rows come back in deterministic order."""
    rows: list[ResultRow] = []
    for si, setting in enumerate(config.settings):
        Q, spec = _build(config, setting)
        p = _source(config, setting)
        for ni, n in enumerate(config.n_grid):
            for rep in range(config.reps):
                ss = np.random.SeedSequence(config.seed, spawn_key=(si, ni, rep))
                cell_seed = int(ss.generate_state(1)[0])
                t0 = time.perf_counter()
                tv, l2 = run_trial(p, Q, spec, n, ss, project=config.project)
                rows.append(
                    ResultRow(
                        model=config.model,
                        k=config.k,
                        s_or_m=setting,
                        eps=config.eps,
                        n=n,
                        rep=rep,
                        tv=tv,
                        l2sq=l2,
                        seed=cell_seed,
                        wall_time=time.perf_counter() - t0,
                    )
                )
    return rows


def rows_to_csv(rows: Sequence[ResultRow], config: ExperimentConfig | None = None) -> str:
    """Deterministic CSV text; the resolved config is echoed in a comment header."""
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config.to_dict(), sort_keys=True))
    lines.append(CSV_HEADER)
    for r in rows:
        lines.append(
            f"{r.model},{r.k},{r.s_or_m},{r.eps!r},{r.n},{r.rep},{r.tv!r},{r.l2sq!r},{r.seed}"
        )
    return "\n".join(lines) + "\n"


def summarize(rows: Sequence[ResultRow]) -> list[dict]:
    """Per (setting, n) mean and standard deviation of both error metrics."""
    keys = sorted({(r.model, r.s_or_m, r.n) for r in rows}, key=lambda t: (t[0], t[1], t[2]))
    out = []
    for model, s_or_m, n in keys:
        tv = np.array([r.tv for r in rows if (r.model, r.s_or_m, r.n) == (model, s_or_m, n)])
        l2 = np.array([r.l2sq for r in rows if (r.model, r.s_or_m, r.n) == (model, s_or_m, n)])
        out.append(
            {
                "model": model,
                "s_or_m": s_or_m,
                "n": n,
                "reps": int(tv.size),
                "mean_tv": float(tv.mean()),
                "std_tv": float(tv.std()),
                "mean_l2sq": float(l2.mean()),
                "std_l2sq": float(l2.std()),
            }
        )
    return out

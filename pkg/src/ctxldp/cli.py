"""Command-line entry point.

Subcommands
-----------
channel     construct a mechanism and print it as JSON
audit       certify a channel JSON against a budget-matrix JSON
synth       run a synthetic error sweep from a JSON config (CSV + summary)
geo         grid a check-in file and compare block-structured settings
lowerbound  build a packing family and verify the information bounds

Exit codes: 0 success / audit passed, 1 domain-level failure (violation or
infeasible input), 2 usage or parse error.  All randomness derives from
--seed through spawn keys, so repeated invocations are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import audit as audit_mod
from . import experiments, geo, lowerbound
from .core import (
    Partition,
    SensitiveSet,
    _enc,
    channel_from_dict,
    channel_to_dict,
    privacy_matrix_from_dict,
    privacy_matrix_to_dict,
)
from .estimation import BlockEstimatorSpec, run_trial
from .mechanisms import (
    block_hr_channel,
    high_low_hr_channel,
    message_bits,
    optimal_binary_channel,
)

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _report_text(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    lines = ["key,value"]

    def flatten(prefix: str, obj) -> None:
        if isinstance(obj, dict):
            for key in sorted(obj):
                flatten(f"{prefix}{key}." if isinstance(obj[key], dict) else f"{prefix}{key}", obj[key])
        elif isinstance(obj, (list, tuple)):
            lines.append(f"{prefix},{json.dumps(obj)}")
        else:
            lines.append(f"{prefix},{obj}")

    flatten("", payload)
    return "\n".join(lines) + "\n"


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_channel(args) -> int:
    if args.kind == "binary":
        Q = optimal_binary_channel(args.eps12, args.eps21)
    elif args.kind == "hl":
        Q = high_low_hr_channel(SensitiveSet(args.k, args.s), args.eps)
    else:
        Q = block_hr_channel(Partition.from_sizes(args.sizes), args.eps)
    payload = {
        "config": {
            "kind": args.kind,
            "eps12": None if args.eps12 is None else _enc(args.eps12),
            "eps21": None if args.eps21 is None else _enc(args.eps21),
            "k": args.k,
            "s": args.s,
            "sizes": args.sizes,
            "eps": args.eps,
        },
        "channel": channel_to_dict(Q),
        "message_bits": message_bits(Q),
    }
    if args.attained:
        payload["attained"] = privacy_matrix_to_dict(audit_mod.attained_privacy(Q))
    _emit(_report_text(payload, args.format), args.out)
    return 0


def cmd_audit(args) -> int:
    try:
        Q = channel_from_dict(_load_json(args.channel))
        E = privacy_matrix_from_dict(_load_json(args.eps_matrix))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot load inputs: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        report = audit_mod.verify_eldp(Q, E)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    payload = {"config": {"channel": args.channel, "eps_matrix": args.eps_matrix}}
    payload.update(report.to_dict())
    _emit(_report_text(payload, args.format), args.out)
    return 0 if report.ok else DOMAIN_ERROR


def cmd_synth(args) -> int:
    try:
        raw = _load_json(args.config)
        config = experiments.ExperimentConfig.from_dict(raw)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if args.seed is not None:
        config = experiments.ExperimentConfig.from_dict({**config.to_dict(), "seed": args.seed})
    base = args.out or config.out
    if base is None:
        print("error: no output base (set \"out\" in the config or pass --out)", file=sys.stderr)
        return USAGE_ERROR
    rows = experiments.run_sweep(config)
    csv_text = experiments.rows_to_csv(rows, config)
    summary = {"config": config.to_dict(), "summary": experiments.summarize(rows)}
    _emit(csv_text, base + ".csv")
    _emit(json.dumps(summary, sort_keys=True, indent=2) + "\n", base + ".summary.json")
    print(f"wrote {base}.csv and {base}.summary.json ({len(rows)} rows)")
    return 0


def cmd_geo(args) -> int:
    if args.m1 < 1 or args.m2 < 1:
        print("error: --m1 and --m2 must be >= 1", file=sys.stderr)
        return USAGE_ERROR
    if args.n < 1 or args.reps < 1:
        print("error: --n and --reps must be >= 1", file=sys.stderr)
        return USAGE_ERROR
    try:
        records, skipped = geo.load_checkins(args.checkins)
        lat_min, lat_max, lon_min, lon_max = args.bbox
        grid = geo.Grid(lat_min, lat_max, lon_min, lon_max, args.cell)
        data = geo.grid_empirical(records, grid)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    settings = [(1, 1), (args.m1, args.m2)] if (args.m1, args.m2) != (1, 1) else [(1, 1)]
    results = []
    for si, (m1, m2) in enumerate(settings):
        try:
            partition = geo.geo_partition(grid, m1, m2)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return DOMAIN_ERROR
        Q = block_hr_channel(partition, args.eps)
        spec = BlockEstimatorSpec(partition, args.eps)
        tvs = []
        for rep in range(args.reps):
            ss = np.random.SeedSequence(args.seed, spawn_key=(si, rep))
            tv, _ = run_trial(data.distribution, Q, spec, args.n, ss)
            tvs.append(tv)
        tvs = np.asarray(tvs)
        results.append(
            {
                "m1": m1,
                "m2": m2,
                "blocks": partition.m,
                "mean_tv": float(tvs.mean()),
                "std_tv": float(tvs.std()),
                "per_rep_tv": [float(v) for v in tvs],
            }
        )
    payload = {
        "config": {
            "checkins": args.checkins,
            "bbox": list(args.bbox),
            "cell": args.cell,
            "eps": args.eps,
            "n": args.n,
            "reps": args.reps,
            "seed": args.seed,
            "m1": args.m1,
            "m2": args.m2,
        },
        "grid": grid.to_dict(),
        "records": {"kept": data.kept, "dropped_outside_bbox": data.dropped, "skipped_malformed": skipped},
        "settings": results,
    }
    _emit(_report_text(payload, args.format), args.out)
    return 0


def cmd_lowerbound(args) -> int:
    try:
        if args.model == "hl":
            if args.k is None or args.s is None:
                print("error: hl model needs --k and --s", file=sys.stderr)
                return USAGE_ERROR
            fam = lowerbound.high_low_packing(args.k, args.s, args.alpha)
            Q = high_low_hr_channel(SensitiveSet(args.k, args.s), args.eps)
            chi = lowerbound.chi_square(Q, fam, sample=args.sample, seed=args.seed)
            ineq = lowerbound.check_claim1(Q, args.s)
            extra = {"claim1": ineq.to_dict()}
            ok = ineq.ok
        else:
            if not args.sizes:
                print("error: bs model needs --sizes", file=sys.stderr)
                return USAGE_ERROR
            partition = Partition.from_sizes(args.sizes)
            Q = block_hr_channel(partition, args.eps)
            chi = lowerbound.check_block_chi_bound(Q, partition, args.alpha, args.eps)
            extra = {"chi_bound": {"bound": chi.bound, "slack": chi.slack, "ok": chi.ok}}
            ok = chi.ok
            fam = lowerbound.block_packing(partition, args.alpha)
    except ValueError as exc:
        print(f"error: infeasible packing or bad parameters: {exc}", file=sys.stderr)
        return DOMAIN_ERROR
    floor = lowerbound.sample_complexity_floor(fam, chi.value) if chi.value > 0 else math.inf
    payload = {
        "config": {
            "model": args.model,
            "alpha": args.alpha,
            "eps": args.eps,
            "k": args.k,
            "s": args.s,
            "sizes": args.sizes,
            "seed": args.seed,
        },
        "family": {
            "n_bits": fam.n_bits,
            "feasible_members": fam.n_feasible,
            "rejected_members": fam.n_rejected,
            "log2_size": fam.log2_size,
            "c_alpha_log2": fam.c_alpha_log2,
        },
        "chi_square": {
            "value": chi.value,
            "n_members": chi.n_members,
            "sampled": chi.sampled,
            "mc_std": chi.mc_std,
        },
        "sample_complexity_floor": _enc(floor),
        "ok": bool(ok),
    }
    payload.update(extra)
    _emit(_report_text(payload, args.format), args.out)
    return 0 if ok else DOMAIN_ERROR


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sizes {text!r}") from exc
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def _budget(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("budget cannot be NaN")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxldp", description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=None, help="base seed for all randomness")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    # the same options are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("channel", help="construct a mechanism", parents=[common])
    c.add_argument("--kind", choices=("binary", "hl", "bs"), required=True)
    c.add_argument("--eps12", type=_budget, default=None, help="binary: budget of symbol 0 vs 1 ('inf' allowed)")
    c.add_argument("--eps21", type=_budget, default=None, help="binary: budget of symbol 1 vs 0")
    c.add_argument("--k", type=int, default=None)
    c.add_argument("--s", type=int, default=None, help="hl: number of sensitive symbols")
    c.add_argument("--sizes", type=_sizes, default=None, help="bs: comma-separated block sizes")
    c.add_argument("--eps", type=float, default=None)
    c.add_argument("--attained", action="store_true", help="include the attained budget matrix")
    c.set_defaults(fn=cmd_channel)

    a = sub.add_parser("audit", help="certify a channel against budgets", parents=[common])
    a.add_argument("--channel", required=True, help="channel JSON file")
    a.add_argument("--eps-matrix", required=True, help="budget matrix JSON file")
    a.set_defaults(fn=cmd_audit)

    s = sub.add_parser("synth", help="synthetic error sweep", parents=[common])
    s.add_argument("--config", required=True, help="sweep config JSON file")
    s.set_defaults(fn=cmd_synth)

    g = sub.add_parser("geo", help="block-structured estimation on gridded check-ins", parents=[common])
    g.add_argument("--checkins", required=True, help="TSV of check-in records")
    g.add_argument("--m1", type=int, required=True, help="latitude bands")
    g.add_argument("--m2", type=int, required=True, help="longitude bands")
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("--n", type=int, required=True, help="privatized samples per repetition")
    g.add_argument("--reps", type=int, default=10)
    g.add_argument("--cell", type=float, default=0.2, help="grid cell size in degrees")
    g.add_argument("--bbox", type=float, nargs=4, default=list(geo.DEFAULT_BBOX),
                   metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"))
    g.set_defaults(fn=cmd_geo)

    l = sub.add_parser("lowerbound", help="packing family + information bounds", parents=[common])
    l.add_argument("--model", choices=("hl", "bs"), required=True)
    l.add_argument("--k", type=int, default=None)
    l.add_argument("--s", type=int, default=None)
    l.add_argument("--sizes", type=_sizes, default=None)
    l.add_argument("--alpha", type=float, required=True)
    l.add_argument("--eps", type=float, required=True)
    l.add_argument("--sample", type=int, default=None, help="Monte Carlo members when too many to enumerate")
    l.set_defaults(fn=cmd_lowerbound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command != "synth":
        args.seed = 0  # synth defers to the seed in its config file
    if args.command == "channel":
        if args.kind == "binary" and (args.eps12 is None or args.eps21 is None):
            parser.error("binary kind needs --eps12 and --eps21")
        if args.kind == "hl" and (args.k is None or args.s is None or args.eps is None):
            parser.error("hl kind needs --k, --s and --eps")
        if args.kind == "bs" and (args.sizes is None or args.eps is None):
            parser.error("bs kind needs --sizes and --eps")
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry points: simulate, sweep, fisher, bounds, verify.

Exit codes: 0 on success, 1 when an invariant fails, 2 on a configuration
error (argparse uses 2 for usage errors as well).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bounds import make_bound_report
from .estimator import SGDConfig
from .fisher import trace_fisher_message
from .harness import ConfigError, load_config, run_sweep, simulate_once, write_results
from .model import DistributionSpec
from .quantize import (
    group_encoder_quantizer,
    label_only_quantizer,
    load_channel_csv,
    make_group_partition,
    uniform_quantizer,
)
from .rng import derive_rng
from .verify import run_verify


def _parse_theta(text: str, d: int | None = None) -> np.ndarray:
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            values = json.load(fh)
        return np.asarray(values, dtype=float)
    if text.startswith("zeros:"):
        return np.zeros(int(text.split(":", 1)[1]))
    if text.startswith("random:"):
        radius = float(text.split(":", 1)[1])
        if d is None:
            raise ConfigError("random theta needs --d")
        rng = derive_rng(0, "cli-theta", d)
        g = rng.standard_normal(d)
        return g / np.linalg.norm(g) * radius * rng.random() ** (1.0 / d)
    return np.asarray([float(v) for v in text.split(",")], dtype=float)


def _parse_dist(text: str) -> DistributionSpec:
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            return DistributionSpec.from_dict(json.load(fh))
    if text.startswith("{"):
        return DistributionSpec.from_dict(json.loads(text))
    if text.startswith("hypercube:"):
        return DistributionSpec.uniform_hypercube(int(text.split(":", 1)[1]))
    raise ConfigError(
        f"cannot parse distribution {text!r}; use 'hypercube:D', inline JSON "
        "or '@file.json'"
    )


def _cmd_simulate(args) -> int:
    theta = _parse_theta(args.theta, args.d)
    sgd = SGDConfig(step_scale=args.sgd_c0, epochs=args.epochs)
    record = simulate_once(d=args.d, k=args.k, n=args.n, theta=theta,
                           seed=args.seed, sgd=sgd)
    print(json.dumps(record, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    result = run_sweep(config)
    out = args.out or config.out_path
    if out is None:
        raise ConfigError("no output path: pass --out or set run.out in the config")
    write_results(result.records, out, result.summaries, config.seed)
    payload = {
        "cells": len(result.summaries),
        "records": len(result.records),
        "skipped": [{"cell": list(cell), "reason": reason}
                    for cell, reason in result.skipped],
        "summaries": [s.to_dict() for s in result.summaries],
        "out": out,
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_fisher(args) -> int:
    dist = _parse_dist(args.dist)
    theta = _parse_theta(args.theta, dist.d)
    if theta.size != dist.d:
        raise ConfigError(f"theta dimension {theta.size} != distribution d={dist.d}")
    kind = args.quantizer
    if kind == "label-only":
        quantizer = label_only_quantizer(args.k)
    elif kind == "group":
        assignment = make_group_partition(d=dist.d, k=args.k, n=1)
        quantizer = group_encoder_quantizer(assignment, args.group_id)
    elif kind == "uniform":
        quantizer = uniform_quantizer(dist, args.k)
    elif kind.startswith("csv:"):
        points, _ = dist.support()
        quantizer = load_channel_csv(kind.split(":", 1)[1], points, args.k)
    else:
        raise ConfigError(f"unknown quantizer {kind!r}")
    report = trace_fisher_message(theta, dist, quantizer)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_bounds(args) -> int:
    report = make_bound_report(
        n=args.n, k=args.k, d=args.d, sigma2=args.sigma2, delta=args.delta,
        i0=args.I0, B=args.B if args.B is not None else math.inf,
        sigma_e=args.sigma_e,
    )
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_verify(args) -> int:
    report = run_verify(args.level, master_seed=args.seed)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitlogit",
        description="distributed logistic regression under per-sample bit budgets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one estimation run, record as JSON")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", required=True,
                   help="comma list, 'zeros:D', 'random:RADIUS' or '@file.json'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sgd-c0", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=1)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a full experiment grid to CSV")
    p.add_argument("--config", required=True, help="TOML config (or .json mirror)")
    p.add_argument("--out", help="output CSV path (overrides run.out)")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("fisher", help="exact Fisher report for one channel")
    p.add_argument("--dist", required=True,
                   help="'hypercube:D', inline JSON or '@file.json'")
    p.add_argument("--theta", required=True)
    p.add_argument("--quantizer", default="label-only",
                   help="label-only | group | uniform | csv:PATH")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--group-id", type=int, default=0)
    p.set_defaults(fn=_cmd_fisher)

    p = sub.add_parser("bounds", help="evaluate every lower-bound expression")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--I0", type=float, required=True)
    p.add_argument("--B", type=float, default=None,
                   help="box half-width; omit for the B -> infinity limit")
    p.add_argument("--sigma-e", type=float, default=None,
                   help="sub-exponential parameter (default sqrt(sigma2))")
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("verify", help="run the cross-module invariant suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=20260809)
    p.set_defaults(fn=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

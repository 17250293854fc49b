"""Command-line entry point: ``ter run|sweep|oracle|aggregate``."""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from ter.config import ConfigError, ExperimentConfig, coerce, parse_assignments
from ter.envs import make_env, optimal_q
from ter.harness.records import aggregate_dir, emit
from ter.harness.loop import train, train_offline


def run_config(cfg: ExperimentConfig) -> list:
    if cfg.mode == "offline":
        return list(train_offline(cfg))
    return list(train(cfg))


def _overrides(pairs: list[str]) -> dict:
    return {k: coerce(k, v) for k, v in parse_assignments(pairs).items()}


def _load(path: str, overrides: list[str]) -> ExperimentConfig:
    base = ExperimentConfig.load(path).to_dict() if path else {}
    base.update(_overrides(overrides))
    return ExperimentConfig.from_dict(base)


def run_name(cfg: ExperimentConfig, tags: dict) -> str:
    parts = [cfg.sampler] + [f"{k}={v}" for k, v in tags.items()] + [f"seed{cfg.seed}"]
    return "_".join(p.replace("/", "-").replace(":", "-") for p in parts) + ".csv"


def cmd_run(args) -> int:
    cfg = _load(args.config, args.set)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    path = Path(args.out) / run_name(cfg, {})
    emit(run_config(cfg), path, cfg.to_dict())
    print(path)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args.config, args.set)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    axes = []
    for g in args.grid or []:
        key, _, vals = g.partition("=")
        key = key.strip()
        axes.append([(key, coerce(key, v.strip())) for v in vals.split(",") if v.strip()])
    for combo in itertools.product(*axes):
        tags = dict(combo)
        for seed in seeds:
            c = cfg.replace(seed=seed, **tags)
            path = Path(args.out) / run_name(c, tags)
            emit(run_config(c), path, c.to_dict())
            print(path)
    return 0


def cmd_oracle(args) -> int:
    env = make_env(args.env)
    env.reset(np.random.default_rng(0 if args.seed is None else args.seed))
    oq = optimal_q(env, args.gamma)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write("state," + ",".join(f"q{a}" for a in range(oq.q.shape[1])) + "\n")
        for s, row in zip(oq.states, oq.q):
            label = "/".join(str(x) for x in s) if isinstance(s, tuple) else str(s)
            f.write(label + "," + ",".join(repr(float(x)) if np.isfinite(x) else "" for x in row) + "\n")
    print(out)
    return 0


def cmd_aggregate(args) -> int:
    print(aggregate_dir(args.inp, args.out, args.metric, args.resamples))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ter", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one seeded run")
    r.add_argument("--config", default="")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="runs")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="seeds x grid of runs")
    s.add_argument("--config", default="")
    s.add_argument("--seeds", required=True)
    s.add_argument("--grid", action="append", metavar="KEY=V1,V2")
    s.add_argument("--out", default="runs")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="value-iteration Q* table")
    o.add_argument("--env", required=True)
    o.add_argument("--gamma", type=float, required=True)
    o.add_argument("--seed", type=int, help="reset seed selecting a grid layout")
    o.add_argument("--out", default="q_star.csv")
    o.set_defaults(func=cmd_oracle)

    a = sub.add_parser("aggregate", help="mean and bootstrap interval across run CSVs")
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--metric", default="normalized_return")
    a.add_argument("--resamples", type=int, default=10_000)
    a.set_defaults(func=cmd_aggregate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

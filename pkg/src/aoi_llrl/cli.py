"""Command line entry point: ``train``, ``eval``, ``simulate`` and ``inspect``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running (bad snapshot, solver breakdown, I/O).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .ella import SolverError
from .env import Task, rollout
from .experiments import ExperimentConfig, run_comparison
from .policy import GaussianPolicy, N_FEATURES
from .tasks import TaskRanges
from .uav import TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

_TASK_KEYS = {"lambda": "lam", "abar": "abar", "alpha": "alpha", "emax": "eps_max",
              "avar": "avar"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def parse_task(text: str) -> Task:
    """``lambda=2,abar=3e7,alpha=1e-21,emax=5e6`` (``avar`` optional)."""
    kw = {"avar": TaskRanges().avar}
    for item in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key.strip() not in _TASK_KEYS:
            raise UsageError(f"bad task field {item!r}; expected one of {sorted(_TASK_KEYS)}")
        try:
            kw[_TASK_KEYS[key.strip()]] = float(value)
        except ValueError:
            raise UsageError(f"bad number in task field {item!r}") from None
    missing = {"lam", "abar", "alpha", "eps_max"} - kw.keys()
    if missing:
        raise UsageError(f"task is missing {sorted(missing)}")
    try:
        return Task(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def load_policy(path, default_sigma: float) -> GaussianPolicy:
    """JSON ``{"theta": [...], "sigma": ...}``; ``sigma`` is optional."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
        theta = np.asarray(obj["theta"], dtype=float)
        sigma = float(obj.get("sigma", default_sigma))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot read policy file {path}: {exc}") from None
    if theta.shape != (N_FEATURES,):
        raise UsageError(f"policy theta must have {N_FEATURES} entries")
    return GaussianPolicy(theta, sigma)


def _configs(path, seed=None):
    if path is None:
        tc, ec = TrainConfig(), ExperimentConfig()
    else:
        try:
            tc, ec = io.load_config(path)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except io.ConfigError as exc:
            raise UsageError(f"config {path}: {exc}") from None
    if seed is not None:
        tc = dataclasses.replace(tc, seed=seed)
        ec = dataclasses.replace(ec, train=tc)
    return tc, ec


def cmd_train(args) -> int:
    tc, _ = _configs(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(tc)
    io.save_snapshot(result.kb, out / "snapshot.json")
    io.write_training_log(result.log, out / "training_log.csv")
    print(f"trained M={result.kb.M} tasks in {len(result.log)} visits -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _, ec = _configs(args.config, args.seed)
    kb = io.load_snapshot(args.snapshot)
    ec = dataclasses.replace(ec, out_dir=str(args.out))
    report = run_comparison(ec, kb=kb)
    print(json.dumps(report.summary(), indent=1, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args) -> int:
    task = parse_task(args.task)
    if args.slots < 1:
        raise UsageError("--slots must be >= 1")
    tc = TrainConfig()
    if args.policy:
        policy = load_policy(args.policy, tc.sigma)
    else:
        policy = GaussianPolicy(np.zeros(N_FEATURES), tc.sigma)
    traj = rollout(policy, task, args.slots, np.random.default_rng(args.seed), tc.beta)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["t", "aoi", "backlog", "eps", "reward"])
    for t in range(args.slots):
        w.writerow([t, int(traj.aoi[t]), repr(float(traj.backlog[t])),
                    repr(float(traj.eps[t])), repr(float(traj.reward[t]))])
    return EXIT_OK


def cmd_inspect(args) -> int:
    kb = io.load_snapshot(args.snapshot)
    print(f"M = {kb.M}")
    print(f"h = {kb.h}")
    print(f"L = {kb.L.shape[0]} x {kb.L.shape[1]}")
    print("task_id,lambda,abar,alpha,eps_max,nnz_s,visits")
    for tid in sorted(kb.registry):
        rec = kb.registry[tid]
        lam, abar, alpha, emax = rec.task.as_tuple()
        print(f"{tid},{lam:.6g},{abar:.6g},{alpha:.6g},{emax:.6g},"
              f"{int(np.count_nonzero(rec.s))},{rec.visits}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aoi-llrl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a knowledge base")
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=_u64)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="compare against plain policy gradient")
    e.add_argument("--snapshot", required=True)
    e.add_argument("--config")
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=_u64)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="print one rollout as CSV")
    s.add_argument("--task", required=True)
    s.add_argument("--slots", type=int, required=True)
    s.add_argument("--policy")
    s.add_argument("--seed", type=_u64, default=0)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("inspect", help="summarise a snapshot")
    i.add_argument("--snapshot", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.SnapshotError, SolverError, OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

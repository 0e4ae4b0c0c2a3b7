"""Command-line interface.

Subcommands: ``train``, ``eval``, ``verify``, ``cost``, ``gen-data``.
Exit codes: 0 success, 1 verification failure, 2 config/schema error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, load_config
from .core import DivergenceError, LayerSpec
from .datasets import DatasetFormatError, load_dataset, save_dataset, two_moons, xor_dataset
from .harness import evaluate_checkpoint, train_from_config
from .pcn import InferenceConfig
from .topology import build_mask, cost_report, parse_kinds
from .verify import SUITE_NAMES, format_report, run_suite

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcgraph",
        description="Predictive coding networks and graphs: train, evaluate, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model from a config file")
    train.add_argument("--config", required=True, help="run config file")
    train.add_argument("--seed", required=True, type=int,
                       help="seed for all randomness in the run")
    train.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    evaluate.add_argument("checkpoint")
    evaluate.add_argument("dataset")
    evaluate.add_argument("--max-steps", type=int, default=2000)
    evaluate.add_argument("--step-size", type=float, default=0.05)
    evaluate.add_argument("--stop-tolerance", type=float, default=1e-8)
    evaluate.add_argument("--solver", default="auto",
                          choices=("auto", "exact", "gradient-descent"))

    verify = sub.add_parser("verify", help="run a numeric verification suite")
    verify.add_argument("suite", choices=(*SUITE_NAMES, "all"))
    verify.add_argument("--seed", type=int, default=0)

    cost = sub.add_parser("cost", help="operation counts for a mask and step budget")
    cost.add_argument("--sizes", required=True,
                      help="comma-separated layer widths, e.g. 2,3,3,2")
    cost.add_argument("--connections", default="forward",
                      help="comma-separated connection kinds")
    cost.add_argument("--steps", required=True, type=int,
                      help="inference steps to account for")

    gen = sub.add_parser("gen-data", help="write a built-in dataset as CSV")
    gen.add_argument("--kind", required=True, choices=("xor", "two-moons"))
    gen.add_argument("--n", type=int, default=200, help="sample count (two-moons)")
    gen.add_argument("--noise", type=float, default=0.1, help="noise std (two-moons)")
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", required=True, help="output CSV path")
    return parser


def _cmd_train(args) -> int:
    cfg = load_config(args.config, tuple(args.set))
    cfg.seed = args.seed
    ckpt, rows = train_from_config(cfg)
    last = rows[-1]
    print(f"trained {ckpt.layers.sizes} for {len(rows)} epochs "
          f"(seed {cfg.seed}, {ckpt.model.n_edges} weights)")
    print(f"final energy {last.energy:.6g}, train acc {last.train_acc:.3f}, "
          f"test acc {last.test_acc:.3f}")
    print(f"checkpoint: {cfg.checkpoint}")
    print(f"metrics:    {cfg.metrics}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    x_rows, y_rows = load_dataset(args.dataset)
    inference = InferenceConfig(args.max_steps, args.step_size,
                                args.stop_tolerance, "gradient-descent", "zero")
    accuracy, error = evaluate_checkpoint(ckpt, x_rows, y_rows, inference,
                                          args.solver)
    print(f"samples:   {len(x_rows)}")
    print(f"accuracy:  {accuracy:.6f}")
    print(f"mean output error: {error:.6g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    names = SUITE_NAMES if args.suite == "all" else (args.suite,)
    failed = False
    for name in names:
        started = time.perf_counter()
        results = run_suite(name, args.seed)
        elapsed = time.perf_counter() - started
        print(f"[{name}] seed {args.seed}, {elapsed:.2f}s")
        print(format_report(results))
        failed |= any(not r.passed for r in results)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def _cmd_cost(args) -> int:
    try:
        sizes = tuple(int(part) for part in args.sizes.split(","))
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    layers = LayerSpec(sizes)
    kinds = parse_kinds(part.strip() for part in args.connections.split(","))
    mask = build_mask(layers, kinds)
    report = cost_report(mask, args.steps, layers)
    print(f"nodes:          {report.n_nodes}")
    print(f"edges (d):      {report.n_edges}")
    print(f"steps (T):      {report.steps}")
    print(f"dense ops:      {report.dense_ops}  (N^2 T)")
    print(f"sparse ops:     {report.sparse_ops}  (d * {report.madd_factor} * T)")
    print(f"feedforward ops:{report.fnn_ops}  (L * M, forward blocks only)")
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "xor":
        x_rows, y_rows = xor_dataset()
    else:
        x_rows, y_rows = two_moons(args.n, args.noise, rng)
    save_dataset(args.out, x_rows, y_rows)
    print(f"wrote {len(x_rows)} rows ({x_rows.shape[1]} inputs, "
          f"{y_rows.shape[1]} targets) to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "verify": _cmd_verify,
    "cost": _cmd_cost,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, DatasetFormatError, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())

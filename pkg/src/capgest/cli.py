"""Command line interface.

Subcommands: synth, train, eval, cv, bench, predict, inspect.
Exit codes: 0 success, 1 usage error, 2 data error, 3 budget violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, neighbors
from .config import PipelineConfig, format_config, load_config
from .corrector import format_audit
from .errors import BudgetError, CapgestError
from .pipeline import (
    BUNDLE_SIZE_BUDGET,
    audit_report,
    bench_latency,
    cross_validate,
    evaluate,
    load_bundle,
    save_bundle,
    train_pipeline,
)
from .signals import (
    N_FEATURES,
    GestureLabel,
    assemble_sliding,
    feature_matrix,
    split_by_user,
)
from .synth import GenConfig, gen_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_samples(data_dir: Path, gen: GenConfig, seed: int):
    recordings, calib = dataio.read_dataset(data_dir)
    return assemble_sliding(
        recordings,
        calib,
        stride_frames=gen.stride_frames,
        none_ratio=gen.none_ratio,
        max_mark_overlap=gen.max_mark_overlap,
        seed=seed,
    )


def _config_from_args(args) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        config = load_config(Path(args.config), base=config)
    if getattr(args, "split_seed", None) is not None:
        config = replace(config, split_seed=args.split_seed)
    return config


def cmd_synth(args) -> int:
    gen = GenConfig(
        n_users=args.users,
        gestures_per_user_per_class=args.per_class,
        none_ratio=args.none_ratio,
        seed=args.seed,
    )
    recordings, calib = gen_dataset(gen)
    out = Path(args.out)
    dataio.write_dataset(out, recordings, calib)
    print(f"wrote {len(recordings)} recordings for {gen.n_users} users to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config_from_args(args)
    samples = _load_samples(Path(args.data), GenConfig(), args.assembly_seed)
    split = split_by_user(
        samples,
        user_counts=config.user_counts,
        seed=config.split_seed,
        pinned_hold=config.pinned_hold,
    )
    bundle = train_pipeline(config, split)
    size = save_bundle(bundle, Path(args.out))
    enabled = sum(1 for c in bundle.correctors if c.enabled)
    print(
        f"trained bundle: {len(bundle.discovered_group_ids)} error groups, "
        f"{enabled} correctors, {size} bytes -> {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    bundle = load_bundle(Path(args.bundle))
    samples = _load_samples(Path(args.data), GenConfig(), args.assembly_seed)
    split = split_by_user(
        samples,
        user_counts=bundle.config.user_counts,
        seed=bundle.config.split_seed,
        pinned_hold=bundle.config.pinned_hold,
    )
    report = evaluate(bundle, split.partition(args.split))
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(f"split: {args.split}")
        print(report.format_text(), end="")
    return EXIT_OK


def cmd_cv(args) -> int:
    config = _config_from_args(args)
    samples = _load_samples(Path(args.data), GenConfig(), args.assembly_seed)
    summary = cross_validate(config, samples, n_combos=args.combos)
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"combos: {summary['n_combos']}  pinned hold: {summary['pinned_hold']}")
        for name, paths in summary["splits"].items():
            for path, stats in paths.items():
                print(
                    f"{name:>10} {path:>9}: mean {stats['mean']:.4f} "
                    f"std {stats['std']:.4f} min {stats['min']:.4f} max {stats['max']:.4f}"
                )
    return EXIT_OK


def cmd_bench(args) -> int:
    bundle = load_bundle(Path(args.bundle))
    samples = _load_samples(Path(args.data), GenConfig(), args.assembly_seed)
    x = feature_matrix(samples[: args.max_samples])
    stats = bench_latency(bundle, x, warmup=args.warmup, iters=args.iters)
    print(f"neighbor backend: {neighbors.BACKEND}")
    for key, value in stats.items():
        print(f"{key}: {value}")
    if stats.get("n_timed", 0) and stats["p95_ms"] >= args.budget_ms:
        print(
            f"budget violation: p95 {stats['p95_ms']:.3f} ms >= {args.budget_ms} ms",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load_bundle(Path(args.bundle))
    if args.features:
        rows = []
        for line in Path(args.features).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values = [float(p) for p in line.split(",")]
            if len(values) != N_FEATURES:
                print(f"expected {N_FEATURES} features per line", file=sys.stderr)
                return EXIT_DATA
            rows.append(values)
        preds = bundle.predict_batch(np.asarray(rows))
    else:
        samples = _load_samples(Path(args.recordings), GenConfig(), args.assembly_seed)
        preds = bundle.predict_batch(feature_matrix(samples))
    for p in preds:
        print(GestureLabel(int(p)).text)
    return EXIT_OK


def cmd_inspect(args) -> int:
    bundle = load_bundle(Path(args.bundle))
    records = audit_report(bundle)
    if args.json:
        print(json.dumps(records, sort_keys=True))
    else:
        print(format_audit(records), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="capgest",
        description="Capacitive-sensor gesture recognition with an adaptive "
        "error-corrector cascade.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--users", type=int, default=15, help="number of users (default 15)")
    p.add_argument(
        "--per-class", type=int, default=70,
        help="gesture recordings per user per class (default 70)",
    )
    p.add_argument(
        "--none-ratio", type=float, default=1.5,
        help="target NONE windows vs mean gesture class count (default 1.5)",
    )
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.set_defaults(func=cmd_synth)

    def add_common(p, bundle=False):
        p.add_argument("--data", required=True, help="dataset directory")
        if bundle:
            p.add_argument("--bundle", required=True, help="bundle file")
        p.add_argument(
            "--assembly-seed", type=int, default=0,
            help="seed for NONE-window subsampling (default 0)",
        )

    p = sub.add_parser("train", help="train a model bundle")
    add_common(p)
    p.add_argument("--out", required=True, help="output bundle path")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--split-seed", type=int, help="override split seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a bundle on a dataset split")
    add_common(p, bundle=True)
    p.add_argument(
        "--split", choices=("train", "validation", "test", "hold"), default="test",
        help="partition to evaluate (default test)",
    )
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="user-grouped cross-validation")
    add_common(p)
    p.add_argument("--combos", type=int, default=10, help="number of splits (default 10)")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--split-seed", type=int, help="override base split seed")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="single-sample latency benchmark")
    add_common(p, bundle=True)
    p.add_argument("--iters", type=int, default=500, help="timed iterations (default 500)")
    p.add_argument("--warmup", type=int, default=50, help="warmup calls (default 50)")
    p.add_argument(
        "--budget-ms", type=float, default=1.0,
        help="p95 latency budget in ms; exceeding it exits 3 (default 1.0)",
    )
    p.add_argument(
        "--max-samples", type=int, default=2000,
        help="cap on distinct probe samples (default 2000)",
    )
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("predict", help="emit one label per input sample")
    p.add_argument("--bundle", required=True, help="bundle file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features", help="text file, 100 comma-separated values per line")
    src.add_argument("--recordings", help="dataset directory of raw recordings")
    p.add_argument("--assembly-seed", type=int, default=0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", help="dump the corrector audit report")
    p.add_argument("--bundle", required=True, help="bundle file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("show-config", help="print the default config file")
    p.set_defaults(func=lambda args: (print(format_config(PipelineConfig()), end=""), EXIT_OK)[1])

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"budget violation: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CapgestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())

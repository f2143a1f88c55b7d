"""Command line interface.

One executable with subcommands split, train, eval, ablate, gradcheck,
and export-embeddings.  Every subcommand takes --config PATH, --out
DIR, --seeds LIST, and repeatable --set key=value overrides; the
resolved configuration is snapshotted into the output directory so any
run can be reproduced from its artifacts.  Exit codes: 0 success, 1
validation failure, 2 numeric fault.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import RunConfig, fingerprint, parse_set_args, resolve_config, write_resolved
from .corpus import (
    CorpusSplit,
    LabelMap,
    dataset_label_map,
    load_dataset,
    make_split,
    read_split,
    three_seed_splits,
    write_split,
)
from .encoder import load_checkpoint, save_checkpoint
from .errors import ConfigError, FewtextError, NumericFault
from .evaluate import (
    ablate,
    ablation_to_json,
    accuracy,
    aggregate,
    export_embeddings,
    format_metrics,
    render_ablation_table,
    single_run_metrics,
)
from .gradcheck import TOLERANCE, run_suite
from .trainer import train, write_step_log

OUT_ROOT_ENV = "FEWTEXT_OUT_ROOT"
COMMANDS = ("split", "train", "eval", "ablate", "gradcheck", "export-embeddings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewtext", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seeds", default=None, help="comma-separated seed list")
        p.add_argument(
            "--set",
            dest="sets",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
    return parser


def _parse_seeds(arg: str | None, config: RunConfig) -> list[int]:
    if arg is None:
        return [config.seed]
    try:
        seeds = [int(s) for s in arg.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds expects comma-separated integers, got {arg!r}") from None
    if not seeds:
        raise ConfigError("--seeds is empty")
    return seeds


def _out_dir(args, create: bool = True) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get(OUT_ROOT_ENV, "runs")
        out = Path(root) / f"{args.command}-{time.strftime('%Y%m%d-%H%M%S')}"
    if create:
        out.mkdir(parents=True, exist_ok=True)
    return out


def _pool_label_map(config: RunConfig) -> LabelMap:
    if config.labels:
        return LabelMap(tuple(config.labels))
    if not config.data_path:
        raise ConfigError("need data_path (or explicit labels) to build a label map")
    return dataset_label_map(config.data_path)


def _load_or_make_split(config: RunConfig, seed: int) -> tuple[CorpusSplit, LabelMap]:
    if config.split_dir:
        return read_split(config.split_dir)
    if config.split_root:
        return read_split(Path(config.split_root) / f"seed_{seed}")
    if config.data_path:
        label_map = _pool_label_map(config)
        data = load_dataset(config.data_path, label_map)
        test = load_dataset(config.test_path, label_map) if config.test_path else []
        split = make_split(
            data,
            label_map,
            config.shots_per_class,
            config.unlabeled_count,
            config.dev_count,
            seed,
            test,
        )
        return split, label_map
    raise ConfigError("train needs split_dir, split_root, or data_path")


def cmd_split(config: RunConfig, out: Path, seeds: list[int]) -> int:
    label_map = _pool_label_map(config)
    data = load_dataset(config.data_path, label_map)
    test = load_dataset(config.test_path, label_map) if config.test_path else []
    if len(seeds) == 3:
        splits = three_seed_splits(
            data, label_map, config.shots_per_class, config.unlabeled_count,
            config.dev_count, seeds, test,
        )
    else:
        splits = [
            make_split(
                data, label_map, config.shots_per_class, config.unlabeled_count,
                config.dev_count, s, test,
            )
            for s in seeds
        ]
    write_resolved(config, out / "config.resolved")
    for split in splits:
        target = out / f"seed_{split.seed}"
        write_split(split, label_map, target)
        print(
            f"seed {split.seed}: labeled={len(split.labeled)} unlabeled={len(split.unlabeled)} "
            f"dev={len(split.dev)} test={len(split.test)} -> {target}"
        )
    return 0


def _train_one(config: RunConfig, seed: int, run_dir: Path) -> dict:
    from .figures import render_loss_curves, render_schedules

    cfg = config.replace(seed=seed)
    split, label_map = _load_or_make_split(cfg, seed)
    result = train(split, cfg, label_map)

    run_dir.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, run_dir / "config.resolved")
    write_split(split, label_map, run_dir / "split")
    write_step_log(result.states, run_dir / "steps.jsonl")
    save_checkpoint(result.params, run_dir / "checkpoint.json")
    save_checkpoint(result.best_params, run_dir / "best_checkpoint.json")

    metrics = {
        "seed": seed,
        "fingerprint": fingerprint(cfg),
        "dev_best_step": result.best_step,
        "dev_best_accuracy": result.best_dev_accuracy,
    }
    if split.test:
        metrics["test_accuracy"] = accuracy(result.best_params, split.test)
    (run_dir / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    figure_dir = run_dir / "figures"
    figure_dir.mkdir(exist_ok=True)
    render_loss_curves(result.states, figure_dir / "loss_curves.png")
    render_schedules(result.states, figure_dir / "schedules.png")
    return metrics


def cmd_train(config: RunConfig, out: Path, seeds: list[int]) -> int:
    write_resolved(config, out / "config.resolved")
    all_metrics = []
    for seed in seeds:
        run_dir = out if len(seeds) == 1 else out / f"seed_{seed}"
        metrics = _train_one(config, seed, run_dir)
        all_metrics.append(metrics)
        line = f"seed {seed}: dev-best {metrics['dev_best_accuracy']:.2f}% at step {metrics['dev_best_step']}"
        if "test_accuracy" in metrics:
            line += f", test {metrics['test_accuracy']:.2f}%"
        print(line)
    if len(seeds) > 1:
        key = "test_accuracy" if all("test_accuracy" in m for m in all_metrics) else "dev_best_accuracy"
        pooled = aggregate([single_run_metrics(m[key], m["fingerprint"]) for m in all_metrics])
        summary = {
            "metric": key,
            "seeds": seeds,
            "mean": pooled.mean,
            "sem": pooled.sem,
            "per_seed": pooled.per_seed_accuracy,
        }
        (out / "metrics.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"{key} over {len(seeds)} seeds: {format_metrics(pooled)}")
    return 0


def _load_params(config: RunConfig):
    if config.checkpoint_path:
        return load_checkpoint(config.checkpoint_path)
    if config.run_dir:
        return load_checkpoint(Path(config.run_dir) / "best_checkpoint.json")
    raise ConfigError("need run_dir or checkpoint_path")


def _eval_label_map(config: RunConfig, params) -> LabelMap:
    if config.labels:
        return LabelMap(tuple(config.labels))
    if params.label_names:
        return LabelMap(params.label_names)
    raise ConfigError("checkpoint carries no label names; pass labels in the config")


def cmd_eval(config: RunConfig, out: Path) -> int:
    params = _load_params(config)
    if not config.data_path:
        raise ConfigError("eval needs data_path")
    examples = load_dataset(config.data_path, _eval_label_map(config, params))
    acc = accuracy(params, examples)
    doc = {
        "accuracy": acc,
        "count": len(examples),
        "data_path": config.data_path,
        "checkpoint": config.checkpoint_path or str(Path(config.run_dir) / "best_checkpoint.json"),
    }
    (out / "eval.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"accuracy {acc:.2f}% over {len(examples)} examples")
    return 0


def cmd_ablate(config: RunConfig, out: Path, seeds_arg: str | None) -> int:
    from .figures import render_ablation_chart

    if seeds_arg is None:
        seeds = [config.seed, config.seed + 1, config.seed + 2]
    else:
        seeds = _parse_seeds(seeds_arg, config)

    splits = []
    label_map: LabelMap | None = None
    if config.split_root:
        for seed in seeds:
            split, label_map = read_split(Path(config.split_root) / f"seed_{seed}")
            splits.append(split)
    else:
        if not config.data_path:
            raise ConfigError("ablate needs split_root or data_path")
        label_map = _pool_label_map(config)
        data = load_dataset(config.data_path, label_map)
        test = load_dataset(config.test_path, label_map) if config.test_path else []
        splits = three_seed_splits(
            data, label_map, config.shots_per_class, config.unlabeled_count,
            config.dev_count, seeds, test,
        )

    write_resolved(config, out / "config.resolved")
    report = ablate(config, splits, label_map)
    table = render_ablation_table(report)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    (out / "ablation.json").write_text(
        json.dumps(ablation_to_json(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    figure_dir = out / "figures"
    figure_dir.mkdir(exist_ok=True)
    render_ablation_chart(report, figure_dir / "ablation.png")
    print(table, end="")
    return 0


def cmd_gradcheck(args) -> int:
    worst = run_suite()
    ok = True
    for name, err in worst.items():
        passed = err <= TOLERANCE
        ok = ok and passed
        print(f"{name}: max rel err {err:.3e} {'PASS' if passed else 'FAIL'}")
    if args.out:
        out = _out_dir(args)
        (out / "gradcheck.json").write_text(
            json.dumps({"tolerance": TOLERANCE, "max_rel_err": worst}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    return 0 if ok else 1


def cmd_export(config: RunConfig, out: Path) -> int:
    params = _load_params(config)
    if not config.data_path:
        raise ConfigError("export-embeddings needs data_path")
    label_map = None
    if config.labels or params.label_names:
        label_map = _eval_label_map(config, params)
    examples = load_dataset(config.data_path, label_map)
    target = out / "embeddings.csv"
    export_embeddings(params, examples, target)
    print(f"wrote {len(examples)} embeddings to {target}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    try:
        config = resolve_config(args.config, parse_set_args(args.sets))
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        out = _out_dir(args)
        if args.command == "split":
            return cmd_split(config, out, _parse_seeds(args.seeds, config))
        if args.command == "train":
            return cmd_train(config, out, _parse_seeds(args.seeds, config))
        if args.command == "eval":
            return cmd_eval(config, out)
        if args.command == "ablate":
            return cmd_ablate(config, out, args.seeds)
        if args.command == "export-embeddings":
            return cmd_export(config, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return 2
    except (FewtextError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

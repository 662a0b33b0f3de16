"""Command line interface.

Commands: stats, train, evaluate, grid, ablate. Exit code 0 on success;
failures print a one-line JSON error record to stderr and exit with a
code mapped from the error category.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .configfile import parse_config_text
from .datasets import DatasetDescriptor, statistics_for
from .encoder import forward
from .errors import ConfigError, KgalignError
from .evaluation import evaluate
from .graphs import Role
from .runner import (
    RunConfig,
    ablation_table,
    load_state,
    prepare_pair,
    run_ablation,
    run_grid,
    run_single,
)

EXIT_CODES = {
    "config": 2,
    "dataset": 3,
    "validation": 4,
    "numeric": 5,
    "internal": 1,
}


def _descriptor_from_args(args) -> DatasetDescriptor:
    family, subset = args.family, args.subset
    if subset is None:
        family, _, subset = family.partition(":")
        if not subset:
            raise ConfigError(
                "dataset must be given as '<family> <subset>' or '<family>:<subset>'"
            )
    root = Path(args.root) if args.root else None
    return DatasetDescriptor(family=family, subset=subset, root_path=root)


def cmd_stats(args) -> int:
    stats = statistics_for(_descriptor_from_args(args))
    if args.json:
        print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
        return 0
    rows = [
        ("side", "triples", "entities", "relations"),
        ("left", f"{stats.triples_left:,}", f"{stats.entities_left:,}", f"{stats.relations_left:,}"),
        ("right", f"{stats.triples_right:,}", f"{stats.entities_right:,}", f"{stats.relations_right:,}"),
    ]
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    for r in rows:
        print("  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths))))
    print(f"alignments: {stats.alignments:,}")
    if stats.symmetrized_alignments is not None:
        print(f"symmetrized alignments: {stats.symmetrized_alignments:,}")
    return 0


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    result = run_single(cfg, Path(args.runs_root), force=args.force)
    status = "resumed" if result.resumed else "completed"
    print(f"run {result.config.run_hash()} {status}: {result.run_dir}")
    if result.final_loss is not None:
        print(f"final train loss: {result.final_loss:.6f}")
    if result.validation is not None:
        print("validation metrics")
        print(result.validation.to_text())
    if result.test is not None:
        print("test metrics")
        print(result.test.to_text())
    return 0


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run_dir)
    config_path = run_dir / "config.txt"
    state_path = run_dir / "state.npz"
    if not config_path.is_file():
        raise ConfigError(f"no config.txt in {run_dir}")
    if not state_path.is_file():
        raise ConfigError(
            f"no state.npz in {run_dir}; re-train with save_state = true"
        )
    cfg = RunConfig.from_file(config_path)
    pair = prepare_pair(cfg)
    state, attr_state = load_state(state_path)

    from .adjacency import build_adjacency

    adj = (build_adjacency(pair.left, cfg.adjacency), build_adjacency(pair.right, cfg.adjacency))
    enc_cfg = replace(cfg.encoder, use_weights=state.weights is not None)
    out_l, out_r, _ = forward(*adj, state, enc_cfg)
    a_l = a_r = None
    if attr_state is not None:
        attr_enc = replace(
            enc_cfg,
            dim=attr_state.features_left.shape[1],
            use_weights=attr_state.weights is not None,
        )
        a_l, a_r, _ = forward(*adj, attr_state, attr_enc)
    report = evaluate(
        out_l, out_r, pair, cfg.score,
        policy=args.policy or cfg.candidate_policy,
        split=Role(args.split),
        attr_emb_left=a_l, attr_emb_right=a_r,
        tie_diagnostics=args.tie_diagnostics,
    )
    print(report.to_text())
    out_name = f"evaluation-{report.candidate_policy}-{report.split}.json"
    (run_dir / out_name).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"written: {run_dir / out_name}")
    return 0


def cmd_grid(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    flat = parse_config_text(text, source=str(path))
    axes = {
        key[len("grid."):]: values
        for key, values in flat.items()
        if key.startswith("grid.")
    }
    base = RunConfig.from_flat(flat, source=str(path))
    result = run_grid(
        base,
        Path(args.runs_root),
        axes=axes or None,
        workers=args.workers,
    )
    print(f"grid finished: {result.n_runs} runs, {result.n_failures} failures")
    print(f"leaderboard: {result.leaderboard_path}")
    for (weights, init), cfg in sorted(result.best_per_cell.items()):
        print(
            f"best weights={'yes' if weights else 'no'} init={init}: "
            f"opt={cfg.training.optimizer} lr={cfg.training.learning_rate} "
            f"layers={cfg.encoder.n_layers} neg={cfg.training.n_negatives} "
            f"epochs={cfg.training.n_epochs} ({cfg.run_hash()})"
        )
    return 0


def cmd_ablate(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    flat = parse_config_text(text, source=str(path))
    dataset_keys = flat.get("ablate.datasets")
    base = RunConfig.from_flat(flat, source=str(path))
    if dataset_keys:
        descriptors = []
        for token in dataset_keys:
            family, _, subset = str(token).partition(":")
            if not subset:
                raise ConfigError(
                    f"ablate.datasets entries look like family:subset, got {token!r}"
                )
            descriptors.append(
                DatasetDescriptor(
                    family=family, subset=subset, root_path=base.dataset.root_path
                )
            )
    else:
        descriptors = [base.dataset]
    cells = run_ablation(
        base,
        descriptors,
        Path(args.runs_root),
        n_seeds=args.seeds,
        use_tuned=not args.no_tuned,
    )
    table = ablation_table(cells, direction=args.direction)
    print(table)
    out_dir = Path(args.runs_root)
    (out_dir / "ablation.json").write_text(
        json.dumps([c.to_dict() for c in cells], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (out_dir / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    print(f"written: {out_dir / 'ablation.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgalign",
        description="Knowledge graph entity alignment with a weightless GCN encoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("family", help="dataset family, or combined '<family>:<subset>'")
    p.add_argument("subset", nargs="?", default=None)
    p.add_argument("--root", default=None, help="dataset directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("config")
    p.add_argument("--runs-root", default="runs")
    p.add_argument("--force", action="store_true", help="recompute even if cached")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="re-evaluate a persisted run")
    p.add_argument("run_dir")
    p.add_argument("--policy", choices=["test-only", "all-entities"], default=None)
    p.add_argument("--split", choices=["validation", "test"], default="test")
    p.add_argument("--tie-diagnostics", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="hyperparameter search over all ablation cells")
    p.add_argument("config")
    p.add_argument("--runs-root", default="runs")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ablate", help="seed-aggregated ablation table")
    p.add_argument("config")
    p.add_argument("--runs-root", default="runs")
    p.add_argument("--seeds", type=int, default=None, help="override n_seeds")
    p.add_argument("--direction", default="left_to_right",
                   choices=["left_to_right", "right_to_left", "mean"])
    p.add_argument("--no-tuned", action="store_true",
                   help="use the base config everywhere instead of tuned presets")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KgalignError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except Exception as exc:  # pragma: no cover - last resort
        print(json.dumps({"error": "internal", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

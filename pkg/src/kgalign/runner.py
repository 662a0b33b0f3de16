"""Experiment orchestration: single runs, grid search, ablation tables.

Every run is keyed by a hash of its fully resolved configuration
(including the seed), and its artifacts live under
runs_root/<hash>/: the canonical config text, a JSON report, the loss
trace, and optionally the trained state. A run whose report already
exists is not recomputed, which makes large grids resumable after a
crash; failures leave a persisted error record instead of a report.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from .adjacency import AdjacencyConfig
from .configfile import format_config, parse_config_text
from .datasets import DatasetDescriptor, load, split
from .encoder import (
    EmbeddingState,
    EncoderConfig,
    forward,
    resolve_init_std,
)
from .errors import ConfigError, KgalignError
from .evaluation import MetricsReport, ScoreConfig, evaluate
from .graphs import GraphPair, Role, require_valid
from .presets import ABLATION_CELLS, tuned_hyperparameters
from .training import TrainConfig, loss_trace_tsv, train

REPORT_FORMAT = 1

# Search axes of the large-scale sweep; together with the four ablation
# cells these enumerate 1,440 configurations.
DEFAULT_GRID_AXES = {
    "training.optimizer": ["adam", "sgd"],
    "training.learning_rate": [0.1, 0.5, 1.0, 10.0, 20.0],
    "encoder.n_layers": [1, 2, 3],
    "training.n_negatives": [5, 50, 100],
    "training.n_epochs": [10, 500, 2000, 3000],
}


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetDescriptor
    adjacency: AdjacencyConfig = AdjacencyConfig()
    encoder: EncoderConfig = EncoderConfig()
    training: TrainConfig = TrainConfig()
    score: ScoreConfig = ScoreConfig()
    candidate_policy: str = "test-only"
    seed: int = 0
    n_seeds: int = 5
    split_seed: int = 0
    train_fraction: float = 0.3
    val_fraction: float = 0.2
    attribute_margin: float | None = None
    save_state: bool = True
    evaluate_test: bool = True

    def to_flat(self) -> dict:
        """Flat dotted-key mapping; the canonical serialized form."""
        flat = {
            "dataset.family": self.dataset.family,
            "dataset.subset": self.dataset.subset,
            "adjacency.variant": self.adjacency.variant,
            "adjacency.clamp": self.adjacency.clamp,
            "adjacency.clamp_floor": self.adjacency.clamp_floor,
            "adjacency.normalization": self.adjacency.normalization,
            "adjacency.add_self_loops": self.adjacency.add_self_loops,
            "encoder.n_layers": self.encoder.n_layers,
            "encoder.dim": self.encoder.dim,
            "encoder.use_weights": self.encoder.use_weights,
            "encoder.normalize_features": self.encoder.normalize_features,
            "training.optimizer": self.training.optimizer,
            "training.learning_rate": self.training.learning_rate,
            "training.n_negatives": self.training.n_negatives,
            "training.n_epochs": self.training.n_epochs,
            "training.margin": self.training.margin,
            "score.beta": self.score.beta,
            "candidate_policy": self.candidate_policy,
            "seed": self.seed,
            "n_seeds": self.n_seeds,
            "split_seed": self.split_seed,
            "train_fraction": self.train_fraction,
            "val_fraction": self.val_fraction,
            "save_state": self.save_state,
            "evaluate_test": self.evaluate_test,
        }
        if self.dataset.root_path is not None:
            flat["dataset.root"] = str(self.dataset.root_path)
        if self.encoder.init_preset is not None:
            flat["encoder.init"] = self.encoder.init_preset
        else:
            flat["encoder.init"] = self.encoder.init_std
        if self.attribute_margin is not None:
            flat["attribute_margin"] = self.attribute_margin
        return flat

    @classmethod
    def from_flat(cls, flat: dict, source: str = "<config>") -> RunConfig:
        flat = dict(flat)

        def take(key, default=None, required=False):
            if key in flat:
                return flat.pop(key)
            if required:
                raise ConfigError(f"{source}: missing required key {key!r}")
            return default

        dataset = DatasetDescriptor(
            family=str(take("dataset.family", required=True)),
            subset=str(take("dataset.subset", required=True)),
            root_path=(lambda r: Path(r) if r is not None else None)(take("dataset.root")),
        )
        adjacency = AdjacencyConfig(
            variant=take("adjacency.variant", "count"),
            clamp=bool(take("adjacency.clamp", False)),
            clamp_floor=float(take("adjacency.clamp_floor", 0.3)),
            normalization=take("adjacency.normalization", "row"),
            add_self_loops=bool(take("adjacency.add_self_loops", True)),
        )
        dim = int(take("encoder.dim", 200))
        init = take("encoder.init", "unit")
        if isinstance(init, str):
            init_preset, init_std = init, resolve_init_std(init, dim)
        else:
            init_preset, init_std = None, float(init)
        encoder = EncoderConfig(
            n_layers=int(take("encoder.n_layers", 2)),
            dim=dim,
            use_weights=bool(take("encoder.use_weights", False)),
            init_std=init_std,
            init_preset=init_preset,
            normalize_features=bool(take("encoder.normalize_features", True)),
        )
        training = TrainConfig(
            optimizer=take("training.optimizer", "adam"),
            learning_rate=float(take("training.learning_rate", 1.0)),
            n_negatives=int(take("training.n_negatives", 50)),
            n_epochs=int(take("training.n_epochs", 2000)),
            margin=float(take("training.margin", 3.0)),
        )
        score = ScoreConfig(beta=float(take("score.beta", 1.0)))
        attr_margin = take("attribute_margin")
        cfg = cls(
            dataset=dataset,
            adjacency=adjacency,
            encoder=encoder,
            training=training,
            score=score,
            candidate_policy=str(take("candidate_policy", "test-only")),
            seed=int(take("seed", 0)),
            n_seeds=int(take("n_seeds", 5)),
            split_seed=int(take("split_seed", 0)),
            train_fraction=float(take("train_fraction", 0.3)),
            val_fraction=float(take("val_fraction", 0.2)),
            attribute_margin=None if attr_margin is None else float(attr_margin),
            save_state=bool(take("save_state", True)),
            evaluate_test=bool(take("evaluate_test", True)),
        )
        unknown = [k for k in flat if not k.startswith(("grid.", "ablate."))]
        if unknown:
            raise ConfigError(f"{source}: unknown config keys {sorted(unknown)}")
        return cfg

    @classmethod
    def from_file(cls, path: Path) -> RunConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        return cls.from_flat(parse_config_text(text, source=str(path)), source=str(path))

    def canonical_text(self) -> str:
        return format_config(self.to_flat())

    def run_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:16]


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """New config with dotted-key overrides applied."""
    flat = cfg.to_flat()
    flat.update(overrides)
    return RunConfig.from_flat(flat)


def with_cell(cfg: RunConfig, use_weights: bool, init_preset: str) -> RunConfig:
    return apply_overrides(
        cfg, {"encoder.use_weights": use_weights, "encoder.init": init_preset}
    )


@dataclass
class RunResult:
    config: RunConfig
    run_dir: Path
    validation: MetricsReport | None
    test: MetricsReport | None
    final_loss: float | None
    resumed: bool = False

    def report_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "config": self.config.to_flat(),
            "run_hash": self.config.run_hash(),
            "validation": None if self.validation is None else self.validation.to_dict(),
            "test": None if self.test is None else self.test.to_dict(),
            "final_loss": self.final_loss,
        }


def _derive_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1)[0]) for c in children]


def _save_state(path: Path, state: EmbeddingState, attr_state: EmbeddingState | None):
    arrays = {
        "features_left": state.features_left,
        "features_right": state.features_right,
    }
    if state.weights is not None:
        for i, w in enumerate(state.weights):
            arrays[f"weight_{i}"] = w
    if attr_state is not None:
        arrays["attr_features_left"] = attr_state.features_left
        arrays["attr_features_right"] = attr_state.features_right
        if attr_state.weights is not None:
            for i, w in enumerate(attr_state.weights):
                arrays[f"attr_weight_{i}"] = w
    np.savez_compressed(path, **arrays)


def load_state(path: Path) -> tuple[EmbeddingState, EmbeddingState | None]:
    with np.load(path) as data:
        def weights(prefix):
            ws = []
            for i in range(16):
                key = f"{prefix}{i}"
                if key in data:
                    ws.append(data[key])
            return ws or None

        state = EmbeddingState(
            features_left=data["features_left"],
            features_right=data["features_right"],
            weights=weights("weight_"),
        )
        attr_state = None
        if "attr_features_left" in data:
            attr_state = EmbeddingState(
                features_left=data["attr_features_left"],
                features_right=data["attr_features_right"],
                weights=weights("attr_weight_"),
            )
    return state, attr_state


def prepare_pair(cfg: RunConfig) -> GraphPair:
    """Load, validate and role-split the dataset of a run config."""
    pair = load(cfg.dataset)
    require_valid(pair)
    alignment = split(
        pair.alignment,
        train_fraction=cfg.train_fraction,
        val_fraction_of_train=cfg.val_fraction,
        seed=cfg.split_seed,
    )
    return dataclasses.replace(pair, alignment=alignment)


def _train_pathways(cfg: RunConfig, pair: GraphPair):
    """Structure training plus the optional independent attribute run.

    The propagation matrices contain no trainable parameters, so they
    are built once here and shared by training and final encoding.
    """
    from .adjacency import build_adjacency

    adjacencies = (
        build_adjacency(pair.left, cfg.adjacency),
        build_adjacency(pair.right, cfg.adjacency),
    )
    enc_seed, train_seed, attr_enc_seed, attr_train_seed = _derive_seeds(cfg.seed, 4)
    enc_cfg = replace(cfg.encoder, seed=enc_seed)
    train_cfg = replace(cfg.training, seed=train_seed)
    state, losses = train(pair, cfg.adjacency, enc_cfg, train_cfg, adjacencies=adjacencies)
    out_l, out_r, _ = forward(*adjacencies, state, enc_cfg)

    attr_state = None
    attr_emb = (None, None)
    if cfg.score.beta < 1.0:
        if pair.attributes_left is None or pair.attributes_right is None:
            raise ConfigError("score.beta < 1 but the dataset has no attribute tables")
        attr_dim = pair.attributes_left.attribute_dim
        attr_enc = replace(
            cfg.encoder, dim=attr_dim, seed=attr_enc_seed, init_preset=None, init_std=1.0
        )
        attr_train = replace(
            cfg.training,
            seed=attr_train_seed,
            margin=cfg.attribute_margin if cfg.attribute_margin is not None else cfg.training.margin,
        )
        attr_state, _ = train(
            pair,
            cfg.adjacency,
            attr_enc,
            attr_train,
            initial_features=(
                pair.attributes_left.features,
                pair.attributes_right.features,
            ),
            adjacencies=adjacencies,
        )
        a_l, a_r, _ = forward(*adjacencies, attr_state, attr_enc)
        attr_emb = (a_l, a_r)
    return state, attr_state, losses, (out_l, out_r), attr_emb


def run_single(cfg: RunConfig, runs_root: Path, force: bool = False) -> RunResult:
    """Execute one run end to end and persist its artifacts.

    Returns the cached result when the run directory already holds a
    report (unless force is set). Failures persist an error record in
    the run directory and re-raise.
    """
    runs_root = Path(runs_root)
    run_dir = runs_root / cfg.run_hash()
    report_path = run_dir / "report.json"
    if report_path.is_file() and not force:
        data = json.loads(report_path.read_text(encoding="utf-8"))
        return RunResult(
            config=cfg,
            run_dir=run_dir,
            validation=_opt_report(data["validation"]),
            test=_opt_report(data["test"]),
            final_loss=data["final_loss"],
            resumed=True,
        )
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.canonical_text(), encoding="utf-8")
    try:
        pair = prepare_pair(cfg)
        state, attr_state, losses, (out_l, out_r), (a_l, a_r) = _train_pathways(cfg, pair)

        validation = None
        if len(pair.alignment.validation_pairs) > 0:
            validation = evaluate(
                out_l, out_r, pair, cfg.score,
                policy=cfg.candidate_policy, split=Role.VALIDATION,
                attr_emb_left=a_l, attr_emb_right=a_r,
            )
        test = None
        if cfg.evaluate_test:
            test = evaluate(
                out_l, out_r, pair, cfg.score,
                policy=cfg.candidate_policy, split=Role.TEST,
                attr_emb_left=a_l, attr_emb_right=a_r,
            )

        (run_dir / "loss_trace.tsv").write_text(loss_trace_tsv(losses), encoding="utf-8")
        if cfg.save_state:
            _save_state(run_dir / "state.npz", state, attr_state)
        result = RunResult(
            config=cfg,
            run_dir=run_dir,
            validation=validation,
            test=test,
            final_loss=losses[-1] if losses else None,
        )
        report_path.write_text(
            json.dumps(result.report_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return result
    except Exception as exc:
        category = exc.category if isinstance(exc, KgalignError) else "internal"
        record = {
            "category": category,
            "message": str(exc),
            "config": cfg.to_flat(),
        }
        (run_dir / "error.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        raise


def _opt_report(d) -> MetricsReport | None:
    return None if d is None else MetricsReport.from_dict(d)


def enumerate_grid(
    base: RunConfig, axes: dict[str, list] | None = None, cells=ABLATION_CELLS
) -> list[RunConfig]:
    """All run configs of the search: Cartesian product of the axes,
    repeated for every ablation cell."""
    axes = dict(axes if axes is not None else DEFAULT_GRID_AXES)
    for key, values in axes.items():
        if not values:
            raise ConfigError(f"grid axis {key!r} is empty")
    keys = sorted(axes)
    configs = []
    for use_weights, init_preset in cells:
        cell_cfg = with_cell(base, use_weights, init_preset)
        for combo in product(*(axes[k] for k in keys)):
            overrides = dict(zip(keys, combo))
            overrides["save_state"] = False
            overrides["evaluate_test"] = False
            configs.append(apply_overrides(cell_cfg, overrides))
    return configs


def _grid_worker(args):
    cfg, runs_root = args
    try:
        result = run_single(cfg, runs_root)
        h1 = None
        if result.validation is not None:
            h1 = result.validation.mean.hits_at[1]
        return (cfg.run_hash(), h1, None)
    except Exception as exc:  # recorded, grid continues
        return (cfg.run_hash(), None, f"{type(exc).__name__}: {exc}")


@dataclass
class GridResult:
    best_per_cell: dict[tuple[bool, str], RunConfig]
    leaderboard_path: Path
    n_runs: int
    n_failures: int


def run_grid(
    base: RunConfig,
    runs_root: Path,
    axes: dict[str, list] | None = None,
    workers: int = 1,
) -> GridResult:
    """Run the full search and select the best config per ablation cell
    by validation H@1 (mean of the two directions).

    Individual run failures are recorded on the leaderboard and the grid
    continues. The leaderboard file is written only by this process.
    """
    runs_root = Path(runs_root)
    runs_root.mkdir(parents=True, exist_ok=True)
    configs = enumerate_grid(base, axes)
    jobs = [(cfg, runs_root) for cfg in configs]
    by_hash = {cfg.run_hash(): cfg for cfg in configs}
    best: dict[tuple[bool, str], tuple[float, RunConfig]] = {}
    n_failures = 0
    leaderboard = runs_root / "leaderboard.tsv"
    # the ledger is append-only while the grid runs, written by this
    # process alone; workers only produce (hash, h1, error) outcomes
    with leaderboard.open("w", encoding="utf-8") as ledger:
        ledger.write("run_hash\tuse_weights\tinit\tvalidation_h1\terror\n")
        if workers > 1:
            pool = ProcessPoolExecutor(max_workers=workers)
            outcomes = pool.map(_grid_worker, jobs)
        else:
            pool = None
            outcomes = map(_grid_worker, jobs)
        try:
            for run_hash, h1, err in outcomes:
                cfg = by_hash[run_hash]
                cell = (cfg.encoder.use_weights, cfg.encoder.init_preset)
                ledger.write(
                    f"{run_hash}\t{cfg.encoder.use_weights}\t{cfg.encoder.init_preset}"
                    f"\t{'' if h1 is None else repr(h1)}\t{err or ''}\n"
                )
                ledger.flush()
                if err is not None:
                    n_failures += 1
                    continue
                if h1 is not None and (cell not in best or h1 > best[cell][0]):
                    best[cell] = (h1, cfg)
        finally:
            if pool is not None:
                pool.shutdown()

    best_cfgs = {
        cell: apply_overrides(cfg, {"save_state": True, "evaluate_test": True})
        for cell, (_, cfg) in best.items()
    }
    best_path = runs_root / "grid_best.json"
    best_path.write_text(
        json.dumps(
            {
                f"weights={int(c[0])},init={c[1]}": cfg.to_flat()
                for c, cfg in best_cfgs.items()
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return GridResult(
        best_per_cell=best_cfgs,
        leaderboard_path=leaderboard,
        n_runs=len(configs),
        n_failures=n_failures,
    )


@dataclass
class AblationCell:
    use_weights: bool
    init_preset: str
    dataset: str
    n_seeds: int
    # direction -> metric -> (mean, std); std is None for a single seed
    aggregates: dict[str, dict[str, tuple[float, float | None]]]
    run_hashes: list[str]

    def to_dict(self) -> dict:
        return {
            "use_weights": self.use_weights,
            "init_preset": self.init_preset,
            "dataset": self.dataset,
            "n_seeds": self.n_seeds,
            "aggregates": {
                direction: {
                    metric: {"mean": m, "std": s}
                    for metric, (m, s) in metrics.items()
                }
                for direction, metrics in self.aggregates.items()
            },
            "run_hashes": self.run_hashes,
        }


_ABLATION_METRICS = ("h1", "h10", "mr", "mrr")


def _metric_values(report: MetricsReport, direction: str) -> dict[str, float]:
    m = report.direction(direction)
    return {
        "h1": m.hits_at[1],
        "h10": m.hits_at[10],
        "mr": m.mean_rank,
        "mrr": m.mrr,
    }


def _aggregate(reports: list[MetricsReport]) -> dict:
    out: dict[str, dict[str, tuple[float, float | None]]] = {}
    for direction in ("left_to_right", "right_to_left", "mean"):
        per_metric: dict[str, tuple[float, float | None]] = {}
        for metric in _ABLATION_METRICS:
            vals = np.array([_metric_values(r, direction)[metric] for r in reports])
            std = float(np.std(vals, ddof=1)) if len(vals) >= 2 else None
            per_metric[metric] = (float(vals.mean()), std)
        out[direction] = per_metric
    return out


def run_ablation(
    base: RunConfig,
    datasets: list[DatasetDescriptor],
    runs_root: Path,
    n_seeds: int | None = None,
    cells=ABLATION_CELLS,
    cell_overrides: dict | None = None,
    use_tuned: bool = True,
) -> list[AblationCell]:
    """Seed-aggregated results for every dataset and ablation cell.

    Hyperparameters per cell come from the tuned presets unless
    use_tuned is off (then the base config's values apply everywhere);
    cell_overrides maps (use_weights, init_preset) to extra dotted-key
    overrides, letting grid winners replace the presets.
    """
    runs_root = Path(runs_root)
    n = n_seeds if n_seeds is not None else base.n_seeds
    if n < 1:
        raise ConfigError("n_seeds must be at least 1")
    results = []
    for desc in datasets:
        ds_base = apply_overrides(
            base,
            {
                "dataset.family": desc.family,
                "dataset.subset": desc.subset,
                **(
                    {"dataset.root": str(desc.root_path)}
                    if desc.root_path is not None
                    else {}
                ),
            },
        )
        for use_weights, init_preset in cells:
            cfg = with_cell(ds_base, use_weights, init_preset)
            if use_tuned and not desc.is_toy:
                params = tuned_hyperparameters(
                    desc.family, desc.subset, use_weights, init_preset
                )
                cfg = apply_overrides(
                    cfg,
                    {
                        "training.optimizer": params["optimizer"],
                        "training.n_negatives": params["n_negatives"],
                        "training.n_epochs": params["n_epochs"],
                        "training.learning_rate": params["learning_rate"],
                        "encoder.n_layers": params["n_layers"],
                    },
                )
            if cell_overrides and (use_weights, init_preset) in cell_overrides:
                cfg = apply_overrides(cfg, cell_overrides[(use_weights, init_preset)])
            reports = []
            hashes = []
            for s in range(n):
                seed_cfg = apply_overrides(cfg, {"seed": base.seed + s})
                result = run_single(seed_cfg, runs_root)
                if result.test is None:
                    raise ConfigError("ablation runs must evaluate the test split")
                reports.append(result.test)
                hashes.append(seed_cfg.run_hash())
            results.append(
                AblationCell(
                    use_weights=use_weights,
                    init_preset=init_preset,
                    dataset=desc.key(),
                    n_seeds=n,
                    aggregates=_aggregate(reports),
                    run_hashes=hashes,
                )
            )
    return results


_METRIC_LABELS = {"h1": "H@1", "h10": "H@10", "mr": "MR", "mrr": "MRR"}


def ablation_table(cells: list[AblationCell], direction: str = "left_to_right") -> str:
    """Aligned-column text table, one block per metric, one column per
    ablation cell; entries are mean or mean +- std over seeds."""
    cell_keys = []
    for c in cells:
        key = (c.use_weights, c.init_preset)
        if key not in cell_keys:
            cell_keys.append(key)
    datasets = []
    for c in cells:
        if c.dataset not in datasets:
            datasets.append(c.dataset)
    by_key = {(c.dataset, c.use_weights, c.init_preset): c for c in cells}

    def header(key):
        w, init = key
        return f"{'weights' if w else 'no-weights'}/{init}"

    lines = []
    col0 = max([len(d) for d in datasets] + [len("dataset")])
    widths = [max(len(header(k)), 18) for k in cell_keys]
    for metric in _ABLATION_METRICS:
        lines.append(f"[{_METRIC_LABELS[metric]}] ({direction})")
        row = "dataset".ljust(col0) + "  " + "  ".join(
            header(k).rjust(w) for k, w in zip(cell_keys, widths)
        )
        lines.append(row)
        for ds in datasets:
            cells_row = []
            for key, w in zip(cell_keys, widths):
                c = by_key.get((ds,) + key)
                if c is None:
                    cells_row.append("-".rjust(w))
                    continue
                mean, std = c.aggregates[direction][metric]
                fmt = f"{mean:.2f}" if metric != "mrr" else f"{mean:.4f}"
                if std is not None:
                    fmt += f" +- {std:.2f}" if metric != "mrr" else f" +- {std:.4f}"
                cells_row.append(fmt.rjust(w))
            lines.append(ds.ljust(col0) + "  " + "  ".join(cells_row))
        lines.append("")
    return "\n".join(lines)

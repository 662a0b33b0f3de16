import json

import numpy as np
import pytest

from kgalign.configfile import format_config, parse_config_text
from kgalign.datasets import DatasetDescriptor
from kgalign.errors import ConfigError
from kgalign.presets import ABLATION_CELLS, tuned_hyperparameters
from kgalign.runner import (
    DEFAULT_GRID_AXES,
    RunConfig,
    ablation_table,
    apply_overrides,
    enumerate_grid,
    load_state,
    run_ablation,
    run_grid,
    run_single,
)


def toy_config(**overrides):
    flat = {
        "dataset.family": "toy",
        "dataset.subset": "cycle-8-4",
        "encoder.dim": 16,
        "encoder.n_layers": 2,
        "encoder.use_weights": False,
        "encoder.init": "unit",
        "training.optimizer": "adam",
        "training.learning_rate": 0.5,
        "training.n_negatives": 2,
        "training.n_epochs": 120,
        "training.margin": 3.0,
        "seed": 0,
        "n_seeds": 2,
    }
    flat.update(overrides)
    return RunConfig.from_flat(flat)


def test_config_flat_roundtrip():
    cfg = toy_config()
    again = RunConfig.from_flat(cfg.to_flat())
    assert again == cfg
    assert again.run_hash() == cfg.run_hash()


def test_config_text_roundtrip():
    cfg = toy_config()
    text = cfg.canonical_text()
    parsed = RunConfig.from_flat(parse_config_text(text))
    assert parsed == cfg


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        RunConfig.from_flat({**toy_config().to_flat(), "typo.key": 1})


def test_config_requires_dataset():
    with pytest.raises(ConfigError, match="dataset.family"):
        RunConfig.from_flat({})


def test_configfile_parse_errors():
    with pytest.raises(ConfigError, match="expected"):
        parse_config_text("just a line")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("a.b = 1\na.b = 2")
    parsed = parse_config_text("x = 2  # comment\n# full comment\n\ny = true")
    assert parsed == {"x": 2, "y": True}


def test_format_config_is_sorted_and_stable():
    text = format_config({"b": 1.5, "a": True, "c": "s"})
    assert text == "a = true\nb = 1.5\nc = s\n"


def test_run_single_persists_artifacts(tmp_path):
    cfg = toy_config()
    result = run_single(cfg, tmp_path)
    assert result.run_dir.is_dir()
    assert (result.run_dir / "config.txt").is_file()
    assert (result.run_dir / "loss_trace.tsv").is_file()
    assert (result.run_dir / "state.npz").is_file()
    report = json.loads((result.run_dir / "report.json").read_text())
    assert report["config"] == {
        k: v for k, v in cfg.to_flat().items()
    }
    assert report["test"]["directions"]["left_to_right"]["n_test"] == 4
    state, attr_state = load_state(result.run_dir / "state.npz")
    assert state.features_left.shape == (8, 16)
    assert attr_state is None


def test_run_single_resumes_from_cache(tmp_path):
    cfg = toy_config()
    first = run_single(cfg, tmp_path)
    second = run_single(cfg, tmp_path)
    assert not first.resumed and second.resumed
    assert second.test.to_dict() == first.test.to_dict()


def test_run_single_force_recomputes_identically(tmp_path):
    cfg = toy_config()
    first = run_single(cfg, tmp_path)
    report_bytes = (first.run_dir / "report.json").read_bytes()
    second = run_single(cfg, tmp_path, force=True)
    assert not second.resumed
    assert (second.run_dir / "report.json").read_bytes() == report_bytes


def test_run_zero_epochs_reports_random_init_metrics(tmp_path):
    cfg = toy_config(**{"training.n_epochs": 0})
    result = run_single(cfg, tmp_path)
    assert result.final_loss is None

    # the report must equal a direct evaluation of the random init
    from dataclasses import replace

    from kgalign.adjacency import build_adjacency
    from kgalign.encoder import forward, init_state
    from kgalign.evaluation import evaluate
    from kgalign.graphs import Role
    from kgalign.runner import _derive_seeds, prepare_pair

    pair = prepare_pair(cfg)
    enc_seed = _derive_seeds(cfg.seed, 4)[0]
    enc_cfg = replace(cfg.encoder, seed=enc_seed)
    state = init_state(enc_cfg, 8, 8)
    adjs = (build_adjacency(pair.left, cfg.adjacency),
            build_adjacency(pair.right, cfg.adjacency))
    out_l, out_r, _ = forward(*adjs, state, enc_cfg)
    expected = evaluate(out_l, out_r, pair, cfg.score, split=Role.TEST)
    assert result.test.to_dict() == expected.to_dict()


def test_run_single_persists_failure_record(tmp_path):
    cfg = toy_config(**{"score.beta": 0.5})  # toy has no attributes
    with pytest.raises(ConfigError):
        run_single(cfg, tmp_path)
    record = json.loads((tmp_path / cfg.run_hash() / "error.json").read_text())
    assert record["category"] == "config"
    assert "attribute" in record["message"]


def test_different_seeds_get_different_run_dirs(tmp_path):
    a = toy_config(seed=0)
    b = toy_config(seed=1)
    assert a.run_hash() != b.run_hash()


def test_enumerate_default_grid_cardinality():
    cfg = toy_config()
    configs = enumerate_grid(cfg, DEFAULT_GRID_AXES)
    assert len(configs) == 1440
    assert len({c.run_hash() for c in configs}) == 1440


def test_enumerate_grid_single_point_gives_one_per_cell():
    cfg = toy_config()
    configs = enumerate_grid(cfg, {"training.n_epochs": [5]})
    assert len(configs) == 4
    cells = {(c.encoder.use_weights, c.encoder.init_preset) for c in configs}
    assert cells == set(ABLATION_CELLS)


def test_enumerate_grid_empty_axis_rejected():
    with pytest.raises(ConfigError, match="empty"):
        enumerate_grid(toy_config(), {"training.n_epochs": []})


def test_run_grid_selects_best_and_writes_leaderboard(tmp_path):
    base = toy_config(
        **{
            "dataset.subset": "cycle-8-4",
            "train_fraction": 0.5,
            "val_fraction": 0.5,
            "training.n_epochs": 40,
        }
    )
    axes = {"training.learning_rate": [0.05, 0.5]}
    result = run_grid(base, tmp_path, axes=axes)
    assert result.n_runs == 8
    assert result.n_failures == 0
    assert set(result.best_per_cell) == set(ABLATION_CELLS)
    lines = result.leaderboard_path.read_text().strip().split("\n")
    assert len(lines) == 9  # header + 8 runs
    best_file = json.loads((tmp_path / "grid_best.json").read_text())
    assert len(best_file) == 4
    # best configs are re-runnable with full evaluation enabled
    for cfg in result.best_per_cell.values():
        assert cfg.evaluate_test and cfg.save_state


def test_run_grid_records_failures_and_continues(tmp_path):
    # beta < 1 on the attribute-less toy dataset fails at run time, so
    # half the grid fails while the other half still gets selected
    base = toy_config(**{"train_fraction": 0.5, "val_fraction": 0.5,
                         "training.n_epochs": 5})
    axes = {"score.beta": [1.0, 0.5]}
    result = run_grid(base, tmp_path, axes=axes)
    assert result.n_failures == 4  # the beta = 0.5 run of every cell
    assert set(result.best_per_cell) == set(ABLATION_CELLS)
    failed_lines = [
        line for line in result.leaderboard_path.read_text().splitlines()
        if "ConfigError" in line
    ]
    assert len(failed_lines) == 4


def test_run_ablation_aggregates_match_persisted_reports(tmp_path):
    base = toy_config(**{"training.n_epochs": 60})
    desc = DatasetDescriptor("toy", "cycle-8-4")
    cells = run_ablation(
        base, [desc], tmp_path, n_seeds=2,
        cells=((False, "unit"), (True, "scaled")),
    )
    assert len(cells) == 2
    for cell in cells:
        assert cell.n_seeds == 2
        # recompute the aggregate from the persisted per-seed reports
        h1 = []
        for run_hash in cell.run_hashes:
            report = json.loads((tmp_path / run_hash / "report.json").read_text())
            h1.append(report["test"]["directions"]["left_to_right"]["hits_at"]["1"])
        mean, std = cell.aggregates["left_to_right"]["h1"]
        assert mean == pytest.approx(float(np.mean(h1)))
        assert std == pytest.approx(float(np.std(h1, ddof=1)))


def test_ablation_single_seed_omits_std(tmp_path):
    base = toy_config(**{"training.n_epochs": 30})
    desc = DatasetDescriptor("toy", "cycle-6-3")
    cells = run_ablation(base, [desc], tmp_path, n_seeds=1, cells=((False, "unit"),))
    (cell,) = cells
    mean, std = cell.aggregates["left_to_right"]["h1"]
    assert std is None
    table = ablation_table(cells)
    assert "+-" not in table
    assert "no-weights/unit" in table


def test_ablation_table_contains_all_cells(tmp_path):
    base = toy_config(**{"training.n_epochs": 30})
    desc = DatasetDescriptor("toy", "cycle-6-3")
    cells = run_ablation(base, [desc], tmp_path, n_seeds=2)
    table = ablation_table(cells)
    for header in ("no-weights/unit", "no-weights/scaled", "weights/unit", "weights/scaled"):
        assert header in table
    for metric in ("[H@1]", "[H@10]", "[MR]", "[MRR]"):
        assert metric in table


def test_tuned_hyperparameters_resolution():
    base = tuned_hyperparameters("dbp15k-jape", "zh-en", False, "unit")
    assert base == {
        "optimizer": "adam",
        "n_negatives": 50,
        "n_epochs": 2000,
        "n_layers": 2,
        "learning_rate": 1.0,
    }
    scaled = tuned_hyperparameters("dbp15k-jape", "zh-en", False, "scaled")
    assert scaled["optimizer"] == "sgd"
    assert scaled["n_negatives"] == 100
    assert scaled["n_epochs"] == 3000
    finetuned = tuned_hyperparameters("wk3l-15k", "en-fr", False, "unit")
    assert finetuned["learning_rate"] == 10.0


def test_apply_overrides_creates_new_config():
    cfg = toy_config()
    out = apply_overrides(cfg, {"training.n_epochs": 7})
    assert out.training.n_epochs == 7
    assert cfg.training.n_epochs == 120

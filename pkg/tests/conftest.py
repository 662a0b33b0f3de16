import os
from pathlib import Path

import numpy as np
import pytest

from kgalign.graphs import AlignmentSet, GraphPair, KnowledgeGraph, Role

# One (criterion number, status, detail) entry per acceptance criterion,
# echoed at the end of the run so every criterion gets a visible line.
ACCEPTANCE_LOG: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {detail}")


@pytest.fixture
def tiny_pair():
    """Two 3-node graphs, one triple each, fully aligned."""
    left = KnowledgeGraph(3, 1, [(0, 0, 1)])
    right = KnowledgeGraph(3, 1, [(2, 0, 0)])
    align = AlignmentSet.from_records(
        [(0, 2, Role.TRAIN), (1, 0, Role.TRAIN), (2, 1, Role.TEST)]
    )
    return GraphPair(left=left, right=right, alignment=align)


def random_graph(rng, n_entities, n_relations, n_triples):
    triples = np.stack(
        [
            rng.integers(0, n_entities, n_triples),
            rng.integers(0, n_relations, n_triples),
            rng.integers(0, n_entities, n_triples),
        ],
        axis=1,
    )
    # make sure every relation occurs at least once
    triples[:n_relations, 1] = np.arange(n_relations)
    return KnowledgeGraph(n_entities, n_relations, triples)


def random_pair(rng, n=8, n_train=4, n_test=0, n_triples=12):
    left = random_graph(rng, n, 1, n_triples)
    right = random_graph(rng, n, 1, n_triples)
    perm = rng.permutation(n)
    records = [
        (i, int(perm[i]), Role.TRAIN if i < n_train else Role.TEST)
        for i in range(n_train + n_test)
    ]
    return GraphPair(left=left, right=right, alignment=AlignmentSet.from_records(records))


def write_dataset(root: Path, *, triples_1, triples_2, ents_1, ents_2,
                  rels_1, rels_2, files):
    """Materialize a dataset directory from in-memory rows.

    ents/rels are lists of (raw_id, label); files maps extra file names
    to row lists (each row a tuple of columns).
    """
    root.mkdir(parents=True, exist_ok=True)

    def dump(name, rows):
        text = "\n".join("\t".join(str(c) for c in row) for row in rows)
        (root / name).write_text(text + "\n", encoding="utf-8")

    dump("triples_1", triples_1)
    dump("triples_2", triples_2)
    dump("ent_ids_1", ents_1)
    dump("ent_ids_2", ents_2)
    dump("rel_ids_1", rels_1)
    dump("rel_ids_2", rels_2)
    for name, rows in files.items():
        dump(name, rows)
    return root


@pytest.fixture
def jape_style_dir(tmp_path):
    """Minimal dbp15k-jape layout: 4 entities per side, official split."""
    return write_dataset(
        tmp_path / "zh_en",
        triples_1=[(10, 100, 11), (11, 100, 12), (12, 101, 13)],
        triples_2=[(20, 200, 21), (21, 200, 22), (23, 201, 20)],
        ents_1=[(10, "e:a"), (11, "e:b"), (12, "e:c"), (13, "e:d")],
        ents_2=[(20, "f:a"), (21, "f:b"), (22, "f:c"), (23, "f:d")],
        rels_1=[(100, "r:p"), (101, "r:q")],
        rels_2=[(200, "s:p"), (201, "s:q")],
        files={
            "sup_ent_ids": [(10, 20), (11, 21)],
            "ref_ent_ids": [(12, 22), (13, 23)],
        },
    )


def golden_data_root():
    """Directory with real benchmark downloads, or None.

    Layout: $KGALIGN_DATA/<family>/<subset>/ with the canonical files.
    """
    root = os.environ.get("KGALIGN_DATA")
    if root and Path(root).is_dir():
        return Path(root)
    return None


def require_golden(family, subset):
    root = golden_data_root()
    if root is None:
        pytest.skip("set KGALIGN_DATA to a directory with downloaded benchmarks")
    path = root / family / subset
    if not path.is_dir():
        pytest.skip(f"dataset {family}/{subset} not present under KGALIGN_DATA")
    return path

"""Benchmark dataset loading, validation, splitting and statistics.

All on-disk files are UTF-8 text with tab-separated columns:

  triples:    head_id <TAB> relation_id <TAB> tail_id
  id maps:    integer_id <TAB> label
  alignments: left_id <TAB> right_id
  aligned triples (wk3l): h1 <TAB> r1 <TAB> t1 <TAB> h2 <TAB> r2 <TAB> t2
  attributes (optional):  entity_id <TAB> attribute_predicate_label

Trailing whitespace is tolerated; blank lines and wrong column counts are
rejected with the file and line number. Each dataset family carries a
manifest of expected file names so that a directory with a drifted
layout fails loudly instead of loading the wrong thing.

Entities and relations are re-indexed densely per graph side in id-map
file order; raw ids survive only inside the label maps.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .graphs import AlignmentSet, AttributeTable, GraphPair, KnowledgeGraph, Role

FAMILIES = {
    "dbp15k-full": ("fr-en", "ja-en", "zh-en"),
    "dbp15k-jape": ("fr-en", "ja-en", "zh-en"),
    "wk3l-15k": ("en-de", "en-fr"),
    "wk3l-120k": ("en-de", "en-fr"),
    "dwy100k": ("dbp-wd", "dbp-yg"),
}

# Table-style shorthand for the dwy100k subsets.
SUBSET_ALIASES = {"wd": "dbp-wd", "yg": "dbp-yg"}

_TOY_SUBSET = re.compile(r"^cycle-(\d+)-(\d+)$")

# Expected file names per family. 'optional' files may be absent; any
# other layout is rejected. Checksums, when pinned in a local
# manifest.json next to the data, are verified as well.
MANIFEST = {
    "dbp15k-jape": {
        "required": [
            "triples_1", "triples_2", "ent_ids_1", "ent_ids_2",
            "rel_ids_1", "rel_ids_2", "sup_ent_ids", "ref_ent_ids",
        ],
        "optional": ["attrs_1", "attrs_2"],
    },
    "dbp15k-full": {
        "required": [
            "triples_1", "triples_2", "ent_ids_1", "ent_ids_2",
            "rel_ids_1", "rel_ids_2", "ill_ent_ids",
        ],
        "optional": ["attrs_1", "attrs_2"],
    },
    "dwy100k": {
        "required": [
            "triples_1", "triples_2", "ent_ids_1", "ent_ids_2",
            "rel_ids_1", "rel_ids_2", "sup_ent_ids", "ref_ent_ids",
        ],
        "optional": ["attrs_1", "attrs_2"],
    },
    "wk3l-15k": {
        "required": [
            "triples_1", "triples_2", "ent_ids_1", "ent_ids_2",
            "rel_ids_1", "rel_ids_2", "align_1to2", "align_2to1", "triple_align",
        ],
        "optional": [],
    },
    "wk3l-120k": {
        "required": [
            "triples_1", "triples_2", "ent_ids_1", "ent_ids_2",
            "rel_ids_1", "rel_ids_2", "align_1to2", "align_2to1", "triple_align",
        ],
        "optional": [],
    },
}

ATTRIBUTE_VOCABULARY_SIZE = 1000


@dataclass(frozen=True)
class DatasetDescriptor:
    family: str
    subset: str
    root_path: Path | None = None

    def __post_init__(self):
        subset = SUBSET_ALIASES.get(self.subset, self.subset)
        object.__setattr__(self, "subset", subset)
        if self.root_path is not None:
            object.__setattr__(self, "root_path", Path(self.root_path))
        if self.family == "toy":
            if not _TOY_SUBSET.match(subset):
                raise ConfigError(
                    f"toy subset must look like cycle-<nodes>-<seeds>, got {subset!r}"
                )
            return
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown dataset family {self.family!r}")
        if subset not in FAMILIES[self.family]:
            raise ConfigError(
                f"family {self.family!r} has subsets {FAMILIES[self.family]}, got {subset!r}"
            )

    @property
    def is_toy(self) -> bool:
        return self.family == "toy"

    def key(self) -> str:
        return f"{self.family}:{self.subset}"


@dataclass(frozen=True)
class DatasetStatistics:
    triples_left: int
    triples_right: int
    entities_left: int
    entities_right: int
    relations_left: int
    relations_right: int
    alignments: int
    symmetrized_alignments: int | None = None

    def to_dict(self) -> dict:
        return {
            "left": {
                "triples": self.triples_left,
                "entities": self.entities_left,
                "relations": self.relations_left,
            },
            "right": {
                "triples": self.triples_right,
                "entities": self.entities_right,
                "relations": self.relations_right,
            },
            "alignments": self.alignments,
            "symmetrized_alignments": self.symmetrized_alignments,
        }


def _read_rows(path: Path, n_cols: int) -> list[tuple]:
    """Tab-separated integer rows; last column may be text for id maps."""
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError("file not found", path=path)
    rows = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        if raw == "" and line_no == text.count("\n") + 1:
            break  # trailing newline at EOF
        line = raw.rstrip()
        if line == "":
            raise DataFormatError("blank line", path=path, line_no=line_no)
        parts = line.split("\t")
        if len(parts) != n_cols:
            raise DataFormatError(
                f"expected {n_cols} tab-separated columns, found {len(parts)}",
                path=path,
                line_no=line_no,
            )
        rows.append((line_no, parts))
    return rows


def _parse_int(token: str, path: Path, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise DataFormatError(f"non-integer id {token!r}", path=path, line_no=line_no)


def _load_id_map(path: Path) -> tuple[dict[int, int], dict[int, str]]:
    """Raw id -> dense index (file order) and dense index -> label."""
    raw_to_dense: dict[int, int] = {}
    labels: dict[int, str] = {}
    for line_no, parts in _read_rows(path, 2):
        raw = _parse_int(parts[0], path, line_no)
        if raw in raw_to_dense:
            raise DataFormatError(f"duplicate id {raw}", path=path, line_no=line_no)
        dense = len(raw_to_dense)
        raw_to_dense[raw] = dense
        labels[dense] = parts[1]
    if not raw_to_dense:
        raise DataFormatError("empty id map", path=path)
    return raw_to_dense, labels


def _load_triples(path: Path, ent_map: dict[int, int], rel_map: dict[int, int]) -> np.ndarray:
    rows = _read_rows(path, 3)
    if not rows:
        raise DataFormatError("empty triples file", path=path)
    out = np.empty((len(rows), 3), dtype=np.int64)
    for i, (line_no, parts) in enumerate(rows):
        h = _parse_int(parts[0], path, line_no)
        r = _parse_int(parts[1], path, line_no)
        t = _parse_int(parts[2], path, line_no)
        try:
            out[i, 0] = ent_map[h]
        except KeyError:
            raise DataFormatError(f"unknown entity id {h}", path=path, line_no=line_no)
        try:
            out[i, 1] = rel_map[r]
        except KeyError:
            raise DataFormatError(f"unknown relation id {r}", path=path, line_no=line_no)
        try:
            out[i, 2] = ent_map[t]
        except KeyError:
            raise DataFormatError(f"unknown entity id {t}", path=path, line_no=line_no)
    return out


def _load_alignment_file(
    path: Path, left_map: dict[int, int], right_map: dict[int, int]
) -> list[tuple[int, int]]:
    pairs = []
    for line_no, parts in _read_rows(path, 2):
        l = _parse_int(parts[0], path, line_no)
        r = _parse_int(parts[1], path, line_no)
        if l not in left_map:
            raise DataFormatError(f"dangling alignment id {l}", path=path, line_no=line_no)
        if r not in right_map:
            raise DataFormatError(f"dangling alignment id {r}", path=path, line_no=line_no)
        pairs.append((left_map[l], right_map[r]))
    return pairs


def _load_attributes(path: Path, ent_map: dict[int, int]) -> dict[int, list[str]]:
    by_entity: dict[int, list[str]] = {}
    for line_no, parts in _read_rows(path, 2):
        e = _parse_int(parts[0], path, line_no)
        if e not in ent_map:
            raise DataFormatError(f"unknown entity id {e}", path=path, line_no=line_no)
        by_entity.setdefault(ent_map[e], []).append(parts[1])
    return by_entity


def build_attribute_tables(
    attrs_left: dict[int, list[str]],
    attrs_right: dict[int, list[str]],
    n_left: int,
    n_right: int,
    vocabulary_size: int = ATTRIBUTE_VOCABULARY_SIZE,
) -> tuple[AttributeTable, AttributeTable]:
    """Multi-hot feature tables over a shared predicate vocabulary.

    Each side contributes its vocabulary_size most frequent predicates
    (frequency ties broken lexicographically); the union, left ranking
    first, forms the shared column space so both tables have equal width.
    """

    def top_predicates(attrs):
        counts: dict[str, int] = {}
        for preds in attrs.values():
            for p in preds:
                counts[p] = counts.get(p, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [p for p, _ in ranked[:vocabulary_size]]

    columns = top_predicates(attrs_left)
    seen = set(columns)
    for p in top_predicates(attrs_right):
        if p not in seen:
            seen.add(p)
            columns.append(p)
    col_index = {p: i for i, p in enumerate(columns)}

    def table(attrs, n):
        feats = np.zeros((n, max(len(columns), 1)))
        for e, preds in attrs.items():
            for p in preds:
                j = col_index.get(p)
                if j is not None:
                    feats[e, j] = 1.0
        return AttributeTable(features=feats, column_labels=tuple(columns))

    return table(attrs_left, n_left), table(attrs_right, n_right)


def _verify_manifest(desc: DatasetDescriptor, root: Path) -> None:
    expected = MANIFEST[desc.family]
    missing = [name for name in expected["required"] if not (root / name).is_file()]
    if missing:
        raise DataFormatError(
            f"dataset layout for family {desc.family!r} requires files "
            f"{expected['required']}; missing {missing}",
            path=root,
        )
    known = set(expected["required"]) | set(expected["optional"]) | {"manifest.json"}
    extras = sorted(
        p.name for p in root.iterdir() if p.is_file() and p.name not in known
    )
    if extras:
        raise DataFormatError(
            f"unexpected files {extras} in dataset directory; refusing to "
            "guess a drifted layout",
            path=root,
        )
    checksums = _local_checksums(root)
    for name, expected in checksums.items():
        actual = hashlib.sha256((root / name).read_bytes()).hexdigest()
        if actual != expected:
            raise DataFormatError(
                f"checksum mismatch for {name}: manifest pins {expected}, file has {actual}",
                path=root,
            )


def _local_checksums(root: Path) -> dict[str, str]:
    manifest = root / "manifest.json"
    if not manifest.is_file():
        return {}
    import json

    data = json.loads(manifest.read_text(encoding="utf-8"))
    return dict(data.get("sha256", {}))


def symmetrize_wk3l(
    lr_pairs: list[tuple[int, int]],
    rl_pairs: list[tuple[int, int]],
    aligned_triples: list[tuple[tuple[int, int, int], tuple[int, int, int]]],
    left_labels: dict[int, str] | None = None,
    right_labels: dict[int, str] | None = None,
) -> AlignmentSet:
    """Merge directed alignment files and triple alignments into one
    symmetric, one-to-one alignment set.

    Candidate pairs come from four sources: the left-to-right file, the
    right-to-left file (flipped), and the head-head / tail-tail pairs of
    aligned triples. Conflicts (an entity claimed by several pairs) are
    resolved greedily: pairs backed by more sources win, ties go to the
    lexicographically smallest (left label, right label).
    """
    sources: dict[tuple[int, int], set[str]] = {}

    def add(pair, tag):
        sources.setdefault(pair, set()).add(tag)

    for p in lr_pairs:
        add(tuple(p), "lr")
    for r, l in rl_pairs:  # rl rows are (right, left); normalize orientation
        add((l, r), "rl")
    for (h1, _, t1), (h2, _, t2) in aligned_triples:
        add((h1, h2), "head")
        add((t1, t2), "tail")

    def label(labels, idx):
        if labels and idx in labels:
            return labels[idx]
        return str(idx)

    ordered = sorted(
        sources.items(),
        key=lambda kv: (
            -len(kv[1]),
            label(left_labels, kv[0][0]),
            label(right_labels, kv[0][1]),
        ),
    )
    used_left: set[int] = set()
    used_right: set[int] = set()
    kept: list[tuple[int, int]] = []
    for (l, r), _tags in ordered:
        if l in used_left or r in used_right:
            continue
        used_left.add(l)
        used_right.add(r)
        kept.append((l, r))
    kept.sort()
    return AlignmentSet.from_records((l, r, Role.TRAIN) for l, r in kept)


def _load_aligned_triples(path: Path, left_map, right_map):
    out = []
    for line_no, parts in _read_rows(path, 6):
        vals = [_parse_int(p, path, line_no) for p in parts]
        h1, r1, t1, h2, r2, t2 = vals
        for e in (h1, t1):
            if e not in left_map:
                raise DataFormatError(f"dangling entity id {e}", path=path, line_no=line_no)
        for e in (h2, t2):
            if e not in right_map:
                raise DataFormatError(f"dangling entity id {e}", path=path, line_no=line_no)
        out.append(
            (
                (left_map[h1], r1, left_map[t1]),
                (right_map[h2], r2, right_map[t2]),
            )
        )
    return out


def load(desc: DatasetDescriptor) -> GraphPair:
    """Load a dataset into a densely re-indexed GraphPair.

    When the distribution ships a train/test alignment split, the roles
    honor it; otherwise all alignment pairs start with the train role
    and split() assigns roles later.
    """
    if desc.is_toy:
        m = _TOY_SUBSET.match(desc.subset)
        return toy_cycle_pair(n_nodes=int(m.group(1)), n_seeds=int(m.group(2)))
    if desc.root_path is None:
        raise ConfigError(f"dataset {desc.key()} needs a root_path")
    root = desc.root_path
    if not root.is_dir():
        raise DataFormatError("dataset directory does not exist", path=root)
    _verify_manifest(desc, root)

    ent_map_1, ent_labels_1 = _load_id_map(root / "ent_ids_1")
    ent_map_2, ent_labels_2 = _load_id_map(root / "ent_ids_2")
    rel_map_1, rel_labels_1 = _load_id_map(root / "rel_ids_1")
    rel_map_2, rel_labels_2 = _load_id_map(root / "rel_ids_2")
    left = KnowledgeGraph(
        entity_count=len(ent_map_1),
        relation_count=len(rel_map_1),
        triples=_load_triples(root / "triples_1", ent_map_1, rel_map_1),
        entity_labels=ent_labels_1,
        relation_labels=rel_labels_1,
    )
    right = KnowledgeGraph(
        entity_count=len(ent_map_2),
        relation_count=len(rel_map_2),
        triples=_load_triples(root / "triples_2", ent_map_2, rel_map_2),
        entity_labels=ent_labels_2,
        relation_labels=rel_labels_2,
    )

    if desc.family in ("dbp15k-jape", "dwy100k"):
        train = _load_alignment_file(root / "sup_ent_ids", ent_map_1, ent_map_2)
        test = _load_alignment_file(root / "ref_ent_ids", ent_map_1, ent_map_2)
        records = [(l, r, Role.TRAIN) for l, r in train]
        records += [(l, r, Role.TEST) for l, r in test]
        alignment = AlignmentSet.from_records(records)
    elif desc.family == "dbp15k-full":
        pairs = _load_alignment_file(root / "ill_ent_ids", ent_map_1, ent_map_2)
        alignment = AlignmentSet.from_records((l, r, Role.TRAIN) for l, r in pairs)
    else:  # wk3l families
        lr = _load_alignment_file(root / "align_1to2", ent_map_1, ent_map_2)
        rl = _load_alignment_file(root / "align_2to1", ent_map_2, ent_map_1)
        triples = _load_aligned_triples(root / "triple_align", ent_map_1, ent_map_2)
        alignment = symmetrize_wk3l(lr, rl, triples, ent_labels_1, ent_labels_2)

    attrs_left = attrs_right = None
    if (root / "attrs_1").is_file() and (root / "attrs_2").is_file():
        attrs_left, attrs_right = build_attribute_tables(
            _load_attributes(root / "attrs_1", ent_map_1),
            _load_attributes(root / "attrs_2", ent_map_2),
            left.entity_count,
            right.entity_count,
        )
    return GraphPair(
        left=left,
        right=right,
        alignment=alignment,
        attributes_left=attrs_left,
        attributes_right=attrs_right,
    )


def split(
    alignment: AlignmentSet,
    train_fraction: float = 0.3,
    val_fraction_of_train: float = 0.2,
    seed: int = 0,
) -> AlignmentSet:
    """Assign train/validation/test roles with a seeded shuffle.

    Alignments that already carry test-role pairs are treated as having
    an official split: only the non-test pairs are re-partitioned, with
    val_fraction_of_train of them becoming validation. Otherwise
    train_fraction of all pairs becomes the train pool (the rest is
    test) and the same 80/20-style re-partition applies to the pool.
    """
    if len(alignment) == 0:
        raise ConfigError("cannot split an empty alignment")
    for name, f in (("train_fraction", train_fraction), ("val_fraction_of_train", val_fraction_of_train)):
        if not 0.0 < f < 1.0:
            raise ConfigError(f"{name} must lie strictly between 0 and 1, got {f}")
    rng = np.random.default_rng(seed)
    pairs = alignment.pairs
    roles = alignment.roles

    test_mask = roles == Role.TEST.value
    if test_mask.any():
        pool_idx = np.flatnonzero(~test_mask)
        test_idx = np.flatnonzero(test_mask)
    else:
        perm = rng.permutation(len(alignment))
        n_pool = int(round(train_fraction * len(alignment)))
        if n_pool == 0:
            raise ConfigError("train_fraction leaves no training pairs")
        pool_idx = perm[:n_pool]
        test_idx = perm[n_pool:]

    pool_perm = pool_idx[rng.permutation(len(pool_idx))]
    n_val = int(round(val_fraction_of_train * len(pool_perm)))
    val_idx = pool_perm[:n_val]
    train_idx = pool_perm[n_val:]
    if len(train_idx) == 0:
        raise ConfigError("split leaves no training pairs")

    new_roles = np.empty(len(alignment), dtype="U10")
    new_roles[train_idx] = Role.TRAIN.value
    new_roles[val_idx] = Role.VALIDATION.value
    new_roles[test_idx] = Role.TEST.value
    return AlignmentSet(pairs=pairs.copy(), roles=new_roles)


def statistics(pair: GraphPair, symmetrized: bool = False) -> DatasetStatistics:
    """Exact counts of triples/entities/relations per side and alignments."""
    return DatasetStatistics(
        triples_left=pair.left.triple_count,
        triples_right=pair.right.triple_count,
        entities_left=pair.left.entity_count,
        entities_right=pair.right.entity_count,
        relations_left=pair.left.relation_count,
        relations_right=pair.right.relation_count,
        alignments=len(pair.alignment),
        symmetrized_alignments=len(pair.alignment) if symmetrized else None,
    )


def statistics_for(desc: DatasetDescriptor) -> DatasetStatistics:
    """Load a dataset and summarize it; wk3l counts are post-symmetrization."""
    pair = load(desc)
    return statistics(pair, symmetrized=desc.family.startswith("wk3l"))


def toy_cycle_pair(n_nodes: int = 8, n_seeds: int = 4, seed: int = 0) -> GraphPair:
    """Two isomorphic directed cycles with a partially revealed alignment.

    The right graph is the left cycle relabeled by a seeded random
    permutation. Evenly spaced nodes are revealed as train pairs; the
    remaining pairs carry the test role.
    """
    if n_nodes < 3:
        raise ConfigError("cycle needs at least 3 nodes")
    if not 0 < n_seeds < n_nodes:
        raise ConfigError("n_seeds must be in 1..n_nodes-1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_nodes)

    left_triples = [(i, 0, (i + 1) % n_nodes) for i in range(n_nodes)]
    right_triples = [(perm[i], 0, perm[(i + 1) % n_nodes]) for i in range(n_nodes)]
    left = KnowledgeGraph(entity_count=n_nodes, relation_count=1, triples=left_triples)
    right = KnowledgeGraph(entity_count=n_nodes, relation_count=1, triples=right_triples)

    # evenly spaced revealed nodes; spacing >= 1 keeps them distinct
    seed_nodes = set(np.linspace(0, n_nodes, n_seeds, endpoint=False).astype(int).tolist())
    records = [
        (i, int(perm[i]), Role.TRAIN if i in seed_nodes else Role.TEST)
        for i in range(n_nodes)
    ]
    return GraphPair(
        left=left, right=right, alignment=AlignmentSet.from_records(records)
    )

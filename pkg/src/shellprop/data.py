"""Dataset ingestion, split generation, and synthetic graph generation.

On-disk layout is plain UTF-8 TSV: ``edges.tsv`` (``u<TAB>v`` per line,
``#`` comments allowed), ``features.tsv`` (one row of tab-separated reals
per node), ``labels.tsv`` (one class id per node), and an optional
``split.json`` with train/val/test index lists.  Row i of every file refers
to node i.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .graph import SparseGraph, build_graph, component_count, read_edge_list


@dataclass(frozen=True, eq=False)
class Split:
    """Disjoint train/val/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    shrunk: bool = False


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Split | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n


def _parse_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            parts = line.split("\t")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise InputError(
                    f"{path}: line {lineno}: expected {width} values, got"
                    f" {len(parts)}"
                )
            try:
                row = [float(v) for v in parts]
            except ValueError:
                raise InputError(
                    f"{path}: line {lineno}: non-numeric feature value"
                ) from None
            if not all(np.isfinite(row)):
                raise InputError(f"{path}: line {lineno}: non-finite feature value")
            rows.append(row)
    if not rows:
        raise InputError(f"{path}: file is empty")
    return np.asarray(rows, dtype=np.float64)


def _parse_labels(path: Path, n: int) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            try:
                value = int(text)
            except ValueError:
                raise InputError(
                    f"{path}: line {lineno}: non-integer label {text!r}"
                ) from None
            if value < 0:
                raise InputError(f"{path}: line {lineno}: label out of range")
            labels.append(value)
    if len(labels) != n:
        raise InputError(
            f"{path}: has {len(labels)} labels but features.tsv defines {n} nodes"
        )
    return np.asarray(labels, dtype=np.int64)


def _parse_split(path: Path, n: int) -> Split:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise InputError(f"{path}: invalid JSON ({err})") from None
    parts = {}
    for key in ("train", "val", "test"):
        if key not in payload:
            raise InputError(f"{path}: missing key {key!r}")
        idx = np.asarray(payload[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InputError(f"{path}: {key} index out of range for n={n}")
        if len(np.unique(idx)) != len(idx):
            raise InputError(f"{path}: {key} contains duplicate indices")
        parts[key] = np.sort(idx)
    if parts["train"].size == 0:
        raise InputError(f"{path}: train set must be non-empty")
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        if np.intersect1d(parts[a], parts[b]).size:
            raise InputError(f"{path}: {a} and {b} sets overlap")
    return Split(parts["train"], parts["val"], parts["test"])


def load_dataset(directory) -> Dataset:
    """Load and validate a TSV dataset directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"dataset directory not found: {directory}")
    for name in ("edges.tsv", "features.tsv", "labels.tsv"):
        if not (directory / name).is_file():
            raise InputError(f"missing dataset file: {directory / name}")
    features = _parse_features(directory / "features.tsv")
    n = features.shape[0]
    labels = _parse_labels(directory / "labels.tsv", n)
    edges = read_edge_list(directory / "edges.tsv")
    if edges:
        top = max(max(u, v) for u, v in edges)
        if top >= n:
            raise InputError(
                f"{directory / 'edges.tsv'}: references node {top} but"
                f" features.tsv defines only {n} rows"
            )
    graph = build_graph(edges, n)
    split_path = directory / "split.json"
    split = _parse_split(split_path, n) if split_path.is_file() else None
    return Dataset(
        graph=graph,
        features=features,
        labels=labels,
        num_classes=int(labels.max()) + 1,
        split=split,
    )


def write_dataset(directory, dataset: Dataset) -> None:
    """Write a dataset in the TSV layout; round-trips exactly through load."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    g = dataset.graph
    with open(directory / "edges.tsv", "w", encoding="utf-8") as fh:
        for u in range(g.n):
            for v in g.neighbors(u):
                if v > u:
                    fh.write(f"{u}\t{v}\n")
    with open(directory / "features.tsv", "w", encoding="utf-8") as fh:
        for row in dataset.features:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")
    with open(directory / "labels.tsv", "w", encoding="utf-8") as fh:
        for label in dataset.labels:
            fh.write(f"{int(label)}\n")
    if dataset.split is not None:
        payload = {
            "train": [int(i) for i in dataset.split.train],
            "val": [int(i) for i in dataset.split.val],
            "test": [int(i) for i in dataset.split.test],
        }
        with open(directory / "split.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def make_split(
    labels,
    per_class: int = 20,
    val: int = 500,
    test: int = 1000,
    seed: int = 0,
) -> Split:
    """Sample the labeled-per-class protocol: per_class training nodes from
    each class, then val and test drawn uniformly from the remainder.

    When the requested sizes exceed the node count, val and test shrink
    proportionally to the leftover nodes and the result is flagged.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if per_class < 1:
        raise InputError(f"per_class must be >= 1, got {per_class}")
    if val < 0 or test < 0:
        raise InputError("val and test sizes must be non-negative")
    num_classes = int(labels.max()) + 1 if n else 0
    rng = np.random.default_rng(seed)
    train_parts = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if len(members) < per_class:
            raise InputError(
                f"class {c} has {len(members)} nodes, fewer than"
                f" per_class={per_class}"
            )
        train_parts.append(rng.choice(members, size=per_class, replace=False))
    train = np.sort(np.concatenate(train_parts))
    rest = np.setdiff1d(np.arange(n), train)
    shuffled = rng.permutation(rest)
    shrunk = len(train) + val + test > n
    if shrunk:
        avail = n - len(train)
        val_n = avail * val // (val + test) if val + test else 0
        test_n = avail - val_n
    else:
        val_n, test_n = val, test
    return Split(
        train=train,
        val=np.sort(shuffled[:val_n]),
        test=np.sort(shuffled[val_n : val_n + test_n]),
        shrunk=shrunk,
    )


def synth_planted_partition(
    n_per_block: int,
    blocks: int,
    p_in: float,
    p_out: float,
    seed: int = 0,
    noise: float = 0.1,
    labels_per_block: int = 4,
) -> Dataset:
    """Block-structured random graph with block ids as labels.

    Features are one-hot block indicators plus Gaussian noise.  The split
    follows the labeled-per-class protocol (shrunk to the graph size), and
    ``meta`` records the connected-component check.
    """
    if not 0.0 <= p_out < p_in <= 1.0:
        raise ConfigError(
            f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )
    if n_per_block < 1 or blocks < 1:
        raise ConfigError("n_per_block and blocks must be positive")
    n = n_per_block * blocks
    labels = np.repeat(np.arange(blocks, dtype=np.int64), n_per_block)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    probs = np.where(labels[iu] == labels[ju], p_in, p_out)
    chosen = rng.random(len(iu)) < probs
    edges = np.column_stack([iu[chosen], ju[chosen]])
    graph = build_graph(edges, n)
    features = np.eye(blocks)[labels] + rng.normal(0.0, noise, size=(n, blocks))
    split = make_split(labels, per_class=labels_per_block, seed=seed)
    components = component_count(graph)
    return Dataset(
        graph=graph,
        features=features,
        labels=labels,
        num_classes=blocks,
        split=split,
        meta={"n_components": components, "connected": components == 1},
    )

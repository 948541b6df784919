"""Dataset ingestion, split generation, and synthetic graph generation.

A dataset directory holds `edges.txt` (whitespace "u v" pairs, '#' comments),
`features.csv` (dense comma-separated rows), `labels.txt` (one integer per
line), and optionally `split.json` with train/val/test index lists.  The
stochastic block model generator provides desk-scale homophilous and
heterophilous graphs with controllable feature separability.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .graph_core import Graph, build_graph, degrees, node_homophily, read_edge_file

__all__ = [
    "Dataset",
    "load_dataset",
    "load_dataset_dir",
    "save_dataset_dir",
    "random_split",
    "planetoid_split",
    "sbm_generate",
    "expected_sbm_homophily",
]

SPLIT_NAMES = ("train", "val", "test")


@dataclass(eq=False)
class Dataset:
    graph: Graph
    X: np.ndarray
    y: np.ndarray
    splits: dict = field(default_factory=dict)
    name: str = ""

    @property
    def n(self) -> int:
        return self.graph.n


def _validate_splits(n: int, splits: dict) -> None:
    seen = np.zeros(n, dtype=np.int64)
    for key, idx in splits.items():
        arr = np.asarray(idx, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"split {key!r} has indices outside [0, {n})")
        seen[arr] += 1
    if np.any(seen > 1):
        raise ValueError("splits must be pairwise disjoint")


def _parse_labels(path) -> np.ndarray:
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                vals.append(int(text))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer label {text!r}") from exc
    return np.asarray(vals, dtype=np.int64)


def _parse_features(path) -> np.ndarray:
    # fast path first; re-parse by hand only to locate the offending cell
    try:
        X = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        return X
    except ValueError:
        pass
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            for cell in line.strip().split(","):
                try:
                    float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric feature value {cell!r}"
                    ) from None
    raise ValueError(f"{path}: malformed feature matrix")


def load_dataset(edge_file, feature_file, label_file, name: str = "") -> Dataset:
    """Load the three text files into a dataset with empty splits.

    Edges are symmetrized and deduplicated; node count comes from the label
    file and must match the feature row count.
    """
    y = _parse_labels(label_file)
    X = _parse_features(feature_file)
    if X.shape[0] != y.size:
        raise ValueError(
            f"feature rows ({feature_file}: {X.shape[0]}) do not match "
            f"label count ({label_file}: {y.size})"
        )
    graph = build_graph(int(y.size), read_edge_file(edge_file))
    return Dataset(graph=graph, X=X, y=y, splits={}, name=name)


def load_dataset_dir(path) -> Dataset:
    """Load a dataset directory, including split.json when present."""
    ds = load_dataset(
        os.path.join(path, "edges.txt"),
        os.path.join(path, "features.csv"),
        os.path.join(path, "labels.txt"),
        name=os.path.basename(os.path.normpath(path)),
    )
    split_path = os.path.join(path, "split.json")
    if os.path.exists(split_path):
        with open(split_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        splits = {k: np.asarray(v, dtype=np.int64) for k, v in raw.items()}
        _validate_splits(ds.n, splits)
        ds.splits = splits
    return ds


def save_dataset_dir(ds: Dataset, path) -> None:
    """Write the directory layout; feature values round-trip exactly."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "edges.txt"), "w", encoding="utf-8") as fh:
        for u, v in ds.graph.edges:
            fh.write(f"{u} {v}\n")
    np.savetxt(os.path.join(path, "features.csv"), ds.X, delimiter=",", fmt="%.17g")
    with open(os.path.join(path, "labels.txt"), "w", encoding="utf-8") as fh:
        for label in ds.y:
            fh.write(f"{label}\n")
    if ds.splits:
        doc = {k: np.asarray(v).tolist() for k, v in ds.splits.items()}
        with open(os.path.join(path, "split.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh)


def random_split(ds: Dataset, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> Dataset:
    """Per-class stratified split; rounding leftovers go to the test set.

    Every class must have at least 3 nodes, and every class lands in the
    training set.
    """
    f_train, f_val, f_test = fractions
    if min(f_train, f_val, f_test) <= 0:
        raise ValueError("split fractions must be positive")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    parts = {k: [] for k in SPLIT_NAMES}
    for c in np.unique(ds.y):
        idx = np.where(ds.y == c)[0]
        if idx.size < 3:
            raise ValueError(f"class {c} too small to stratify ({idx.size} nodes)")
        rng.shuffle(idx)
        n_train = max(1, int(np.floor(f_train * idx.size)))
        n_val = int(np.floor(f_val * idx.size))
        parts["train"].append(idx[:n_train])
        parts["val"].append(idx[n_train:n_train + n_val])
        parts["test"].append(idx[n_train + n_val:])
    splits = {k: np.sort(np.concatenate(v)) for k, v in parts.items()}
    _validate_splits(ds.n, splits)
    return dataclasses.replace(ds, splits=splits)


def planetoid_split(ds: Dataset, per_class_train: int = 20, val_size: int = 500,
                    test_size: int = 1000, seed: int = 0) -> Dataset:
    """Fixed-size semi-supervised split in the citation-network convention.

    A seeded shuffle takes `per_class_train` nodes of each class for
    training, then fills validation and test from the remaining pool.
    """
    if per_class_train < 1:
        raise ValueError(f"per_class_train must be >= 1, got {per_class_train}")
    rng = np.random.default_rng(seed)
    train = []
    for c in np.unique(ds.y):
        idx = np.where(ds.y == c)[0]
        if idx.size < per_class_train:
            raise ValueError(
                f"class {c} has only {idx.size} nodes, needs {per_class_train} for training"
            )
        rng.shuffle(idx)
        train.append(idx[:per_class_train])
    train = np.sort(np.concatenate(train))
    pool = np.setdiff1d(np.arange(ds.n), train)
    if pool.size < val_size + test_size:
        raise ValueError(
            f"cannot draw val ({val_size}) and test ({test_size}) from "
            f"{pool.size} remaining nodes"
        )
    rng.shuffle(pool)
    splits = {
        "train": train,
        "val": np.sort(pool[:val_size]),
        "test": np.sort(pool[val_size:val_size + test_size]),
    }
    _validate_splits(ds.n, splits)
    return dataclasses.replace(ds, splits=splits)


def sbm_generate(n: int, classes: int, p_in: float, p_out: float,
                 feature_dim: int | None = None, feature_noise: float = 1.0,
                 seed: int = 0) -> Dataset:
    """Stochastic block model with unit-norm one-hot class centroids.

    p_in > p_out gives homophilous graphs, p_in < p_out heterophilous.
    Features are the node's class centroid plus Gaussian noise of the given
    scale, so a single knob controls separability.
    """
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if n % classes != 0:
        raise ValueError(f"n={n} must be divisible by classes={classes}")
    if feature_dim is None:
        feature_dim = classes
    if feature_dim < classes:
        raise ValueError(f"feature_dim must be >= classes, got {feature_dim}")

    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(classes), n // classes)
    same = y[:, None] == y[None, :]
    prob = np.where(same, p_in, p_out)
    draws = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    keep = draws[iu, ju] < prob[iu, ju]
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    centroids = np.zeros((classes, feature_dim))
    centroids[np.arange(classes), np.arange(classes)] = 1.0
    X = centroids[y] + feature_noise * rng.standard_normal((n, feature_dim))

    graph = build_graph(n, edges)
    name = f"sbm_n{n}_c{classes}_pin{p_in:g}_pout{p_out:g}_seed{seed}"
    return Dataset(graph=graph, X=X, y=y, splits={}, name=name)


def expected_sbm_homophily(n: int, classes: int, p_in: float, p_out: float) -> float:
    """Expected same-class neighbor fraction of the block model."""
    within = p_in * (n / classes - 1)
    across = p_out * n * (classes - 1) / classes
    return within / (within + across)

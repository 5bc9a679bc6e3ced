"""From-scratch random forest with weighted-Gini trees.

Trees are grown greedily on bootstrap samples, evaluating a random feature
subset per node and splitting at midpoints between consecutive sorted
unique values. Class imbalance is handled by balanced class weights that
enter both the impurity counts and the leaf probability fractions.
Training is bit-reproducible: every tree draws from its own PCG64
substream seeded by (seed, tree_index), so results do not depend on
scheduling or row order (rows are canonicalized by sample id when ids are
present).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

MODEL_FORMAT = "snatchdet.forest"
MODEL_VERSION = 1


class MissingClass(ValueError):
    """Training data does not contain both classes."""


class EmptyNode(ValueError):
    """Impurity of a node with no weight is undefined."""


class SchemaMismatch(ValueError):
    """Input features do not match the model's schema."""


class VersionMismatch(ValueError):
    """Serialized model has an unsupported version."""


class CorruptModel(ValueError):
    """Serialized model cannot be parsed."""


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    seed: int = 42
    class_weight_mode: str = "balanced"  # "balanced" | "uniform"
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    features_per_split: Union[int, str] = "sqrt"
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.class_weight_mode not in ("balanced", "uniform"):
            raise ValueError(f"unknown class_weight_mode {self.class_weight_mode!r}")

    def resolve_features_per_split(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            m = int(np.ceil(np.sqrt(n_features)))
        elif self.features_per_split == "all":
            m = n_features
        else:
            m = int(self.features_per_split)
        return max(1, min(m, n_features))


@dataclass
class Dataset:
    """Feature matrix with binary labels (robbery = 1)."""

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    ids: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-d matrix")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("row count must equal label count")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("column count must match feature_names")
        if self.ids is not None and len(self.ids) != self.X.shape[0]:
            raise ValueError("ids must match row count")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("feature matrix contains non-finite cells")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def canonicalized(self) -> "Dataset":
        """Rows sorted by sample id; no-op when ids are absent."""
        if self.ids is None:
            return self
        order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
        return Dataset(
            feature_names=self.feature_names,
            X=self.X[order],
            y=self.y[order],
            ids=tuple(self.ids[i] for i in order),
        )

    def select_features(self, names: Sequence[str]) -> "Dataset":
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(
            feature_names=tuple(names),
            X=self.X[:, cols],
            y=self.y,
            ids=self.ids,
        )


@dataclass
class Tree:
    """Flat CART arrays: node i is internal iff feature[i] >= 0."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    leaf_weights: list[tuple[float, float]] = field(default_factory=list)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_weights.append((0.0, 0.0))
        return len(self.feature) - 1

    def leaf_probability(self, node: int) -> float:
        w0, w1 = self.leaf_weights[node]
        return w1 / (w0 + w1)

    def predict_probability(self, x: np.ndarray) -> float:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return self.leaf_probability(node)


@dataclass
class ForestModel:
    trees: list[Tree]
    feature_names: tuple[str, ...]
    config: ForestConfig
    class_weights: tuple[float, float]
    importances: np.ndarray

    def importance_by_name(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.feature_names, self.importances)}


def balanced_weights(labels: Sequence[int]) -> tuple[float, float]:
    """Per-class weight N / (K * N_c) for binary labels."""
    y = np.asarray(labels)
    n0 = int(np.sum(y == 0))
    n1 = int(np.sum(y == 1))
    if n0 == 0 or n1 == 0:
        raise MissingClass(f"need both classes, got counts (non-robbery={n0}, robbery={n1})")
    n = n0 + n1
    return (n / (2 * n0), n / (2 * n1))


def weighted_gini(weighted_counts: Sequence[float]) -> float:
    """Gini impurity 1 - sum(p_c^2) over weighted class fractions."""
    counts = [float(c) for c in weighted_counts]
    if any(c < 0 for c in counts):
        raise ValueError("weighted counts must be nonnegative")
    total = sum(counts)
    if total <= 0:
        raise EmptyNode("node with zero total weight")
    return 1.0 - sum((c / total) ** 2 for c in counts)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, tree_index)))


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    feats: np.ndarray,
    w0: float,
    w1: float,
    min_leaf: int,
) -> Optional[tuple[int, float, float, np.ndarray, np.ndarray]]:
    """Best (feature, threshold) by weighted-Gini decrease over ``feats``.

    Returns (feature, threshold, weighted impurity decrease, left indices,
    right indices) or None when no split improves impurity. Ties go to the
    lower feature index and then the lower threshold. Class counts are kept
    as exact integer cumulative sums so the criterion is bit-identical to a
    naive per-split recount.
    """
    n = idx.shape[0]
    if n < 2 * min_leaf:
        return None
    Xn = X[np.ix_(idx, feats)]
    yn = y[idx]

    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ones = (yn == 1).astype(np.float64)
    cnt1 = np.cumsum(ones[order], axis=0)
    pos = np.arange(1, n + 1, dtype=np.float64)[:, None]
    cnt0 = pos - cnt1

    tot1 = float(cnt1[-1, 0])
    tot0 = float(n) - tot1
    w_tot0 = tot0 * w0
    w_tot1 = tot1 * w1
    w_tot = w_tot0 + w_tot1
    parent = w_tot - (w_tot0 * w_tot0 + w_tot1 * w_tot1) / w_tot

    # candidate split after sorted position i (0 .. n-2)
    l0 = cnt0[:-1] * w0
    l1 = cnt1[:-1] * w1
    wl = l0 + l1
    r0 = w_tot0 - l0
    r1 = w_tot1 - l1
    wr = r0 + r1
    children = (wl - (l0 * l0 + l1 * l1) / wl) + (wr - (r0 * r0 + r1 * r1) / wr)
    gain = parent - children

    valid = xs[1:] > xs[:-1]
    counts_ok = (pos[:-1] >= min_leaf) & (pos[:-1] <= n - min_leaf)
    gain = np.where(valid & counts_ok, gain, -np.inf)

    flat = np.argmax(gain.T)  # feature-major: ties -> lower feature, lower threshold
    f_local, split_pos = divmod(int(flat), n - 1)
    best_gain = float(gain[split_pos, f_local])
    if not np.isfinite(best_gain) or best_gain <= 0.0:
        return None

    threshold = (float(xs[split_pos, f_local]) + float(xs[split_pos + 1, f_local])) / 2.0
    col_order = order[:, f_local]
    left_idx = idx[col_order[: split_pos + 1]]
    right_idx = idx[col_order[split_pos + 1 :]]
    return int(feats[f_local]), threshold, best_gain, left_idx, right_idx


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    cfg: ForestConfig,
    tree_index: int,
    weights: tuple[float, float],
) -> tuple[Tree, np.ndarray]:
    rng = _tree_rng(cfg.seed, tree_index)
    n, d = X.shape
    w0, w1 = weights
    m = cfg.resolve_features_per_split(d)

    bootstrap = rng.integers(0, n, size=n)
    tree = Tree()
    decreases = np.zeros(d, dtype=np.float64)

    # (node slot, sample indices, depth); preorder with the left child first
    # so the RNG consumption order is well defined.
    root = tree.add_node()
    stack: list[tuple[int, np.ndarray, int]] = [(root, bootstrap, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        n1 = int(np.sum(yn == 1))
        n0 = idx.shape[0] - n1
        pure = n0 == 0 or n1 == 0
        depth_stop = cfg.max_depth is not None and depth >= cfg.max_depth

        split = None
        if not pure and not depth_stop:
            feats = np.sort(rng.choice(d, size=m, replace=False))
            split = _best_split(X, y, idx, feats, w0, w1, cfg.min_samples_leaf)

        if split is None:
            tree.leaf_weights[node] = (n0 * w0, n1 * w1)
            continue

        feat, threshold, gain, left_idx, right_idx = split
        decreases[feat] += gain
        tree.feature[node] = feat
        tree.threshold[node] = threshold
        left = tree.add_node()
        right = tree.add_node()
        tree.left[node] = left
        tree.right[node] = right
        stack.append((right, right_idx, depth + 1))
        stack.append((left, left_idx, depth + 1))

    return tree, decreases


def train(dataset: Dataset, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """Train the ensemble; deterministic for a fixed (dataset, config)."""
    data = dataset.canonicalized()
    if len(data) == 0:
        raise MissingClass("empty dataset")
    if cfg.class_weight_mode == "balanced":
        weights = balanced_weights(data.y)
    else:
        if np.sum(data.y == 0) == 0 or np.sum(data.y == 1) == 0:
            raise MissingClass("need both classes to train")
        weights = (1.0, 1.0)

    def build(t: int) -> tuple[Tree, np.ndarray]:
        return _grow_tree(data.X, data.y, cfg, t, weights)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(build, range(cfg.n_trees)))
    else:
        results = [build(t) for t in range(cfg.n_trees)]

    trees = [tree for tree, _ in results]
    d = data.X.shape[1]
    summed = np.zeros(d, dtype=np.float64)
    for _, decreases in results:
        total = decreases.sum()
        if total > 0:
            summed += decreases / total
    importances = summed / summed.sum() if summed.sum() > 0 else summed

    return ForestModel(
        trees=trees,
        feature_names=data.feature_names,
        config=cfg,
        class_weights=weights,
        importances=importances,
    )


def _vectorize(model: ForestModel, x: Union[Mapping[str, float], Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(x, Mapping):
        try:
            return np.array([float(x[name]) for name in model.feature_names], dtype=np.float64)
        except KeyError as exc:
            raise SchemaMismatch(f"input is missing feature {exc.args[0]!r}") from exc
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (len(model.feature_names),):
        raise SchemaMismatch(
            f"expected {len(model.feature_names)} features, got shape {arr.shape}"
        )
    return arr


def predict_probability(model: ForestModel, x) -> float:
    """Mean over trees of the leaf's weighted robbery fraction."""
    vec = _vectorize(model, x)
    total = 0.0
    for tree in model.trees:
        total += tree.predict_probability(vec)
    return total / len(model.trees)


def predict(model: ForestModel, x) -> tuple[int, float]:
    """(label, probability); the 0.5 tie resolves to the positive class."""
    p = predict_probability(model, x)
    return (1 if p >= 0.5 else 0, p)


def training_accuracy(model: ForestModel, dataset: Dataset) -> float:
    hits = sum(
        1 for row, label in zip(dataset.X, dataset.y) if predict(model, row)[0] == int(label)
    )
    return hits / len(dataset)


# ---------------------------------------------------------------------------
# serialization


def serialize(model: ForestModel) -> str:
    """Stable JSON document; identical models produce identical bytes."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "schema": list(model.feature_names),
        "config": {
            "n_trees": model.config.n_trees,
            "seed": model.config.seed,
            "class_weight_mode": model.config.class_weight_mode,
            "max_depth": model.config.max_depth,
            "min_samples_leaf": model.config.min_samples_leaf,
            "features_per_split": model.config.features_per_split,
        },
        "class_weights": list(model.class_weights),
        "importances": [repr(float(v)) for v in model.importances],
        "trees": [
            {
                "feature": tree.feature,
                "threshold": [repr(t) for t in tree.threshold],
                "left": tree.left,
                "right": tree.right,
                "leaf": [[repr(w0), repr(w1)] for w0, w1 in tree.leaf_weights],
            }
            for tree in model.trees
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def deserialize(document: str) -> ForestModel:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise CorruptModel("not a forest model document")
    if doc.get("version") != MODEL_VERSION:
        raise VersionMismatch(f"unsupported model version {doc.get('version')!r}")
    try:
        cfg_doc = doc["config"]
        cfg = ForestConfig(
            n_trees=cfg_doc["n_trees"],
            seed=cfg_doc["seed"],
            class_weight_mode=cfg_doc["class_weight_mode"],
            max_depth=cfg_doc["max_depth"],
            min_samples_leaf=cfg_doc["min_samples_leaf"],
            features_per_split=cfg_doc["features_per_split"],
        )
        trees = []
        for tdoc in doc["trees"]:
            tree = Tree(
                feature=[int(f) for f in tdoc["feature"]],
                threshold=[float(t) for t in tdoc["threshold"]],
                left=[int(v) for v in tdoc["left"]],
                right=[int(v) for v in tdoc["right"]],
                leaf_weights=[(float(w0), float(w1)) for w0, w1 in tdoc["leaf"]],
            )
            if not tree.feature:
                raise CorruptModel("tree with no nodes")
            trees.append(tree)
        if not trees:
            raise CorruptModel("model has no trees")
        model = ForestModel(
            trees=trees,
            feature_names=tuple(doc["schema"]),
            config=cfg,
            class_weights=(float(doc["class_weights"][0]), float(doc["class_weights"][1])),
            importances=np.array([float(v) for v in doc["importances"]], dtype=np.float64),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        if isinstance(exc, (CorruptModel, VersionMismatch)):
            raise
        raise CorruptModel(f"malformed model document: {exc}") from exc
    if model.importances.shape[0] != len(model.feature_names):
        raise CorruptModel("importances length does not match schema")
    return model


def save_model(model: ForestModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(model))


def load_model(path: str) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize(fh.read())

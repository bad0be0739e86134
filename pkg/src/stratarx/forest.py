"""From-scratch weighted random forest for binary outcomes.

One implementation serves three roles: the baseline risk model trained on
untreated patients, and the two arm-specific outcome models (the treated
one trained with a cost-sensitive weight on no-event records). Trees are
CART stumps grown on weighted bootstrap resamples; splits minimize weighted
Gini impurity over a random feature subset; leaf probabilities are
Laplace-smoothed weighted event rates, which keeps every leaf strictly
inside (0, 1) so weight escalation never freezes.

Everything is deterministic given the config seed: tree t uses seed + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, SingleClass, TooSmall


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters; defaults are desk-scale choices."""

    n_trees: int = 200
    max_depth: int = 8
    min_leaf: int = 5
    features_per_split: int | str = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ValueError("features_per_split must be an integer or 'sqrt'")
        elif self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolved_features_per_split(self, d: int) -> int:
        if self.features_per_split == "sqrt":
            return min(d, int(math.ceil(math.sqrt(d))))
        if self.features_per_split > d:
            raise ValueError(f"features_per_split {self.features_per_split} exceeds d={d}")
        return int(self.features_per_split)


@dataclass(frozen=True, eq=False)
class Leaf:
    probability: float


@dataclass(frozen=True, eq=False)
class SplitNode:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, SplitNode]


@dataclass(frozen=True, eq=False)
class Tree:
    root: Node
    n_train: int


@dataclass(frozen=True, eq=False)
class Forest:
    """Bagged trees plus the config that grew them; immutable and shareable."""

    trees: tuple[Tree, ...]
    config: ForestConfig
    n_features: int
    training_arm: str = "baseline"


def _leaf(labels: np.ndarray, weights: np.ndarray) -> Leaf:
    # Laplace (k+1)/(m+2) on weighted counts.
    w_total = float(weights.sum())
    w_events = float(weights[labels == 1].sum())
    return Leaf((w_events + 1.0) / (w_total + 2.0))


def _best_split(X, y, w, idx, feats, min_leaf):
    """Weighted-Gini scan over all candidate thresholds of the given features.

    Ties broken toward the lowest feature index, then the lowest threshold,
    via first-minimum argmin over feature-sorted columns.
    """
    m = idx.size
    xs = X[np.ix_(idx, feats)]
    order = np.argsort(xs, axis=0, kind="stable")
    xs_sorted = np.take_along_axis(xs, order, axis=0)
    wv = w[idx][order]
    w1 = (w[idx] * y[idx])[order]

    cw = np.cumsum(wv, axis=0)
    cw1 = np.cumsum(w1, axis=0)
    left_w = cw[:-1]
    left_w1 = cw1[:-1]
    right_w = cw[-1] - left_w
    right_w1 = cw1[-1] - left_w1

    pos = np.arange(1, m)
    valid = (
        ((pos >= min_leaf) & (pos <= m - min_leaf))[:, None]
        & (xs_sorted[1:] > xs_sorted[:-1])
    )
    if not valid.any():
        return None

    left_w0 = left_w - left_w1
    right_w0 = right_w - right_w1
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (left_w - (left_w1**2 + left_w0**2) / left_w) + (
            right_w - (right_w1**2 + right_w0**2) / right_w
        )
    score = np.where(valid, score, np.inf)

    per_feature_best = np.argmin(score, axis=0)
    per_feature_score = score[per_feature_best, np.arange(feats.size)]
    j = int(np.argmin(per_feature_score))
    if not np.isfinite(per_feature_score[j]):
        return None
    i = int(per_feature_best[j])
    threshold = 0.5 * (xs_sorted[i, j] + xs_sorted[i + 1, j])
    return int(feats[j]), float(threshold)


def _grow(X, y, w, idx, depth, config, k, rng):
    labels = y[idx]
    if (
        depth >= config.max_depth
        or idx.size < 2 * config.min_leaf
        or labels.min() == labels.max()
    ):
        return _leaf(labels, w[idx])
    feats = np.sort(rng.choice(X.shape[1], size=k, replace=False))
    found = _best_split(X, y, w, idx, feats, config.min_leaf)
    if found is None:
        return _leaf(labels, w[idx])
    feature, threshold = found
    mask = X[idx, feature] < threshold
    left = _grow(X, y, w, idx[mask], depth + 1, config, k, rng)
    right = _grow(X, y, w, idx[~mask], depth + 1, config, k, rng)
    return SplitNode(feature, threshold, left, right)


def train(
    features: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
    config: ForestConfig = ForestConfig(),
    training_arm: str = "baseline",
) -> Forest:
    """Grow a bagged forest on a weighted bootstrap of (features, labels).

    Each tree resamples n records with probability proportional to weight,
    then also carries the weights into the Gini scan and leaf estimates, so
    reweighting acts on both the sample and the split geometry.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2:
        raise ValueError("features must be an n x d matrix")
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("labels must align with features")
    if n < 2 * config.min_leaf:
        raise TooSmall(f"need at least {2 * config.min_leaf} records, got {n}")
    if y.min() == y.max():
        raise SingleClass("labels contain a single class")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("weights must align with features")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")

    k = config.resolved_features_per_split(d)
    p = w / w.sum()
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(config.seed + t)
        idx = rng.choice(n, size=n, replace=True, p=p)
        root = _grow(X, y, w, idx, 0, config, k, rng)
        trees.append(Tree(root, n))
    return Forest(tuple(trees), config, d, training_arm)


def _route_batch(root: Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = node.probability
            continue
        mask = X[idx, node.feature] < node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def predict_matrix(forest: Forest, features: np.ndarray) -> np.ndarray:
    """Mean per-tree leaf probability for every row of an n x d matrix."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatch(
            f"expected n x {forest.n_features} features, got shape {X.shape}"
        )
    acc = np.zeros(X.shape[0])
    for tree in forest.trees:
        acc += _route_batch(tree.root, X)
    return acc / len(forest.trees)


def predict_proba(forest: Forest, x: np.ndarray) -> float:
    """Mean per-tree leaf probability for a single covariate vector."""
    vec = np.asarray(x, dtype=float)
    if vec.shape != (forest.n_features,):
        raise DimensionMismatch(
            f"expected a vector of length {forest.n_features}, got shape {vec.shape}"
        )
    return float(predict_matrix(forest, vec[None, :])[0])


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with ties counted as 0.5."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc(forest: Forest, features: np.ndarray, labels: np.ndarray) -> float:
    """Forest AUC on the given data (rank formulation, ties at 0.5)."""
    return rank_auc(predict_matrix(forest, features), labels)


def _node_to_obj(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.probability}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj: dict) -> Node:
    if "leaf" in obj:
        return Leaf(obj["leaf"])
    return SplitNode(
        obj["feature"],
        obj["threshold"],
        _node_from_obj(obj["left"]),
        _node_from_obj(obj["right"]),
    )


def forest_to_obj(forest: Forest) -> dict:
    """JSON document for reuse across CLI invocations."""
    cfg = forest.config
    return {
        "config": {
            "n_trees": cfg.n_trees,
            "max_depth": cfg.max_depth,
            "min_leaf": cfg.min_leaf,
            "features_per_split": cfg.features_per_split,
            "seed": cfg.seed,
        },
        "n_features": forest.n_features,
        "training_arm": forest.training_arm,
        "trees": [
            {"n_train": tree.n_train, "root": _node_to_obj(tree.root)}
            for tree in forest.trees
        ],
    }


def forest_from_obj(obj: dict) -> Forest:
    config = ForestConfig(**obj["config"])
    trees = tuple(
        Tree(_node_from_obj(t["root"]), t["n_train"]) for t in obj["trees"]
    )
    return Forest(trees, config, obj["n_features"], obj["training_arm"])

"""Bagged decision-tree classifier over field feature vectors.

Gini-impurity splits with midpoint thresholds, a random feature subset per
split, and bootstrap sampling per tree. Deterministic for a fixed seed,
including the serialized model bytes. The canonical 41-slot feature layout is
the 31 statistics followed by a one-hot field type (5) and 5 boolean
category flags.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from fieldmeta.errors import LayoutMismatch, MalformedInput
from fieldmeta.stats import FEATURE_NAMES, FeatureVector, FieldCategories
from fieldmeta.table import FieldType

logger = logging.getLogger(__name__)

MODEL_VERSION = "forest.v1"

_FIELD_TYPE_ORDER = (
    FieldType.UNKNOWN,
    FieldType.STRING,
    FieldType.YEAR,
    FieldType.DATETIME,
    FieldType.DECIMAL,
)
_FLAG_NAMES = ("is_percent", "is_currency", "has_year", "has_month", "has_day")

FEATURE_ORDER: tuple[str, ...] = (
    FEATURE_NAMES
    + tuple(f"field_type={ft.value}" for ft in _FIELD_TYPE_ORDER)
    + tuple(_FLAG_NAMES)
)

N_FEATURES = len(FEATURE_ORDER)  # 41

DEFAULT_FEATURES_PER_SPLIT = math.ceil(math.sqrt(37))


def encode_features(fv: FeatureVector, cats: FieldCategories) -> np.ndarray:
    """Flatten statistics + one-hot categories into the canonical 41-slot layout."""
    out = np.zeros(N_FEATURES, dtype=np.float64)
    out[: len(FEATURE_NAMES)] = fv.to_array()
    out[len(FEATURE_NAMES) + _FIELD_TYPE_ORDER.index(cats.field_type)] = 1.0
    base = len(FEATURE_NAMES) + len(_FIELD_TYPE_ORDER)
    for pos, name in enumerate(_FLAG_NAMES):
        out[base + pos] = 1.0 if getattr(cats, name) else 0.0
    return out


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int = DEFAULT_FEATURES_PER_SPLIT
    seed: int = 0
    bootstrap: bool = True

    def to_json_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
        }


@dataclass
class TreeNode:
    distribution: np.ndarray
    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None

    def to_json_dict(self) -> dict:
        doc: dict = {"dist": [float(p) for p in self.distribution]}
        if not self.is_leaf:
            doc["split"] = [self.feature_index, self.threshold]
            doc["left"] = self.left.to_json_dict()
            doc["right"] = self.right.to_json_dict()
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "TreeNode":
        node = TreeNode(distribution=np.asarray(doc["dist"], dtype=np.float64))
        if "split" in doc:
            node.feature_index = int(doc["split"][0])
            node.threshold = float(doc["split"][1])
            node.left = TreeNode.from_json_dict(doc["left"])
            node.right = TreeNode.from_json_dict(doc["right"])
        return node


@dataclass
class Forest:
    trees: list[TreeNode]
    classes: list[str]
    cfg: ForestConfig
    feature_order: tuple[str, ...] = FEATURE_ORDER
    degenerate: bool = False

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_json(self) -> str:
        doc = {
            "version": MODEL_VERSION,
            "cfg": self.cfg.to_json_dict(),
            "classes": self.classes,
            "feature_order": list(self.feature_order),
            "degenerate": self.degenerate,
            "trees": [t.to_json_dict() for t in self.trees],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "Forest":
        doc = json.loads(text)
        if doc.get("version") != MODEL_VERSION:
            raise MalformedInput(f"unsupported model version: {doc.get('version')!r}")
        return Forest(
            trees=[TreeNode.from_json_dict(t) for t in doc["trees"]],
            classes=list(doc["classes"]),
            cfg=ForestConfig(**doc["cfg"]),
            feature_order=tuple(doc["feature_order"]),
            degenerate=bool(doc.get("degenerate", False)),
        )


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _distribution(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    return counts / counts.sum()


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_subset: np.ndarray,
    n_classes: int,
    min_leaf: int,
) -> tuple[int, float, np.ndarray] | None:
    n = len(y)
    parent_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    best = None
    best_cost = _gini(parent_counts) - 1e-12  # split must strictly improve
    for feature in feature_subset:
        order = np.argsort(X[:, feature], kind="stable")
        values = X[order, feature]
        labels = y[order]
        left_counts = np.zeros(n_classes, dtype=np.float64)
        right_counts = parent_counts.copy()
        for pos in range(n - 1):
            cls = labels[pos]
            left_counts[cls] += 1.0
            right_counts[cls] -= 1.0
            if values[pos] == values[pos + 1]:
                continue
            n_left = pos + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            cost = (n_left * _gini(left_counts) + n_right * _gini(right_counts)) / n
            if cost < best_cost:
                best_cost = cost
                threshold = (values[pos] + values[pos + 1]) / 2.0
                best = (int(feature), float(threshold))
    if best is None:
        return None
    feature, threshold = best
    return feature, threshold, X[:, feature] <= threshold


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    cfg: ForestConfig,
    n_classes: int,
    rng: np.random.Generator,
) -> TreeNode:
    node = TreeNode(distribution=_distribution(y, n_classes))
    if (
        len(y) < 2 * cfg.min_leaf
        or len(np.unique(y)) == 1
        or (cfg.max_depth is not None and depth >= cfg.max_depth)
    ):
        return node
    k = min(cfg.features_per_split, X.shape[1])
    subset = np.sort(rng.choice(X.shape[1], size=k, replace=False))
    split = _best_split(X, y, subset, n_classes, cfg.min_leaf)
    if split is None:
        return node
    feature, threshold, mask = split
    node.feature_index = feature
    node.threshold = threshold
    node.left = _grow(X[mask], y[mask], depth + 1, cfg, n_classes, rng)
    node.right = _grow(X[~mask], y[~mask], depth + 1, cfg, n_classes, rng)
    return node


def train_forest(X: np.ndarray, y: list, cfg: ForestConfig | None = None) -> Forest:
    """Fit a bagged forest; a single-class y yields a constant predictor with a warning."""
    cfg = cfg or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise MalformedInput("need a 2-D feature matrix with >= 2 aligned labels")
    classes = sorted({str(label) for label in y})
    class_index = {label: i for i, label in enumerate(classes)}
    y_idx = np.asarray([class_index[str(label)] for label in y], dtype=np.int64)

    feature_order = FEATURE_ORDER if X.shape[1] == N_FEATURES else tuple(
        f"f{i}" for i in range(X.shape[1])
    )

    if len(classes) == 1:
        logger.warning("degenerate labels: single class %r; constant predictor", classes[0])
        leaf = TreeNode(distribution=np.ones(1, dtype=np.float64))
        return Forest(trees=[leaf], classes=classes, cfg=cfg,
                      feature_order=feature_order, degenerate=True)

    root_rng = np.random.default_rng(cfg.seed)
    tree_seeds = root_rng.integers(0, 2**63 - 1, size=cfg.n_trees)
    trees = []
    for seed in tree_seeds:
        rng = np.random.default_rng(int(seed))
        if cfg.bootstrap:
            sample = rng.integers(0, len(y_idx), size=len(y_idx))
            Xb, yb = X[sample], y_idx[sample]
        else:
            Xb, yb = X, y_idx
        trees.append(_grow(Xb, yb, 0, cfg, len(classes), rng))
    return Forest(trees=trees, classes=classes, cfg=cfg, feature_order=feature_order)


def _leaf_distribution(node: TreeNode, x: np.ndarray) -> np.ndarray:
    while not node.is_leaf:
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.distribution


def predict_proba(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Mean of leaf distributions across trees; sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(forest.feature_order),):
        raise LayoutMismatch(
            f"expected {len(forest.feature_order)} features, got {x.shape}"
        )
    acc = np.zeros(forest.n_classes, dtype=np.float64)
    for tree in forest.trees:
        acc += _leaf_distribution(tree, x)
    return acc / len(forest.trees)


def predict(forest: Forest, x: np.ndarray) -> str:
    return forest.classes[int(np.argmax(predict_proba(forest, x)))]


def positive_score(forest: Forest, x: np.ndarray) -> float:
    """Probability of class "1" in a binary forest (ranking score)."""
    proba = predict_proba(forest, x)
    if "1" in forest.classes:
        return float(proba[forest.classes.index("1")])
    return 0.0


def rank_fields(forest: Forest, rows: list[np.ndarray]) -> list[tuple[int, float]]:
    """Sort field indices by positive-class probability, ties to the lower index."""
    scored = [(i, positive_score(forest, x)) for i, x in enumerate(rows)]
    return sorted(scored, key=lambda item: (-item[1], item[0]))

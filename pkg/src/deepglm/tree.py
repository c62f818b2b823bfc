"""CART classification trees and the same-leaf tree kernel.

Splits are greedy on weighted Gini impurity over every (feature, midpoint)
candidate, with deterministic tie-breaking: lower feature index first, then
lower threshold.  Impure nodes keep splitting even at zero Gini gain (a
split never increases weighted impurity), which is what lets depth-2 trees
solve XOR.  The kernel between two points is the indicator that they fall
in the same leaf, whose support is always an axis-aligned box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import as_matrix


@dataclass
class TreeNode:
    feature: Optional[int] = None     # None marks a leaf
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    label: int = 0
    histogram: Optional[dict] = None
    leaf_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class CartTree:
    root: TreeNode
    max_depth: int
    min_leaf: int
    n_features: int
    n_leaves: int


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    frac = counts / n
    return 1.0 - float((frac ** 2).sum())


def _leaf(y: np.ndarray, classes: np.ndarray) -> TreeNode:
    counts = np.bincount(y, minlength=len(classes))
    label = int(np.argmax(counts))  # argmax takes the lowest index on ties
    return TreeNode(label=label,
                    histogram={int(c): int(counts[c]) for c in classes})


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int, n_classes: int):
    """(feature, threshold) minimizing weighted Gini, or None.

    Candidates are midpoints of consecutive distinct sorted values; both
    children must keep at least min_leaf rows.
    """
    n, d = X.shape
    best = None
    best_score = np.inf
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        left_counts = np.zeros(n_classes)
        right_counts = np.bincount(ys, minlength=n_classes).astype(np.float64)
        for i in range(n - 1):
            c = ys[i]
            left_counts[c] += 1
            right_counts[c] -= 1
            if xs[i + 1] <= xs[i]:
                continue  # not a boundary between distinct values
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            score = (n_left * _gini(left_counts)
                     + n_right * _gini(right_counts)) / n
            if score < best_score - 1e-15:
                best_score = score
                best = (f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow(X, y, depth, max_depth, min_leaf, classes):
    node = _leaf(y, classes)
    if depth >= max_depth or len(np.unique(y)) == 1 or len(y) < 2 * min_leaf:
        return node
    split = _best_split(X, y, min_leaf, len(classes))
    if split is None:
        return node
    f, thr = split
    mask = X[:, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow(X[mask], y[mask], depth + 1, max_depth, min_leaf, classes)
    node.right = _grow(X[~mask], y[~mask], depth + 1, max_depth, min_leaf, classes)
    return node


def cart_fit(X, y, max_depth: int, min_leaf: int = 1) -> CartTree:
    """Grow a CART classifier on rows of X (n x d) with integer labels y."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.shape[0] != len(y):
        raise ValueError("X and y must have the same number of rows")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if len(y) < 2 * min_leaf:
        raise ValueError("need at least 2 * min_leaf rows")
    classes = np.arange(y.max() + 1)
    root = _grow(X, y, 0, max_depth, min_leaf, classes)
    n_leaves = 0
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            node.leaf_id = n_leaves
            n_leaves += 1
        else:
            stack.extend([node.right, node.left])
    return CartTree(root, max_depth, min_leaf, X.shape[1], n_leaves)


def _descend(tree: CartTree, x) -> TreeNode:
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def cart_predict(tree: CartTree, x) -> int:
    """Predicted label for a single point."""
    return _descend(tree, np.asarray(x, dtype=np.float64)).label


def cart_predict_batch(tree: CartTree, X) -> np.ndarray:
    X = as_matrix(X)
    return np.array([cart_predict(tree, row) for row in X], dtype=np.int64)


def cart_accuracy(tree: CartTree, X, y) -> float:
    y = np.asarray(y).reshape(-1)
    return float((cart_predict_batch(tree, X) == y).mean())


def leaf_id(tree: CartTree, x) -> int:
    return _descend(tree, np.asarray(x, dtype=np.float64)).leaf_id


def tree_kernel(tree: CartTree, x, x_other) -> int:
    """1 iff both points land in the same leaf, else 0."""
    return int(leaf_id(tree, x) == leaf_id(tree, x_other))


def kernel_map(tree: CartTree, x, grid) -> np.ndarray:
    """Same-leaf indicator of x against every row of grid (n x d)."""
    grid = as_matrix(grid)
    anchor = leaf_id(tree, x)
    return np.array([1.0 if leaf_id(tree, row) == anchor else 0.0
                     for row in grid])


def leaf_box(tree: CartTree, x, lo: float = -np.inf, hi: float = np.inf):
    """Axis-aligned box of the leaf containing x: a list of (lo, hi) pairs."""
    x = np.asarray(x, dtype=np.float64)
    bounds = [[lo, hi] for _ in range(tree.n_features)]
    node = tree.root
    while not node.is_leaf:
        f, thr = node.feature, node.threshold
        if x[f] <= thr:
            bounds[f][1] = min(bounds[f][1], thr)
            node = node.left
        else:
            bounds[f][0] = max(bounds[f][0], thr)
            node = node.right
    return [tuple(b) for b in bounds]

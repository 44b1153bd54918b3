"""Array-backed binary decision trees.

One split search serves both tree families: maximizing
``S_L**2 / n_L + S_R**2 / n_R`` over a per-row value ``v`` is least squares
for a gradient target and Gini for a 0/1 target. Ties go to the lowest
feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row; ``x <= threshold`` goes left."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def best_split(X, v, rows, features, min_leaf):
    """Return (gain, feature, threshold) of the best split of ``rows``, or None."""
    n = len(rows)
    if n < 2 * min_leaf:
        return None
    Xs = X[np.ix_(rows, features)]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    vs = v[rows][order]
    csum = np.cumsum(vs, axis=0)
    total = csum[-1]
    n_left = np.arange(1, n)[:, None]
    s_left = csum[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        score = s_left**2 / n_left + (total - s_left) ** 2 / (n - n_left)
    score -= total**2 / n
    valid = xs[:-1] < xs[1:]
    valid[: min_leaf - 1] = False
    valid[n - min_leaf:] = False
    score = np.where(valid, score, -np.inf)
    best = None
    for j, f in enumerate(features):
        i = int(np.argmax(score[:, j]))
        g = score[i, j]
        if not np.isfinite(g) or g <= 1e-12 * max(1.0, abs(total[j]) ** 2 / n):
            continue
        if best is None or g > best[0]:
            lo, hi = xs[i, j], xs[i + 1, j]
            thr = lo + (hi - lo) / 2
            if not lo <= thr < hi:
                thr = lo
            best = (float(g), int(f), float(thr))
    return best


def grow_tree(X, v, leaf_value, *, max_depth=None, min_leaf=1, feature_sampler=None):
    """Grow depth-first from all rows of ``X``.

    ``leaf_value(rows)`` gives a leaf's output; ``feature_sampler()``, when
    given, returns the candidate features for each split.
    """
    n, p = X.shape
    feature, threshold, left, right, value = [], [], [], [], []
    all_features = np.arange(p)

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        split = None
        if (max_depth is None or depth < max_depth) and np.ptp(v[rows]) > 0:
            feats = all_features if feature_sampler is None else feature_sampler()
            split = best_split(X, v, rows, feats, min_leaf)
        if split is None:
            value[node] = leaf_value(rows)
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        value[node] = leaf_value(rows)
        # push right first so the left subtree is numbered first
        stack.append((ri, rows[~go_left], depth + 1))
        stack.append((li, rows[go_left], depth + 1))
    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
    )


def pack_trees(trees: list[Tree]) -> dict[str, np.ndarray]:
    """Concatenate trees into flat arrays plus per-tree node offsets."""
    sizes = np.array([t.n_nodes for t in trees], dtype=np.int64)
    out = {"tree_sizes": sizes}
    for name in ("feature", "threshold", "left", "right", "value"):
        parts = [getattr(t, name) for t in trees]
        out[f"tree_{name}"] = np.concatenate(parts) if parts else np.zeros(0)
    return out


def unpack_trees(st) -> list[Tree]:
    trees = []
    start = 0
    for size in np.asarray(st["tree_sizes"]).tolist():
        sl = slice(start, start + size)
        trees.append(Tree(
            np.asarray(st["tree_feature"][sl], dtype=np.int64),
            np.asarray(st["tree_threshold"][sl], dtype=float),
            np.asarray(st["tree_left"][sl], dtype=np.int64),
            np.asarray(st["tree_right"][sl], dtype=np.int64),
            np.asarray(st["tree_value"][sl], dtype=float),
        ))
        start += size
    return trees

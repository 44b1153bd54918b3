"""Random forest of Gini trees with out-of-bag permutation importance."""

from __future__ import annotations

import numpy as np

from fleetpdm.learners.tree import grow_tree, pack_trees, unpack_trees


class RandomForest:
    family = "rf"

    def __init__(self, n_trees: int = 200, mtry: int = 5, min_leaf: int = 5, seed: int = 0):
        if n_trees < 1 or mtry < 1 or min_leaf < 1:
            raise ValueError("rf needs n_trees, mtry, min_leaf >= 1")
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (0 < y.mean() < 1):
            raise ValueError("need both classes in training labels")
        n, p = X.shape
        mtry = min(self.mtry, p)
        self.trees_ = []
        oob = []
        for rng in _tree_rngs(self.seed, self.n_trees):
            boot = rng.integers(0, n, n)
            in_bag = np.zeros(n, dtype=bool)
            in_bag[boot] = True
            Xb, yb = X[boot], y[boot]

            def sampler(rng=rng):
                return np.sort(rng.choice(p, mtry, replace=False))

            def leaf(rows, yb=yb):
                return float(yb[rows].mean())

            self.trees_.append(grow_tree(Xb, yb, leaf, min_leaf=self.min_leaf, feature_sampler=sampler))
            oob.append(np.flatnonzero(~in_bag))
        self.oob_sizes_ = np.array([len(o) for o in oob], dtype=np.int64)
        self.oob_index_ = np.concatenate(oob) if oob else np.zeros(0, dtype=np.int64)
        return self

    def oob_indices(self) -> list[np.ndarray]:
        return np.split(self.oob_index_, np.cumsum(self.oob_sizes_)[:-1])

    def votes(self, X):
        X = np.asarray(X, dtype=float)
        return np.array([t.predict(X) > 0.5 for t in self.trees_], dtype=float)

    def predict_proba(self, X):
        """Fraction of trees voting for class 1."""
        return self.votes(X).mean(axis=0)

    def state(self):
        return {
            "n_trees": self.n_trees, "mtry": self.mtry, "min_leaf": self.min_leaf, "seed": self.seed,
            "oob_sizes": self.oob_sizes_, "oob_index": self.oob_index_, **pack_trees(self.trees_),
        }

    @classmethod
    def from_state(cls, st):
        m = cls(int(st["n_trees"]), int(st["mtry"]), int(st["min_leaf"]), int(st["seed"]))
        m.oob_sizes_ = np.asarray(st["oob_sizes"], dtype=np.int64)
        m.oob_index_ = np.asarray(st["oob_index"], dtype=np.int64)
        m.trees_ = unpack_trees(st)
        return m


def _tree_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def oob_permutation_importance(forest: RandomForest, X, y, seed: int = 0) -> np.ndarray:
    """Mean over trees of the drop in OOB accuracy after permuting each column.

    Every tree permutes its own OOB rows with its own seeded stream. A
    constant column scores exactly 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    p = X.shape[1]
    drops = np.zeros((len(forest.trees_), p))
    used = np.zeros(len(forest.trees_), dtype=bool)
    rngs = _tree_rngs(seed, len(forest.trees_))
    for t, (tree, rows, rng) in enumerate(zip(forest.trees_, forest.oob_indices(), rngs)):
        if len(rows) == 0:
            continue
        used[t] = True
        Xo = X[rows]
        base = np.mean((tree.predict(Xo) > 0.5) == y[rows])
        for j in range(p):
            perm = rng.permutation(len(rows))
            Xp = Xo.copy()
            Xp[:, j] = Xo[perm, j]
            drops[t, j] = base - np.mean((tree.predict(Xp) > 0.5) == y[rows])
    if not used.any():
        return np.zeros(p)
    return drops[used].mean(axis=0)

"""Gradient boosting on the binomial deviance with Newton-step leaves."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from fleetpdm.learners.tree import grow_tree, pack_trees, unpack_trees


def binomial_deviance(y, F) -> float:
    """``-2 * loglik`` of labels ``y`` under logits ``F``."""
    return float(2.0 * np.sum(np.logaddexp(0.0, F) - y * F))


class GBM:
    family = "gbm"

    def __init__(self, n_trees: int = 100, max_depth: int = 3, shrinkage: float = 0.1, min_leaf: int = 5):
        if n_trees < 1 or max_depth < 1 or min_leaf < 1 or not 0 < shrinkage <= 1:
            raise ValueError("gbm needs n_trees, max_depth, min_leaf >= 1 and 0 < shrinkage <= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.shrinkage = shrinkage
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (0 < y.mean() < 1):
            raise ValueError("need both classes in training labels")
        p0 = y.mean()
        self.init_ = float(np.log(p0 / (1 - p0)))
        F = np.full(len(y), self.init_)
        self.trees_ = []
        self.deviance_ = [binomial_deviance(y, F)]
        for _ in range(self.n_trees):
            p = expit(F)
            g = y - p
            h = p * (1 - p)

            def newton(rows, g=g, h=h):
                den = h[rows].sum()
                return float(g[rows].sum() / den) if den > 1e-12 else 0.0

            tree = grow_tree(X, g, newton, max_depth=self.max_depth, min_leaf=self.min_leaf)
            tree.value *= self.shrinkage
            step = tree.predict(X)
            # Newton leaves can overshoot where h is tiny; halve until the stage helps
            dev = binomial_deviance(y, F + step)
            halvings = 0
            while dev > self.deviance_[-1] and halvings < 50:
                tree.value *= 0.5
                step *= 0.5
                dev = binomial_deviance(y, F + step)
                halvings += 1
            F = F + step
            self.trees_.append(tree)
            self.deviance_.append(dev)
        self.deviance_ = np.array(self.deviance_)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        F = np.full(len(X), self.init_)
        for t in self.trees_:
            F += t.predict(X)
        return F

    def predict_proba(self, X):
        return expit(self.decision_function(X))

    def state(self):
        return {
            "n_trees": self.n_trees, "max_depth": self.max_depth, "shrinkage": self.shrinkage,
            "min_leaf": self.min_leaf, "init": self.init_, "deviance": self.deviance_,
            **pack_trees(self.trees_),
        }

    @classmethod
    def from_state(cls, st):
        m = cls(int(st["n_trees"]), int(st["max_depth"]), float(st["shrinkage"]), int(st["min_leaf"]))
        m.init_ = float(st["init"])
        m.deviance_ = st["deviance"]
        m.trees_ = unpack_trees(st)
        return m

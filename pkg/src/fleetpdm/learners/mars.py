"""Multivariate adaptive regression splines with GCV backward pruning.

Classification is least squares on the 0/1 label; the score is the fitted
response clamped to [0, 1].
"""

from __future__ import annotations

import numpy as np

_TINY = 1e-10


def gcv(rss: float, n: int, n_terms: int, penalty: float) -> float:
    """``(RSS/N) / (1 - C/N)**2`` with ``C = M + penalty * (M - 1) / 2``."""
    c = n_terms + penalty * (n_terms - 1) / 2
    if c >= n:
        return float("inf")
    return (rss / n) / (1 - c / n) ** 2


def _hinge(x, knot, sign):
    return np.maximum(0.0, sign * (x - knot))


class MARS:
    """Basis terms are products of hinges ``max(0, s * (x_j - t))``.

    A term is a tuple of ``(variable, knot, sign)`` factors; the empty tuple
    is the intercept.
    """

    family = "mars"

    def __init__(self, max_terms: int = 21, gcv_penalty: float = 3.0, degree: int = 1):
        if max_terms < 1 or degree < 1 or gcv_penalty < 0:
            raise ValueError("mars needs max_terms >= 1, degree >= 1, gcv_penalty >= 0")
        self.max_terms = max_terms
        self.gcv_penalty = gcv_penalty
        self.degree = degree

    @staticmethod
    def _basis(X, terms):
        B = np.ones((len(X), len(terms)))
        for k, term in enumerate(terms):
            for j, t, s in term:
                B[:, k] *= _hinge(X[:, j], t, s)
        return B

    def _forward(self, X, y):
        n, p = X.shape
        terms = [()]
        cols = [np.ones(n)]
        Q = (cols[0] / np.sqrt(n))[:, None]
        r = y - Q @ (Q.T @ y)
        tss = float(y @ y)
        while len(terms) < self.max_terms:
            best = None  # (reduction, parent, var, knot)
            for pi, parent in enumerate(terms):
                if len(parent) >= self.degree:
                    continue
                pcol = cols[pi]
                used = {j for j, _, _ in parent}
                for j in range(p):
                    if j in used:
                        continue
                    x = X[:, j]
                    knots = np.unique(x[pcol != 0])
                    if knots.size < 2:
                        continue
                    knots = knots[:-1]  # the largest value gives a zero right hinge
                    C1 = pcol[:, None] * np.maximum(0.0, x[:, None] - knots[None])
                    C2 = pcol[:, None] * np.maximum(0.0, knots[None] - x[:, None])
                    C1 -= Q @ (Q.T @ C1)
                    C2 -= Q @ (Q.T @ C2)
                    a11 = (C1 * C1).sum(0)
                    a22 = (C2 * C2).sum(0)
                    a12 = (C1 * C2).sum(0)
                    b1 = r @ C1
                    b2 = r @ C2
                    det = a11 * a22 - a12**2
                    with np.errstate(divide="ignore", invalid="ignore"):
                        both = (a22 * b1**2 - 2 * a12 * b1 * b2 + a11 * b2**2) / det
                        one1 = np.where(a11 > _TINY, b1**2 / a11, 0.0)
                        one2 = np.where(a22 > _TINY, b2**2 / a22, 0.0)
                    ok = det > _TINY * np.maximum(a11 * a22, _TINY)
                    red = np.where(ok, both, np.maximum(one1, one2))
                    red = np.nan_to_num(red, nan=0.0, posinf=0.0, neginf=0.0)
                    k = int(np.argmax(red))
                    if best is None or red[k] > best[0]:
                        best = (float(red[k]), pi, j, float(knots[k]))
            if best is None or best[0] <= 1e-12 * max(tss, 1e-300):
                break
            _, pi, j, t = best
            for s in (1.0, -1.0):
                if len(terms) >= self.max_terms:
                    break
                term = terms[pi] + ((j, t, s),)
                col = cols[pi] * _hinge(X[:, j], t, s)
                q = col - Q @ (Q.T @ col)
                q -= Q @ (Q.T @ q)
                nq = np.linalg.norm(q)
                if nq <= 1e-8 * max(np.linalg.norm(col), 1e-300):
                    continue
                terms.append(term)
                cols.append(col)
                Q = np.column_stack([Q, q / nq])
            r = y - Q @ (Q.T @ y)
        return terms, np.column_stack(cols)

    @staticmethod
    def _rss(B, y):
        coef, *_ = np.linalg.lstsq(B, y, rcond=None)
        res = y - B @ coef
        return float(res @ res), coef

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        terms, B = self._forward(X, y)
        rss, full_coef = self._rss(B, y)
        self.forward_terms_ = len(terms)
        self.forward_gcv_ = gcv(rss, n, len(terms), self.gcv_penalty)

        # backward: drop the term whose removal hurts RSS least, keep the best-GCV subset
        active = list(range(len(terms)))
        best_gcv, best_set = self.forward_gcv_, list(active)
        while len(active) > 1:
            cand = None
            for k in active[1:]:
                sub = [a for a in active if a != k]
                rk, _ = self._rss(B[:, sub], y)
                if cand is None or rk < cand[0]:
                    cand = (rk, k)
            active.remove(cand[1])
            g = gcv(cand[0], n, len(active), self.gcv_penalty)
            if g <= best_gcv:
                best_gcv, best_set = g, list(active)
        self.terms_ = [terms[k] for k in best_set]
        # refit on the chosen subset; the GCV is the one it was selected by
        self.coef_ = full_coef if len(best_set) == len(terms) else self._rss(B[:, best_set], y)[1]
        self.gcv_ = best_gcv
        return self

    def decision_function(self, X):
        return self._basis(np.asarray(X, dtype=float), self.terms_) @ self.coef_

    def predict_proba(self, X):
        return np.clip(self.decision_function(X), 0.0, 1.0)

    def knots(self):
        """Sorted (variable, knot) pairs used by the pruned model."""
        return sorted({(j, t) for term in self.terms_ for j, t, _ in term})

    def state(self):
        # term factors flattened as rows (term index, variable, knot, sign)
        flat = [(k, j, t, s) for k, term in enumerate(self.terms_) for j, t, s in term]
        arr = np.array(flat, dtype=float).reshape(-1, 4)
        return {
            "max_terms": self.max_terms, "gcv_penalty": self.gcv_penalty, "degree": self.degree,
            "n_terms": len(self.terms_), "factors": arr, "coef": self.coef_,
            "gcv": self.gcv_, "forward_gcv": self.forward_gcv_, "forward_terms": self.forward_terms_,
        }

    @classmethod
    def from_state(cls, st):
        m = cls(int(st["max_terms"]), float(st["gcv_penalty"]), int(st["degree"]))
        terms = [[] for _ in range(int(st["n_terms"]))]
        for k, j, t, s in np.asarray(st["factors"]).reshape(-1, 4).tolist():
            terms[int(k)].append((int(j), t, s))
        m.terms_ = [tuple(t) for t in terms]
        m.coef_ = np.asarray(st["coef"], dtype=float)
        m.gcv_ = float(st["gcv"])
        m.forward_gcv_ = float(st["forward_gcv"])
        m.forward_terms_ = int(st["forward_terms"])
        return m

"""Linear, penalized and mixture discriminant analysis for two classes.

All three standardize features with training statistics first. LDA is
affine invariant, so this leaves it unchanged; it puts the PDA ridge on a
common scale across columns.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit, logsumexp

RIDGE_FLOOR = 1e-8


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


class ConvergenceWarning(UserWarning):
    pass


def _standardizer(X):
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return center, scale


def _check_two_classes(y):
    classes = np.unique(y)
    if classes.size != 2 or not np.array_equal(classes, [0, 1]):
        raise ValueError(f"need both classes 0 and 1 in training labels, got {classes.tolist()}")


def _pooled_cov(Z, y):
    """Within-class scatter divided by N (maximum likelihood)."""
    S = np.zeros((Z.shape[1], Z.shape[1]))
    means = []
    for k in (0, 1):
        Zk = Z[y == k]
        mu = Zk.mean(axis=0)
        D = Zk - mu
        S += D.T @ D
        means.append(mu)
    return np.array(means), S / len(Z)


class LDA:
    """Gaussian classes with a shared covariance; ``ridge`` > 0 gives PDA."""

    family = "lda"

    def __init__(self, ridge: float = 0.0, floor: bool = False):
        if ridge < 0:
            raise ValueError("ridge must be >= 0")
        self.ridge = ridge
        self.floor = floor

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_two_classes(y)
        self.center_, self.scale_ = _standardizer(X)
        Z = (X - self.center_) / self.scale_
        self.means_, S = _pooled_cov(Z, y)
        p = S.shape[0]
        S = S + self.ridge * np.eye(p)
        if self.floor:
            S = S + RIDGE_FLOOR * max(np.trace(S) / p, np.finfo(float).tiny) * np.eye(p)
        self.cov_ = S
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError(
                "pooled within-class covariance is singular (constant or collinear features); "
                "use pda for a ridge-stabilized fit"
            ) from None
        if np.linalg.cond(L) ** 2 > 1e14 and not (self.floor or self.ridge):
            raise SingularCovarianceError("pooled within-class covariance is numerically singular")
        self.priors_ = np.array([np.mean(y == 0), np.mean(y == 1)])
        # delta_k(z) = z' S^-1 mu_k - mu_k' S^-1 mu_k / 2 + ln pi_k
        W = np.linalg.solve(S, self.means_.T)
        self.coef_ = W
        self.intercept_ = -0.5 * np.einsum("kp,pk->k", self.means_, W) + np.log(self.priors_)
        return self

    def decision_function(self, X):
        Z = (np.asarray(X, dtype=float) - self.center_) / self.scale_
        return Z @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        d = self.decision_function(X)
        return expit(d[:, 1] - d[:, 0])

    def state(self):
        return {
            "ridge": self.ridge, "floor": int(self.floor), "center": self.center_,
            "scale": self.scale_, "means": self.means_, "cov": self.cov_,
            "priors": self.priors_, "coef": self.coef_, "intercept": self.intercept_,
        }

    @classmethod
    def from_state(cls, st):
        m = LDA(float(st["ridge"]), bool(st["floor"]))
        m.__class__ = cls
        m.center_, m.scale_, m.means_, m.cov_ = st["center"], st["scale"], st["means"], st["cov"]
        m.priors_, m.coef_, m.intercept_ = st["priors"], st["coef"], st["intercept"]
        return m


class PDA(LDA):
    """LDA with ``lam * I`` added to the standardized pooled covariance."""

    family = "pda"

    def __init__(self, lam: float = 1.0):
        super().__init__(ridge=lam, floor=True)


def _kmeanspp(Z, k, rng, n_iter=10):
    """Seeded k-means++ centers refined by a few Lloyd steps; ties go to the lowest index."""
    centers = [Z[rng.integers(len(Z))]]
    for _ in range(1, k):
        d2 = np.min(((Z[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(Z[rng.integers(len(Z))])
            continue
        centers.append(Z[int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right").clip(0, len(Z) - 1))])
    C = np.array(centers)
    for _ in range(n_iter):
        assign = np.argmin(((Z[:, None, :] - C[None]) ** 2).sum(-1), axis=1)
        newC = np.array([Z[assign == j].mean(axis=0) if np.any(assign == j) else C[j] for j in range(k)])
        if np.allclose(newC, C):
            break
        C = newC
    return np.argmin(((Z[:, None, :] - C[None]) ** 2).sum(-1), axis=1)


class MDA:
    """Each class a mixture of ``subclasses`` Gaussians sharing one covariance, fit by EM.

    The covariance carries a fixed ridge ``eps * I`` with
    ``eps = 1e-8 * trace(S0) / p`` from the initial pooled covariance. EM then
    maximizes ``loglik - N * eps / 2 * trace(Sigma^-1)``, which is what
    ``loglik_history_`` records; it is non-decreasing.
    """

    family = "mda"

    def __init__(self, subclasses: int = 3, max_iter: int = 100, rel_tol: float = 1e-6, seed: int = 0):
        if subclasses < 1:
            raise ValueError("subclasses must be >= 1")
        self.subclasses = subclasses
        self.max_iter = max_iter
        self.rel_tol = rel_tol
        self.seed = seed

    def _log_density(self, Z, means, chol, logdet):
        # log N(z | mu_r, Sigma) for every row and every (class, subclass)
        p = Z.shape[1]
        diff = Z[:, None, :] - means[None]
        sol = np.linalg.solve(chol, diff.reshape(-1, p).T).T.reshape(diff.shape)
        maha = (sol**2).sum(-1)
        return -0.5 * (maha + logdet + p * np.log(2 * np.pi))

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_two_classes(y)
        self.center_, self.scale_ = _standardizer(X)
        Z = (X - self.center_) / self.scale_
        N, p = Z.shape
        _, S0 = _pooled_cov(Z, y)
        self.eps_ = RIDGE_FLOOR * max(np.trace(S0) / p, np.finfo(float).tiny)
        self.priors_ = np.array([np.mean(y == 0), np.mean(y == 1)])

        # responsibilities: one block of columns per class, zero outside the row's class
        R = [min(self.subclasses, len(np.unique(Z[y == k], axis=0))) for k in (0, 1)]
        self.n_sub_ = np.array(R)
        cols = np.concatenate([[0] * R[0], [1] * R[1]])
        self.sub_class_ = cols
        resp = np.zeros((N, len(cols)))
        offset = 0
        for k in (0, 1):
            rows = np.flatnonzero(y == k)
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(k,)))
            assign = _kmeanspp(Z[rows], R[k], rng) if R[k] > 1 else np.zeros(len(rows), dtype=int)
            resp[rows, offset + assign] = 1.0
            offset += R[k]

        in_class = cols[None, :] == y[:, None]
        history = []
        best = None
        self.converged_ = False
        means = np.zeros((len(cols), p))
        for it in range(self.max_iter):
            # M-step
            nr = resp.sum(axis=0)
            weights = np.array([nr[j] / nr[cols == cols[j]].sum() for j in range(len(cols))])
            for j in range(len(cols)):
                if nr[j] > 0:
                    means[j] = resp[:, j] @ Z / nr[j]
            S = np.zeros((p, p))
            for j in range(len(cols)):
                D = Z - means[j]
                S += (D * resp[:, j:j + 1]).T @ D
            Sigma = S / N + self.eps_ * np.eye(p)
            chol = np.linalg.cholesky(Sigma)
            logdet = 2 * np.log(np.diag(chol)).sum()
            # E-step and penalized log-likelihood
            with np.errstate(divide="ignore"):
                logw = np.log(weights)
            logp = self._log_density(Z, means, chol, logdet) + logw[None]
            logp = np.where(in_class, logp, -np.inf)
            lse = logsumexp(logp, axis=1)
            inv_tr = np.trace(np.linalg.solve(Sigma, np.eye(p)))
            ll = float(lse.sum() - 0.5 * N * self.eps_ * inv_tr)
            history.append(ll)
            if best is None or ll >= best[0]:
                best = (ll, weights.copy(), means.copy(), Sigma.copy())
            resp = np.exp(logp - lse[:, None])
            if it > 0 and abs(history[-1] - history[-2]) <= self.rel_tol * abs(history[-2]):
                self.converged_ = True
                break
        if not self.converged_:
            warnings.warn(
                f"mda EM did not converge in {len(history)} iterations; keeping the best iterate",
                ConvergenceWarning, stacklevel=2,
            )
        self.loglik_history_ = np.array(history)
        self.n_iter_ = len(history)
        _, self.weights_, self.means_, self.cov_ = best
        return self

    def predict_proba(self, X):
        Z = (np.asarray(X, dtype=float) - self.center_) / self.scale_
        chol = np.linalg.cholesky(self.cov_)
        logdet = 2 * np.log(np.diag(chol)).sum()
        with np.errstate(divide="ignore"):
            logp = self._log_density(Z, self.means_, chol, logdet) + np.log(self.weights_)[None]
        cls_lp = np.stack([
            logsumexp(logp[:, self.sub_class_ == k], axis=1) + np.log(self.priors_[k]) for k in (0, 1)
        ], axis=1)
        return expit(cls_lp[:, 1] - cls_lp[:, 0])

    def state(self):
        return {
            "subclasses": self.subclasses, "max_iter": self.max_iter, "rel_tol": self.rel_tol,
            "seed": self.seed, "center": self.center_, "scale": self.scale_, "eps": self.eps_,
            "priors": self.priors_, "n_sub": self.n_sub_, "sub_class": self.sub_class_,
            "weights": self.weights_, "means": self.means_, "cov": self.cov_,
            "loglik_history": self.loglik_history_, "converged": int(self.converged_),
        }

    @classmethod
    def from_state(cls, st):
        m = cls(int(st["subclasses"]), int(st["max_iter"]), float(st["rel_tol"]), int(st["seed"]))
        for k in ("center", "scale", "priors", "n_sub", "sub_class", "weights", "means", "cov",
                  "loglik_history"):
            setattr(m, k + "_", st[k])
        m.eps_ = float(st["eps"])
        m.converged_ = bool(st["converged"])
        m.n_iter_ = len(m.loglik_history_)
        return m

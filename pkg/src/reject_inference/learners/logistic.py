"""L1-regularized logistic regression fitted by cyclic coordinate descent.

Minimizes ``mean(log(1 + exp(eta)) - y * eta) + lam * ||w||_1`` with
``eta = b + Z @ w`` on standardized features ``Z``. The intercept ``b`` is
not penalized.

Each outer step replaces the logistic loss by its quadratic expansion at
the current fit, solves that penalized weighted least-squares problem by
cyclic soft-thresholding, and backtracks along the resulting direction
until the true objective does not increase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import expit

# Floor on the IRLS weights p(1-p), which vanish for confidently fitted rows.
_MIN_WEIGHT = 1e-5
_MAX_HALVINGS = 40


def _loss(eta, y):
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def logistic_objective(w, b, Z, y, lam) -> float:
    """Penalized objective at ``(w, b)``."""
    return _loss(b + Z @ w, y) + lam * float(np.abs(w).sum())


def logistic_gradient(w, b, Z, y, lam):
    """Gradient of :func:`logistic_objective` w.r.t. ``(w, b)``.

    The penalty contributes ``lam * sign(w_j)``, which is the derivative
    only where ``w_j != 0``.
    """
    r = expit(b + Z @ w) - y
    return Z.T @ r / len(y) + lam * np.sign(w), float(r.mean())


@njit(cache=True)
def soft_threshold(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def _weighted_lasso(Z, wt, target, w, b, lam, tol, max_sweeps):
    """Cyclic coordinate descent on ``sum(wt * (target - b - Z w)**2) / (2n) + lam |w|_1``.

    Updates ``w`` in place and returns the new intercept.
    """
    n, d = Z.shape
    r = target - b - Z @ w
    sw = wt.sum() / n
    wsq = np.empty(d)
    for j in range(d):
        acc = 0.0
        for i in range(n):
            acc += wt[i] * Z[i, j] * Z[i, j]
        wsq[j] = acc / n
    for _ in range(max_sweeps):
        acc = 0.0
        for i in range(n):
            acc += wt[i] * r[i]
        db = acc / n / sw
        b += db
        for i in range(n):
            r[i] -= db
        max_step = abs(db)
        for j in range(d):
            if wsq[j] <= 0.0:
                continue
            acc = 0.0
            for i in range(n):
                acc += wt[i] * Z[i, j] * r[i]
            new = soft_threshold(acc / n + wsq[j] * w[j], lam) / wsq[j]
            delta = new - w[j]
            if delta != 0.0:
                for i in range(n):
                    r[i] -= delta * Z[i, j]
                w[j] = new
                if abs(delta) > max_step:
                    max_step = abs(delta)
        if max_step < tol:
            break
    return b


@dataclass(frozen=True, eq=False)
class L1LogisticModel:
    """Fitted model. ``weights`` act on standardized features."""

    weights: np.ndarray
    intercept: float
    lam: float
    mean: np.ndarray
    scale: np.ndarray
    n_iter: int = 0
    converged: bool = True
    objective_history: tuple = field(default=(), repr=False)

    @property
    def d(self) -> int:
        return len(self.weights)

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} columns, got shape {X.shape}")
        return (X - self.mean) / self.scale

    def decision_function(self, X) -> np.ndarray:
        return self.intercept + self.standardize(X) @ self.weights

    def predict_proba(self, X) -> np.ndarray:
        """Predicted probability of Bad for each row of ``X``."""
        return expit(self.decision_function(X))

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and intercept expressed on the original feature scale."""
        w = self.weights / self.scale
        return w, float(self.intercept - self.mean @ w)

    def to_dict(self) -> dict:
        return {
            "kind": "l1_logistic",
            "version": 1,
            "lam": self.lam,
            "intercept": self.intercept,
            "weights": self.weights.tolist(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
        }


def fit_l1_logistic(
    X,
    y,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 1000,
    standardize: bool = True,
    init: L1LogisticModel | None = None,
) -> L1LogisticModel:
    """Fit an L1-penalized logistic regression.

    Parameters
    ----------
    X : array_like, shape (n, d)
    y : array_like of {0, 1}, shape (n,)
        1 marks a Bad case.
    lam : float
        Penalty weight on the mean-loss scale.
    tol : float
        Stop when the largest coordinate change over an outer step is
        below ``tol``.
    max_iter : int
        Maximum number of outer (quadratic-approximation) steps.
    init : L1LogisticModel, optional
        Warm start from a previous fit on the same columns. Only the starting
        point changes; the optimum does not.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be (n, d) with one label per row")
    if X.shape[0] < 2:
        raise ValueError("need at least two cases")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")

    n, d = X.shape
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(d), np.ones(d)
    Z = (X - mean) / scale

    if init is not None:
        if init.d != d:
            raise ValueError(f"warm start has {init.d} weights, data has {d} columns")
        raw_w, raw_b = init.raw_coefficients()
        w = raw_w * scale
        b = float(raw_b + mean @ raw_w)
    else:
        w = np.zeros(d)
        p_bar = y.mean()
        b = float(np.log(p_bar / (1 - p_bar)))
    Zf = np.asfortranarray(Z)
    current = logistic_objective(w, b, Z, y, lam)
    history = [current]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = b + Z @ w
        p = expit(eta)
        wt = np.maximum(p * (1 - p), _MIN_WEIGHT)
        target = eta + (y - p) / wt
        w_dir = w.copy()
        b_dir = _weighted_lasso(Zf, wt, target, w_dir, b, lam, tol / 10, 100 * max_iter)
        dw, db = w_dir - w, b_dir - b
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = logistic_objective(w + t * dw, b + t * db, Z, y, lam)
            if trial <= current:
                break
            t *= 0.5
        else:
            converged = True  # no descent left along the Newton direction
            break
        w, b, current = w + t * dw, b + t * db, trial
        history.append(current)
        if t * max(float(np.abs(dw).max(initial=0.0)), abs(db)) < tol:
            converged = True
            break

    return L1LogisticModel(
        weights=w,
        intercept=float(b),
        lam=float(lam),
        mean=mean,
        scale=scale,
        n_iter=it,
        converged=converged,
        objective_history=tuple(history),
    )

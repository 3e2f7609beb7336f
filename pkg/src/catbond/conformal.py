"""Conformal prediction intervals: naive, split, jackknife, jackknife+.

Everything is built from one primitive,

    sample_quantile(v, alpha) = k-th smallest of v,  k = ceil((n+1)(1-alpha)),

defined as +infinity when k > n (too few calibration points to certify
the level, e.g. any n < 19 at alpha = 0.05).

A *trainer* is any callable ``trainer(X, y, seed) -> predict`` where
``predict`` maps an (m, p) matrix to (m,) predictions.  Deterministic
trainers are free to ignore the seed.  Leave-one-out refits receive
per-fit seeds ``derive_seed(seed, i)`` for held-out row i, and the
full-data fit uses ``seed`` itself, so artifacts are reproducible and
independent of any parallelism in the caller.

Coverage: the naive interval has no finite-sample guarantee and
undercovers for overfit models; split conformal guarantees >= 1-alpha
marginal coverage; jackknife+ guarantees >= 1-2alpha and in practice
sits near 1-alpha.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linear import PredictionInterval, ols_fit
from .rng import derive_seed
from .schema import InvariantViolation

Trainer = Callable[[np.ndarray, np.ndarray, int], Callable[[np.ndarray], np.ndarray]]


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvariantViolation("alpha must be in (0, 1)")


def sample_quantile(values: np.ndarray, alpha: float) -> float:
    """Conservative (1-alpha) sample quantile.

    Returns the ceil((n+1)(1-alpha))-th order statistic of ``values``,
    or +inf when that index exceeds n.  With n = 19 and alpha = 0.05
    this is the maximum; with n <= 18 it is +inf.
    """
    _check_alpha(alpha)
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    k = math.ceil((n + 1) * (1.0 - alpha))
    if k > n:
        return float("inf")
    return float(np.partition(v, k - 1)[k - 1])


def _column_order_stat(M: np.ndarray, alpha: float) -> np.ndarray:
    """sample_quantile along axis 0 of an (n, m) matrix."""
    n, m = M.shape
    k = math.ceil((n + 1) * (1.0 - alpha))
    if k > n:
        return np.full(m, np.inf)
    return np.partition(M, k - 1, axis=0)[k - 1]


def naive_interval(predict, X_train: np.ndarray, y_train: np.ndarray,
                   X_new: np.ndarray, alpha: float = 0.05) -> PredictionInterval:
    """Symmetric interval from in-sample absolute residuals.

    No coverage guarantee: a model that interpolates its training data
    has near-zero residuals and arbitrarily poor coverage.
    """
    _check_alpha(alpha)
    resid = np.abs(np.asarray(y_train, float).ravel() - predict(X_train))
    q = sample_quantile(resid, alpha)
    point = predict(X_new)
    return PredictionInterval(point, point - q, point + q, alpha, "naive")


def split_conformal(trainer: Trainer, X: np.ndarray, y: np.ndarray,
                    X_new: np.ndarray, alpha: float = 0.05,
                    split_ratio: float = 0.5, seed: int = 0) -> PredictionInterval:
    """Split-conformal interval: fit on one half, calibrate on the other.

    The proper training set takes round(split_ratio * n) rows of a
    seeded permutation; the rest calibrate.  Guarantees >= 1 - alpha
    marginal coverage.  Fewer than ceil((m+1)(1-alpha)) <= m
    calibration points yields infinite intervals.
    """
    _check_alpha(alpha)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if not 0.0 < split_ratio < 1.0:
        raise InvariantViolation("split_ratio must be in (0, 1)")
    m = int(round(split_ratio * n))
    if m < 1 or m > n - 1:
        raise InvariantViolation(f"split_ratio {split_ratio} leaves an empty part (n={n})")
    perm = np.random.default_rng(derive_seed(seed, 0)).permutation(n)
    fit_idx = np.sort(perm[:m])
    cal_idx = np.sort(perm[m:])
    predict = trainer(X[fit_idx], y[fit_idx], derive_seed(seed, 1))
    scores = np.abs(y[cal_idx] - predict(X[cal_idx]))
    q = sample_quantile(scores, alpha)
    point = predict(np.asarray(X_new, dtype=float))
    return PredictionInterval(point, point - q, point + q, alpha, "split")


@dataclass
class LooArtifacts:
    """Leave-one-out refit products shared by jackknife and jackknife+.

    ``predictors[i]`` is the model fitted without row i,
    ``residuals[i] = |y_i - f^(-i)(x_i)|``, and ``full_predict`` is the
    model fitted on all rows.
    """

    predictors: list
    residuals: np.ndarray
    full_predict: Callable[[np.ndarray], np.ndarray]
    n: int
    seed: int

    def loo_matrix(self, X_new: np.ndarray) -> np.ndarray:
        """(n, m) matrix of f^(-i)(x_j)."""
        X_new = np.asarray(X_new, dtype=float)
        return np.vstack([p(X_new) for p in self.predictors])


def jackknife_artifacts(trainer: Trainer, X: np.ndarray, y: np.ndarray,
                        seed: int = 0, n_jobs: int = 1) -> LooArtifacts:
    """Fit the n leave-one-out models plus the full model.

    ``n_jobs`` only parallelises the refits (thread pool); results are
    assembled by row index, so artifacts are identical for any value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 2:
        raise InvariantViolation("need at least 2 rows for leave-one-out")

    keep = np.ones(n, dtype=bool)

    def fit_one(i: int):
        keep_i = keep.copy()
        keep_i[i] = False
        return trainer(X[keep_i], y[keep_i], derive_seed(seed, i))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            predictors = list(pool.map(fit_one, range(n)))
    else:
        predictors = [fit_one(i) for i in range(n)]

    resid = np.empty(n)
    for i, p in enumerate(predictors):
        resid[i] = abs(y[i] - float(p(X[i:i + 1])[0]))
    full_predict = trainer(X, y, seed)
    return LooArtifacts(predictors, resid, full_predict, n, seed)


def jackknife_interval(artifacts: LooArtifacts, X_new: np.ndarray,
                       alpha: float = 0.05) -> PredictionInterval:
    """Full-model prediction +- the (1-alpha) quantile of LOO residuals."""
    _check_alpha(alpha)
    q = sample_quantile(artifacts.residuals, alpha)
    point = artifacts.full_predict(np.asarray(X_new, dtype=float))
    return PredictionInterval(point, point - q, point + q, alpha, "jackknife")


def jackknife_plus_interval(artifacts: LooArtifacts, X_new: np.ndarray,
                            alpha: float = 0.05) -> PredictionInterval:
    """Jackknife+ interval of Barber et al.:

        [ q_alpha^- { f^(-i)(x) - r_i },  q_alpha^+ { f^(-i)(x) + r_i } ]

    where q_alpha^+ is :func:`sample_quantile` and the lower endpoint is
    computed by negation, -sample_quantile of the negated values.
    Guarantees coverage >= 1 - 2 alpha for exchangeable data; the
    reported point is the full-model prediction (which the interval
    does not use).
    """
    _check_alpha(alpha)
    P = artifacts.loo_matrix(X_new)
    r = artifacts.residuals[:, None]
    upper = _column_order_stat(P + r, alpha)
    lower = -_column_order_stat(-(P - r), alpha)
    point = artifacts.full_predict(np.asarray(X_new, dtype=float))
    return PredictionInterval(point, lower, upper, alpha, "jackknife_plus")


# ------------------------------------------------------------- trainers


def ols_trainer() -> Trainer:
    """OLS as a conformal trainer (ignores the seed)."""

    def train(X: np.ndarray, y: np.ndarray, seed: int):
        return ols_fit(X, y).predict

    return train


def gbm_trainer(hp) -> Trainer:
    """Boosted-tree trainer; the conformal seed replaces ``hp.seed``."""
    from .boost import fit as gbm_fit

    def train(X: np.ndarray, y: np.ndarray, seed: int):
        return gbm_fit(X, y, hp.replace(seed=int(seed) & 0x7FFFFFFFFFFFFFFF)).predict

    return train


def mean_trainer() -> Trainer:
    """Predicts the training mean everywhere (baseline/testing)."""

    def train(X: np.ndarray, y: np.ndarray, seed: int):
        mu = float(np.mean(y))

        def predict(Q: np.ndarray) -> np.ndarray:
            return np.full(np.asarray(Q).shape[0], mu)

        return predict

    return train

"""Linear baselines: OLS with normal-theory inference, lasso by cyclic
coordinate descent, and bidirectional stepwise selection under AIC.

All fitting works on a plain design matrix (no intercept column; the
intercept is handled internally and never penalised or dropped).  The
response scale is the caller's business; for bond work it is the
decimal spread.

Normal-theory prediction intervals use the t distribution:

    yhat +- t_{1-alpha/2, n-p-1} * sigma_hat * sqrt(1 + x' (X'X)^-1 x)

with x augmented by the intercept.  The lasso carries no sampling
theory, so lasso models expose point predictions only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .rng import kfold_indices
from .schema import CatbondError, InvariantViolation

#: cond(A'A) above this raises IllConditioned
COND_LIMIT = 1e10


class IllConditioned(CatbondError):
    """The normal equations are numerically singular."""


@dataclass
class PredictionInterval:
    """Pointwise intervals at miscoverage ``alpha``."""

    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    method: str

    @property
    def length(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (self.lower <= y) & (y <= self.upper)


@dataclass
class LinearModel:
    """Fitted linear model on the augmented basis [1, X]."""

    method: str
    feature_names: list[str]
    intercept: float
    coef: np.ndarray
    n: int
    dof: int
    sigma2: float
    r2: float
    adj_r2: float
    xtx_inv: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    t_values: np.ndarray | None = None
    p_values: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.coef):
            raise InvariantViolation(
                f"X has shape {X.shape}, model expects (*, {len(self.coef)})"
            )
        return self.intercept + X @ self.coef

    def to_dict(self) -> dict:
        d = {
            "format": "catbond-linear/1",
            "method": self.method,
            "feature_names": list(self.feature_names),
            "intercept": float(self.intercept),
            "coef": [float(c) for c in self.coef],
            "n": int(self.n),
            "dof": int(self.dof),
            "sigma2": float(self.sigma2),
            "r2": float(self.r2),
            "adj_r2": float(self.adj_r2),
            "xtx_inv": None if self.xtx_inv is None else self.xtx_inv.tolist(),
            "std_errors": None if self.std_errors is None else self.std_errors.tolist(),
            "t_values": None if self.t_values is None else self.t_values.tolist(),
            "p_values": None if self.p_values is None else self.p_values.tolist(),
            "extra": _jsonable(self.extra),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        if d.get("format") != "catbond-linear/1":
            raise InvariantViolation(f"not a linear model file: format={d.get('format')!r}")
        arr = lambda v: None if v is None else np.asarray(v, dtype=float)
        return cls(
            method=d["method"],
            feature_names=list(d["feature_names"]),
            intercept=float(d["intercept"]),
            coef=np.asarray(d["coef"], dtype=float),
            n=int(d["n"]),
            dof=int(d["dof"]),
            sigma2=float(d["sigma2"]),
            r2=float(d["r2"]),
            adj_r2=float(d["adj_r2"]),
            xtx_inv=arr(d.get("xtx_inv")),
            std_errors=arr(d.get("std_errors")),
            t_values=arr(d.get("t_values")),
            p_values=arr(d.get("p_values")),
            extra=d.get("extra", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _augment(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvariantViolation("X must be 2-dimensional")
    return np.column_stack([np.ones(X.shape[0]), X])


def _check_xy(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise InvariantViolation(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvariantViolation("X and y must be finite")
    return X, y


def _rank_deficient_columns(X: np.ndarray, feature_names: Sequence[str]) -> list[str]:
    """Columns that do not add rank to the intercept-augmented design.

    Greedy left-to-right scan: a column whose inclusion leaves the
    matrix rank unchanged is (numerically) a linear combination of the
    intercept and the columns before it.
    """
    n = X.shape[0]
    kept = np.ones((n, 1))
    rank = 1
    culprits: list[str] = []
    for j, name in enumerate(feature_names):
        trial = np.hstack([kept, X[:, j:j + 1]])
        r = np.linalg.matrix_rank(trial)
        if r > rank:
            kept, rank = trial, r
        else:
            culprits.append(str(name))
    return culprits


def ols_fit(X: np.ndarray, y: np.ndarray, feature_names: Sequence[str] | None = None,
            method: str = "ols") -> LinearModel:
    """Ordinary least squares via the normal equations, with inference.

    Requires ``n > p + 1`` so the error variance is estimable.  Raises
    :class:`IllConditioned` when cond(A'A) exceeds ``COND_LIMIT`` with
    A the intercept-augmented design.
    """
    X, y = _check_xy(X, y)
    n, k = X.shape
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(k)]
    if len(feature_names) != k:
        raise InvariantViolation("feature_names length does not match X")
    if n < k + 2:
        raise InvariantViolation(f"need n > p + 1 for inference (n={n}, p={k})")

    A = _augment(X)
    G = A.T @ A
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        culprits = _rank_deficient_columns(X, feature_names)
        detail = f"; offending columns: {', '.join(culprits)}" if culprits else ""
        raise IllConditioned(
            f"cond(X'X) = {cond:.3e} exceeds {COND_LIMIT:.0e}{detail}"
        )
    G_inv = np.linalg.inv(G)
    beta = G_inv @ (A.T @ y)

    resid = y - A @ beta
    rss = float(resid @ resid)
    dof = n - k - 1
    sigma2 = rss / dof
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss < 1e-12 else 0.0)
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof

    se = np.sqrt(np.maximum(sigma2 * np.diag(G_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = 2.0 * stats.t.sf(np.abs(tvals), dof)

    return LinearModel(
        method=method,
        feature_names=list(feature_names),
        intercept=float(beta[0]),
        coef=beta[1:].copy(),
        n=n,
        dof=dof,
        sigma2=sigma2,
        r2=r2,
        adj_r2=adj_r2,
        xtx_inv=G_inv,
        std_errors=se,
        t_values=np.asarray(tvals, dtype=float),
        p_values=np.asarray(pvals, dtype=float),
    )


def ols_predict_interval(model: LinearModel, X: np.ndarray, alpha: float = 0.05) -> PredictionInterval:
    """t prediction intervals for new rows ``X``."""
    if model.xtx_inv is None:
        raise InvariantViolation(
            f"{model.method} model carries no sampling theory; "
            "use a conformal interval instead"
        )
    if not 0.0 < alpha < 1.0:
        raise InvariantViolation("alpha must be in (0, 1)")
    point = model.predict(X)
    A = _augment(np.asarray(X, dtype=float))
    lev = np.einsum("ij,jk,ik->i", A, model.xtx_inv, A)
    half = stats.t.ppf(1.0 - alpha / 2.0, model.dof) * np.sqrt(
        model.sigma2 * (1.0 + lev)
    )
    return PredictionInterval(point, point - half, point + half, alpha, "normal")


def ols_loo_residuals(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact leave-one-out residuals via the hat-matrix identity.

    e_i^loo = e_i / (1 - h_ii), equal to brute-force refits for any
    well-conditioned design.
    """
    X, y = _check_xy(X, y)
    A = _augment(X)
    G = A.T @ A
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"cond(X'X) = {cond:.3e} exceeds {COND_LIMIT:.0e}")
    G_inv = np.linalg.inv(G)
    beta = G_inv @ (A.T @ y)
    resid = y - A @ beta
    h = np.einsum("ij,jk,ik->i", A, G_inv, A)
    return resid / (1.0 - h)


# ---------------------------------------------------------------- lasso


def soft_threshold(z: float | np.ndarray, t: float):
    """S(z, t) = sign(z) * max(|z| - t, 0)."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _standardize(X: np.ndarray, y: np.ndarray):
    mx = X.mean(axis=0)
    sx = X.std(axis=0)
    active = sx > 0
    sx_safe = np.where(active, sx, 1.0)
    Xs = (X - mx) / sx_safe
    my = y.mean()
    return Xs, y - my, mx, sx_safe, active, my


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is exactly zero.

    Computed on the internally standardised problem:
    max_j |x_j' (y - ybar)| / n.
    """
    X, y = _check_xy(X, y)
    Xs, yc, _, _, active, _ = _standardize(X, y)
    if not active.any():
        return 0.0
    return float(np.max(np.abs(Xs[:, active].T @ yc)) / X.shape[0])


def lasso_objective(X: np.ndarray, y: np.ndarray, intercept: float,
                    coef: np.ndarray, lam: float) -> float:
    """Objective the coordinate descent minimises, evaluated for a
    coefficient vector on the original scale:

        (1 / 2n) * ||y - b0 - X b||^2 + lam * sum_j |b_j * sd_j|

    The penalty applies to standardised coefficients, hence the sd_j
    factors.
    """
    X, y = _check_xy(X, y)
    coef = np.asarray(coef, dtype=float)
    resid = y - intercept - X @ coef
    sx = X.std(axis=0)
    return float(resid @ resid / (2.0 * X.shape[0]) + lam * np.sum(np.abs(coef * sx)))


def lasso_fit(X: np.ndarray, y: np.ndarray, lam: float,
              feature_names: Sequence[str] | None = None,
              tol: float = 1e-7, max_sweeps: int = 10_000) -> LinearModel:
    """Lasso by cyclic coordinate descent with soft-thresholding.

    Features are standardised internally and the intercept is left
    unpenalised; reported coefficients are on the original scale.
    Iteration stops when the largest standardised-coefficient update in
    a full sweep falls below ``tol``, or after ``max_sweeps`` sweeps
    (recorded in ``extra["converged"]``).  ``extra["objective_trace"]``
    holds the penalised objective after each sweep; coordinate descent
    makes it non-increasing.
    """
    X, y = _check_xy(X, y)
    if lam < 0:
        raise InvariantViolation("lam must be >= 0")
    n, k = X.shape
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(k)]

    Xs, yc, mx, sx, active, my = _standardize(X, y)
    b = np.zeros(k)
    r = yc.copy()
    sweeps = 0
    converged = False
    objective_trace: list[float] = []
    while sweeps < max_sweeps:
        sweeps += 1
        delta = 0.0
        for j in range(k):
            if not active[j]:
                continue
            bj = b[j]
            rho = (Xs[:, j] @ r) / n + bj
            bn = soft_threshold(rho, lam)
            if bn != bj:
                r -= Xs[:, j] * (bn - bj)
                b[j] = bn
                delta = max(delta, abs(bn - bj))
        objective_trace.append(float(r @ r) / (2 * n) + lam * float(np.abs(b).sum()))
        if delta < tol:
            converged = True
            break

    coef = b / sx
    coef[~active] = 0.0
    intercept = my - float(mx @ coef)
    resid = y - intercept - X @ coef
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss < 1e-12 else 0.0)
    dof = max(n - k - 1, 1)
    return LinearModel(
        method="lasso",
        feature_names=list(feature_names),
        intercept=intercept,
        coef=coef,
        n=n,
        dof=dof,
        sigma2=rss / dof,
        r2=r2,
        adj_r2=1.0 - (1.0 - r2) * (n - 1) / dof,
        extra={"lam": float(lam), "sweeps": sweeps, "converged": converged,
               "objective_trace": objective_trace},
    )


def default_lambda_grid(X: np.ndarray, y: np.ndarray, n_lambdas: int = 50,
                        ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced grid from lam_max down to lam_max * ratio, ascending."""
    lmax = lasso_lambda_max(X, y)
    if lmax <= 0:
        return np.array([0.0])
    return np.sort(np.geomspace(lmax * ratio, lmax, n_lambdas))


def lasso_cv(X: np.ndarray, y: np.ndarray, lambdas: np.ndarray | None = None,
             k: int = 5, seed: int = 0,
             feature_names: Sequence[str] | None = None) -> LinearModel:
    """Select the penalty by k-fold cross-validated MSE, then refit.

    The grid is scanned in ascending order and ties in CV MSE resolve
    toward the larger penalty.  Fold assignment is a seeded permutation
    shared by every candidate.
    """
    X, y = _check_xy(X, y)
    if lambdas is None:
        lambdas = default_lambda_grid(X, y)
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    folds = kfold_indices(X.shape[0], k, seed)
    mask = np.ones(X.shape[0], dtype=bool)

    cv_mse = np.empty(lambdas.size)
    for i, lam in enumerate(lambdas):
        errs = []
        for fold in folds:
            mask[:] = True
            mask[fold] = False
            m = lasso_fit(X[mask], y[mask], lam)
            errs.append(np.mean((y[fold] - m.predict(X[fold])) ** 2))
        cv_mse[i] = np.mean(errs)

    best_i = 0
    for i in range(1, lambdas.size):
        if cv_mse[i] <= cv_mse[best_i]:
            best_i = i
    model = lasso_fit(X, y, lambdas[best_i], feature_names=feature_names)
    model.extra["cv"] = {"lambdas": lambdas.tolist(), "mse": cv_mse.tolist(),
                         "k": k, "seed": seed}
    return model


# ------------------------------------------------------------- stepwise


def aic(rss: float, n: int, n_predictors: int) -> float:
    """AIC for a Gaussian linear model up to an additive constant:
    n * ln(RSS / n) + 2 * (n_predictors + 1)."""
    if rss <= 0:
        rss = 1e-300  # guard exact interpolation
    return n * float(np.log(rss / n)) + 2.0 * (n_predictors + 1)


def _rss(X: np.ndarray, y: np.ndarray, cols: list[int]) -> float:
    A = _augment(X[:, cols]) if cols else np.ones((X.shape[0], 1))
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ beta
    return float(r @ r)


def stepwise_select(X: np.ndarray, y: np.ndarray,
                    feature_names: Sequence[str] | None = None,
                    direction: str = "both",
                    max_steps: int | None = None) -> LinearModel:
    """Greedy AIC search over predictor subsets, then an OLS refit.

    Starts from the intercept-only model.  Each step evaluates every
    single-column addition (direction "forward" or "both") and every
    single-column deletion ("backward" or "both"; backward starts from
    the full model) and takes the move with the lowest AIC, stopping
    when no move beats the current model.  Ties resolve to the move
    generated first: additions before deletions, each scanned in
    ascending column order.
    """
    X, y = _check_xy(X, y)
    n, k = X.shape
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(k)]
    if direction not in ("both", "forward", "backward"):
        raise InvariantViolation("direction must be both, forward, or backward")
    if max_steps is None:
        max_steps = 4 * k + 8

    selected = list(range(k)) if direction == "backward" else []
    current = aic(_rss(X, y, selected), n, len(selected))
    trace = [("start", None, current)]

    for _ in range(max_steps):
        best_move, best_aic = None, current
        if direction in ("both", "forward"):
            for j in range(k):
                if j in selected:
                    continue
                a = aic(_rss(X, y, sorted(selected + [j])), n, len(selected) + 1)
                if a < best_aic:
                    best_move, best_aic = ("add", j), a
        if direction in ("both", "backward"):
            for j in selected:
                rest = [c for c in selected if c != j]
                a = aic(_rss(X, y, rest), n, len(rest))
                if a < best_aic:
                    best_move, best_aic = ("drop", j), a
        if best_move is None:
            break
        action, j = best_move
        if action == "add":
            selected = sorted(selected + [j])
        else:
            selected = [c for c in selected if c != j]
        current = best_aic
        trace.append((action, int(j), current))

    names = [feature_names[j] for j in selected]
    if selected and n >= len(selected) + 2:
        model = ols_fit(X[:, selected], y, feature_names=names, method="stepwise")
    else:
        # intercept-only fallback keeps the interval machinery intact
        model = ols_fit(np.zeros((n, 0)), y, feature_names=[], method="stepwise")
    model.extra["selected"] = names
    model.extra["selected_idx"] = [int(j) for j in selected]
    model.extra["aic"] = float(current)
    model.extra["trace"] = [
        {"action": a, "column": (None if j is None else feature_names[j]), "aic": float(v)}
        for a, j, v in trace
    ]
    model.extra["all_feature_names"] = list(feature_names)
    return model


def stepwise_predict(model: LinearModel, X_full: np.ndarray) -> np.ndarray:
    """Predict from the full design matrix by selecting the model's columns."""
    idx = model.extra.get("selected_idx")
    if idx is None:
        raise InvariantViolation("not a stepwise model")
    return model.predict(X_full[:, idx])

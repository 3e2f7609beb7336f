"""Model comparison: k-fold grid search and Monte-Carlo cross-validation.

The Monte-Carlo harness repeats a seeded train/test split (default
80/20: the training set takes round(0.8 n) rows of a fresh permutation
per split), and for every model per split: optional per-split tuning,
fit, test predictions, and prediction intervals.  Reported per split
and model are

    mse       test mean squared error on the decimal spread scale
    coverage  fraction of test spreads inside the interval
    length    mean interval length in basis points

Interval construction per model kind: normal-theory for OLS and
stepwise, jackknife+ for gbm, naive for the mean baseline, none for
the lasso (it carries no sampling theory).  Stepwise re-runs its
selection inside every split by default, so selection noise is part of
the measured variance.

Split s derives every downstream seed from ``derive_seed(seed, s)``;
reports are byte-identical for a fixed seed no matter how many worker
threads run the splits.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boost import Ensemble, Hyperparams
from .boost import fit as gbm_fit
from .conformal import (
    gbm_trainer,
    jackknife_artifacts,
    jackknife_plus_interval,
    naive_interval,
)
from .linear import (
    LinearModel,
    PredictionInterval,
    lasso_cv,
    ols_fit,
    ols_predict_interval,
    stepwise_select,
)
from .rng import derive_seed, kfold_indices
from .schema import BPS_PER_UNIT, Dataset, FeatureSpec, InvariantViolation, design_matrix

MODEL_KINDS = ("mean", "ols", "lasso", "stepwise", "gbm")


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid: {field name: candidate values}.

    Combinations enumerate in nested product order over the insertion
    order of ``values``; grid-search ties resolve to the earliest
    combination in that order.
    """

    values: dict

    def __post_init__(self):
        if not self.values:
            raise InvariantViolation("grid must name at least one hyperparameter")
        for k, v in self.values.items():
            if len(v) < 1:
                raise InvariantViolation(f"grid for {k!r} is empty")

    def combos(self) -> list[dict]:
        keys = list(self.values)
        return [dict(zip(keys, c)) for c in itertools.product(*self.values.values())]


def grid_search(X: np.ndarray, y: np.ndarray, base: Hyperparams, grid: GridSpec,
                k: int = 5, seed: int = 0) -> tuple[Hyperparams, list[dict]]:
    """Pick the grid combination with the lowest k-fold CV MSE.

    A single-combination grid skips the fold loop entirely (the argmin
    is forced) and reports ``cv_mse = None``.  Fold assignment comes
    from one seeded permutation shared by all combinations.
    """
    combos = grid.combos()
    if len(combos) == 1:
        return base.replace(**combos[0]), [{"params": combos[0], "cv_mse": None}]

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    folds = kfold_indices(y.size, k, seed)
    mask = np.ones(y.size, dtype=bool)

    table = []
    best_i, best_mse = 0, np.inf
    for i, combo in enumerate(combos):
        hp = base.replace(**combo)
        errs = []
        for fold in folds:
            mask[:] = True
            mask[fold] = False
            model = gbm_fit(X[mask], y[mask], hp)
            errs.append(float(np.mean((y[fold] - model.predict(X[fold])) ** 2)))
        mse = float(np.mean(errs))
        table.append({"params": combo, "cv_mse": mse})
        if mse < best_mse:
            best_i, best_mse = i, mse
    return base.replace(**combos[best_i]), table


@dataclass(frozen=True)
class ModelSpec:
    """One entrant in the Monte-Carlo comparison.

    ``features`` defaults to main effects only for tree models and the
    full interaction design for linear ones (set explicitly to
    override).  ``grid`` enables per-split tuning for gbm.
    """

    name: str
    kind: str
    features: FeatureSpec | None = None
    hp: Hyperparams | None = None
    grid: GridSpec | None = None
    lambdas: tuple | None = None
    direction: str = "both"
    refit_selection: bool = True

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvariantViolation(f"kind must be one of {MODEL_KINDS}")

    def feature_spec(self) -> FeatureSpec:
        if self.features is not None:
            return self.features
        if self.kind == "gbm":
            return FeatureSpec.main_effects()
        return FeatureSpec.full()


@dataclass
class CVReport:
    """Monte-Carlo CV results: one row per (split, model)."""

    n_splits: int
    train_frac: float
    alpha: float
    seed: int
    model_names: list[str]
    rows: list[dict] = field(default_factory=list)

    def aggregates(self) -> dict[str, dict]:
        out = {}
        for name in self.model_names:
            ok = [r for r in self.rows if r["model"] == name and r["error"] is None]
            bad = [r for r in self.rows if r["model"] == name and r["error"] is not None]
            agg = {"n_ok": len(ok), "n_failed": len(bad)}
            if ok:
                mses = np.array([r["mse"] for r in ok])
                agg["mse_mean"] = float(mses.mean())
                agg["mse_sd"] = float(mses.std(ddof=1)) if len(ok) > 1 else 0.0
                covs = [r["coverage"] for r in ok if r["coverage"] is not None]
                lens = [r["length_bps"] for r in ok if r["length_bps"] is not None]
                agg["coverage_mean"] = float(np.mean(covs)) if covs else None
                agg["length_bps_mean"] = float(np.mean(lens)) if lens else None
            out[name] = agg
        return out

    def to_dict(self) -> dict:
        return {
            "format": "catbond-cvreport/1",
            "n_splits": self.n_splits,
            "train_frac": self.train_frac,
            "alpha": self.alpha,
            "seed": self.seed,
            "models": self.model_names,
            "aggregates": self.aggregates(),
            "rows": self.rows,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_rows_csv(self, path) -> None:
        cols = ("split", "model", "mse", "coverage", "length_bps", "n_test", "error")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                cells = []
                for c in cols:
                    v = r[c]
                    cells.append("" if v is None else
                                 (repr(float(v)) if isinstance(v, float) else str(v)))
                fh.write(",".join(cells) + "\n")


def _fit_eval_one(model: ModelSpec, mi: int, data: Dataset, train_idx, test_idx,
                  alpha: float, split_seed: int, loo_jobs: int) -> dict:
    spec = model.feature_spec()
    train, test = data.take(train_idx), data.take(test_idx)
    Xtr, names = design_matrix(train, spec)
    Xte, _ = design_matrix(test, spec)
    ytr = train.spread / BPS_PER_UNIT
    yte = test.spread / BPS_PER_UNIT
    mseed = derive_seed(split_seed, mi)

    interval: PredictionInterval | None = None
    if model.kind == "mean":
        mu = float(ytr.mean())
        pred = np.full(yte.size, mu)
        predict = lambda Q: np.full(np.asarray(Q).shape[0], mu)
        interval = naive_interval(predict, Xtr, ytr, Xte, alpha)
    elif model.kind == "ols":
        m = ols_fit(Xtr, ytr, feature_names=names)
        pred = m.predict(Xte)
        interval = ols_predict_interval(m, Xte, alpha)
    elif model.kind == "lasso":
        lambdas = None if model.lambdas is None else np.asarray(model.lambdas, dtype=float)
        m = lasso_cv(Xtr, ytr, lambdas=lambdas, seed=mseed, feature_names=names)
        pred = m.predict(Xte)
    elif model.kind == "stepwise":
        m = stepwise_select(Xtr, ytr, feature_names=names, direction=model.direction)
        idx = m.extra["selected_idx"]
        pred = m.predict(Xte[:, idx])
        interval = ols_predict_interval(m, Xte[:, idx], alpha)
    elif model.kind == "gbm":
        hp = model.hp if model.hp is not None else Hyperparams()
        if model.grid is not None:
            hp, _ = grid_search(Xtr, ytr, hp, model.grid, seed=derive_seed(mseed, 0))
        hp = hp.replace(seed=int(derive_seed(mseed, 1)) & 0x7FFFFFFFFFFFFFFF)
        m = gbm_fit(Xtr, ytr, hp, feature_names=names)
        pred = m.predict(Xte)
        artifacts = jackknife_artifacts(gbm_trainer(hp), Xtr, ytr,
                                        seed=derive_seed(mseed, 2), n_jobs=loo_jobs)
        interval = jackknife_plus_interval(artifacts, Xte, alpha)
    else:  # pragma: no cover - guarded by ModelSpec
        raise InvariantViolation(f"unknown kind {model.kind!r}")

    row = {
        "model": model.name,
        "mse": float(np.mean((yte - pred) ** 2)),
        "coverage": None,
        "length_bps": None,
        "n_test": int(yte.size),
        "error": None,
    }
    if interval is not None:
        row["coverage"] = float(np.mean(interval.covers(yte)))
        row["length_bps"] = float(np.mean(interval.length) * BPS_PER_UNIT)
    return row


def monte_carlo_cv(data: Dataset, models: list[ModelSpec], n_splits: int = 100,
                   train_frac: float = 0.8, alpha: float = 0.05, seed: int = 0,
                   n_jobs: int = 1, loo_jobs: int = 1) -> CVReport:
    """Repeated seeded train/test evaluation of several models.

    Failures in one model/split are caught and recorded (``error``
    field) without aborting the run.  ``n_jobs`` threads process splits
    concurrently; rows are ordered by (split, model) regardless.
    """
    if not data.has_response:
        raise InvariantViolation("dataset has no SPREAD column")
    if not 0.0 < train_frac < 1.0:
        raise InvariantViolation("train_frac must be in (0, 1)")
    if n_splits < 1:
        raise InvariantViolation("n_splits must be >= 1")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise InvariantViolation("model names must be unique")
    n = data.n
    m_train = int(round(train_frac * n))
    if not 1 <= m_train <= n - 1:
        raise InvariantViolation("train_frac leaves an empty train or test set")

    def run_split(s: int) -> list[dict]:
        split_seed = derive_seed(seed, s)
        perm = np.random.default_rng(split_seed).permutation(n)
        train_idx = np.sort(perm[:m_train])
        test_idx = np.sort(perm[m_train:])
        rows = []
        for mi, model in enumerate(models):
            try:
                row = _fit_eval_one(model, mi, data, train_idx, test_idx,
                                    alpha, split_seed, loo_jobs)
            except Exception as exc:  # noqa: BLE001 - recorded, not silenced
                row = {"model": model.name, "mse": None, "coverage": None,
                       "length_bps": None, "n_test": int(n - m_train),
                       "error": f"{type(exc).__name__}: {exc}"}
            row["split"] = s
            rows.append(row)
        return rows

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_split = list(pool.map(run_split, range(n_splits)))
    else:
        per_split = [run_split(s) for s in range(n_splits)]

    report = CVReport(n_splits=n_splits, train_frac=train_frac, alpha=alpha,
                      seed=seed, model_names=names)
    for rows in per_split:
        report.rows.extend(rows)
    return report

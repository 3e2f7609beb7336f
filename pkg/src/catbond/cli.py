"""Command-line interface.

Subcommands: ``synth``, ``fit``, ``predict``, ``interpret``,
``evaluate``.  Exit codes: 0 success, 2 usage or configuration error,
3 missing or unreadable input file, 4 data or model-file validation
error.

A JSON config file (``--config``) may supply any long option for the
invoked subcommand, keyed by option name with dashes as underscores
(e.g. ``{"noise_sd": 0.0}``).  Explicit command-line flags win over the
config file, which wins over built-in defaults.  Each subcommand takes
one ``--seed`` that pins all randomness in the invocation.

Spreads are basis points on disk and in every CSV this tool writes;
models operate on the decimal scale internally.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .boost import Ensemble, Hyperparams, InvalidHyperparams
from .boost import fit as gbm_fit
from .conformal import (
    gbm_trainer,
    jackknife_artifacts,
    jackknife_interval,
    jackknife_plus_interval,
    naive_interval,
    split_conformal,
)
from .evaluation import GridSpec, ModelSpec, monte_carlo_cv
from .interpret import (
    ale_first_order,
    ale_second_order,
    conditional_curve,
    conditional_curve_by_scenario,
    feature_importance,
)
from .linear import (
    LinearModel,
    lasso_cv,
    lasso_fit,
    ols_fit,
    ols_predict_interval,
    stepwise_select,
)
from .schema import (
    BPS_PER_UNIT,
    PREDICTORS,
    CatbondError,
    Dataset,
    FeatureSpec,
    InvariantViolation,
    MissingColumn,
    ParseError,
    UnknownPredictor,
    design_matrix,
    load_csv,
    write_csv,
)
from .synth import ScenarioConfig, generate, write_metadata

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_DATA = 4


class UsageError(Exception):
    """Maps to exit code 2."""


def _read_json(path, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {what} file {path}: {exc}") from None


def _spec_from_names(names: list[str]) -> FeatureSpec:
    """Rebuild a FeatureSpec from stored model column names."""
    mains, inters = [], []
    for name in names:
        if ":" in name:
            a, b = name.split(":", 1)
            inters.append((a, b))
        else:
            mains.append(name)
    return FeatureSpec(predictors=tuple(mains), interactions=tuple(inters))


def _load_model(path):
    d = _read_json(path, "model")
    fmt = d.get("format", "")
    if fmt == "catbond-linear/1":
        return LinearModel.from_dict(d)
    if fmt == "catbond-gbm/1":
        return Ensemble.from_dict(d)
    raise InvariantViolation(f"unrecognised model format {fmt!r} in {path}")


def _design_for_model(model, data: Dataset):
    spec = _spec_from_names(list(model.feature_names))
    X, names = design_matrix(data, spec)
    return X, names


# -------------------------------------------------------------- synth


def _cmd_synth(args) -> int:
    try:
        cfg = ScenarioConfig(n=args.n, seed=args.seed, truth=args.truth,
                             noise_sd=args.noise_sd)
    except InvariantViolation as exc:
        # bad generator settings are a configuration error, not bad data
        raise UsageError(str(exc)) from exc
    data = generate(cfg)
    write_csv(data, args.out)
    meta_path = args.meta if args.meta else str(args.out) + ".meta.json"
    write_metadata(cfg, meta_path)
    print(f"wrote {data.n} bonds to {args.out} (truth={cfg.truth}, "
          f"seed={cfg.seed}, noise_sd={cfg.noise_sd}); metadata in {meta_path}")
    return EXIT_OK


# ---------------------------------------------------------------- fit


def _features_arg(value: str) -> FeatureSpec:
    if value == "full":
        return FeatureSpec.full()
    if value == "main":
        return FeatureSpec.main_effects()
    mains: list[str] = []
    inters: list[tuple[str, str]] = []
    for term in value.split(","):
        term = term.strip()
        if not term:
            raise UsageError(f"empty term in --features {value!r}")
        if ":" in term:
            a, _, b = term.partition(":")
            inters.append((a, b))
        else:
            mains.append(term)
    try:
        return FeatureSpec(predictors=tuple(mains), interactions=tuple(inters))
    except (UnknownPredictor, InvariantViolation) as exc:
        raise UsageError(f"bad --features {value!r}: {exc}") from exc


def _cmd_fit(args) -> int:
    data = load_csv(args.data, require_response=True)
    spec = _features_arg(args.features)
    X, names = design_matrix(data, spec)
    y = data.spread / BPS_PER_UNIT
    params = _read_json(args.params, "params") if args.params else {}

    if args.model == "ols":
        model = ols_fit(X, y, feature_names=names)
    elif args.model == "lasso":
        if "lam" in params:
            model = lasso_fit(X, y, float(params["lam"]), feature_names=names)
        else:
            lambdas = params.get("lambdas")
            model = lasso_cv(X, y,
                             lambdas=None if lambdas is None else np.asarray(lambdas, float),
                             k=int(params.get("k", 5)), seed=args.seed,
                             feature_names=names)
    elif args.model == "stepwise":
        model = stepwise_select(X, y, feature_names=names,
                                direction=params.get("direction", "both"))
    elif args.model == "gbm":
        hp = Hyperparams.from_dict(params) if params else Hyperparams()
        if args.seed is not None:
            hp = hp.replace(seed=args.seed)
        model = gbm_fit(X, y, hp, feature_names=names)
    else:  # pragma: no cover - argparse choices
        raise UsageError(f"unknown model {args.model!r}")

    model.save(args.out)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(_fit_report(model))
    print(f"fitted {args.model} on {data.n} bonds -> {args.out}")
    return EXIT_OK


def _fit_report(model) -> str:
    lines = []
    if isinstance(model, Ensemble):
        lines.append(f"gbm: {model.n_trees} trees, base_score={model.base_score:.6f}")
        lines.append(f"training MSE: {model.training_mse[0]:.3e} -> {model.training_mse[-1]:.3e}")
        lines.append("gain importance:")
        for name, v in sorted(feature_importance(model).items(),
                              key=lambda kv: -kv[1]):
            if v > 0:
                lines.append(f"  {name:10s} {v:.4f}")
    else:
        lines.append(f"{model.method}: n={model.n}, R2={model.r2:.4f}, "
                     f"adj R2={model.adj_r2:.4f}")
        if model.method == "stepwise":
            lines.append(f"AIC={model.extra['aic']:.2f}; selected: "
                         + (", ".join(model.extra["selected"]) or "(intercept only)"))
            lines.append("search trace:")
            for step in model.extra["trace"]:
                col = step["column"] or "-"
                lines.append(f"  {step['action']:5s} {col:10s} AIC={step['aic']:.2f}")
        header = f"  {'term':12s} {'coef':>12s}"
        has_se = model.std_errors is not None
        if has_se:
            header += f" {'se':>12s} {'t':>9s} {'p':>8s}"
        lines.append(header)
        terms = ["(intercept)"] + list(model.feature_names)
        coefs = [model.intercept] + list(model.coef)
        for i, (t, c) in enumerate(zip(terms, coefs)):
            row = f"  {t:12s} {c:12.6f}"
            if has_se:
                row += (f" {model.std_errors[i]:12.6f}"
                        f" {model.t_values[i]:9.3f} {model.p_values[i]:8.4f}")
            lines.append(row)
        if model.method == "lasso":
            lines.append(f"lam={model.extra['lam']:.6g}, sweeps={model.extra['sweeps']}, "
                         f"converged={model.extra['converged']}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- predict


def _trainer_for(model):
    """Conformal trainer that refits the loaded model's recipe."""
    if isinstance(model, Ensemble):
        return gbm_trainer(model.hp)
    if model.method in ("ols", "stepwise"):
        # stepwise: selection frozen at the stored columns
        def train(X, y, seed):
            return ols_fit(X, y).predict
        return train
    if model.method == "lasso":
        lam = float(model.extra.get("lam", 0.0))

        def train(X, y, seed):
            return lasso_fit(X, y, lam).predict
        return train
    raise UsageError(f"no conformal trainer for model method {model.method!r}")


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    try:
        data = load_csv(args.data)
        X, _ = _design_for_model(model, data)
    except (MissingColumn, UnknownPredictor) as exc:
        # data file does not carry the columns the model was built on
        raise UsageError(f"schema mismatch between model and {args.data}: "
                         f"{exc}") from exc
    y_bps = data.spread if data.has_response else None
    alpha = args.alpha

    if args.method == "none":
        point = model.predict(X)
        interval = None
    elif args.method == "normal":
        if not isinstance(model, LinearModel):
            raise UsageError("--method normal needs a linear model with "
                             "sampling theory (ols or stepwise)")
        interval = ols_predict_interval(model, X, alpha)
    else:
        if not args.train:
            raise UsageError(f"--method {args.method} needs --train (the "
                             "training CSV used to build conformal artifacts)")
        try:
            train = load_csv(args.train, require_response=True)
            Xtr, _ = _design_for_model(model, train)
        except (MissingColumn, UnknownPredictor) as exc:
            raise UsageError(f"schema mismatch between model and {args.train}: "
                             f"{exc}") from exc
        ytr = train.spread / BPS_PER_UNIT
        if args.method == "naive":
            interval = naive_interval(model.predict, Xtr, ytr, X, alpha)
        elif args.method == "split":
            interval = split_conformal(_trainer_for(model), Xtr, ytr, X, alpha,
                                       split_ratio=args.split_ratio, seed=args.seed)
        else:
            artifacts = jackknife_artifacts(_trainer_for(model), Xtr, ytr,
                                            seed=args.seed, n_jobs=args.jobs)
            if args.method == "jackknife":
                interval = jackknife_interval(artifacts, X, alpha)
            else:
                interval = jackknife_plus_interval(artifacts, X, alpha)

    with open(args.out, "w") as fh:
        cols = ["point_bps"]
        if interval is not None:
            cols += ["lower_bps", "upper_bps"]
        if y_bps is not None:
            cols.append("spread_bps")
            if interval is not None:
                cols.append("covered")
        fh.write(",".join(cols) + "\n")
        point = model.predict(X) if interval is None else interval.point
        for i in range(X.shape[0]):
            row = [repr(float(point[i] * BPS_PER_UNIT))]
            if interval is not None:
                row += [repr(float(interval.lower[i] * BPS_PER_UNIT)),
                        repr(float(interval.upper[i] * BPS_PER_UNIT))]
            if y_bps is not None:
                row.append(repr(float(y_bps[i])))
                if interval is not None:
                    covered = interval.lower[i] <= y_bps[i] / BPS_PER_UNIT <= interval.upper[i]
                    row.append(str(int(covered)))
            fh.write(",".join(row) + "\n")

    msg = f"wrote {X.shape[0]} predictions to {args.out} (method={args.method}"
    if interval is not None and y_bps is not None:
        cov = float(np.mean(interval.covers(y_bps / BPS_PER_UNIT)))
        fin = np.isfinite(interval.length)
        mean_len = float(np.mean(interval.length[fin]) * BPS_PER_UNIT) if fin.any() else float("inf")
        msg += f", alpha={alpha}, coverage={cov:.4f}, mean_length_bps={mean_len:.2f}"
    print(msg + ")")
    return EXIT_OK


# ----------------------------------------------------------- interpret


def _cmd_interpret(args) -> int:
    import os

    model = _load_model(args.model)
    data = load_csv(args.data)
    X, names = _design_for_model(model, data)
    os.makedirs(args.out_dir, exist_ok=True)
    did_something = False

    def _slug(s: str) -> str:
        return s.replace(".", "_").replace(":", "_x_")

    if args.importance:
        if not isinstance(model, Ensemble):
            raise UsageError("--importance needs a gbm model")
        imp = feature_importance(model)
        path = os.path.join(args.out_dir, "importance.csv")
        with open(path, "w") as fh:
            fh.write("feature,importance\n")
            for k, v in sorted(imp.items(), key=lambda kv: -kv[1]):
                fh.write(f"{k},{v!r}\n")
        if sum(imp.values()) == 0:
            print("note: ensemble never split; importances are all zero")
        print(f"wrote {path}")
        did_something = True

    for feat in args.ale or []:
        curve = ale_first_order(model, X, feat, n_bins=args.bins, feature_names=names)
        path = os.path.join(args.out_dir, f"ale_{_slug(feat)}.csv")
        curve.write_csv(path)
        print(f"wrote {path}")
        did_something = True

    if args.ale2:
        a, b = args.ale2
        surf = ale_second_order(model, X, a, b, n_bins=args.bins2, feature_names=names)
        path = os.path.join(args.out_dir, f"ale2_{_slug(a)}_{_slug(b)}.csv")
        surf.write_csv(path)
        print(f"wrote {path}")
        did_something = True

    if args.conditional:
        feat = args.conditional
        if args.scenario:
            curves = conditional_curve_by_scenario(model, X, feat, args.scenario,
                                                   n_grid=args.grid, feature_names=names)
            for label, curve in curves.items():
                path = os.path.join(
                    args.out_dir,
                    f"conditional_{_slug(feat)}_by_{_slug(args.scenario)}_{label}.csv")
                curve.write_csv(path)
                print(f"wrote {path}")
        else:
            curve = conditional_curve(model, X, feat, n_grid=args.grid,
                                      feature_names=names)
            path = os.path.join(args.out_dir, f"conditional_{_slug(feat)}.csv")
            curve.write_csv(path)
            print(f"wrote {path}")
        did_something = True

    if not did_something:
        raise UsageError("nothing to do: pass --importance, --ale, --ale2, "
                         "or --conditional")
    return EXIT_OK


# ------------------------------------------------------------ evaluate


def _cmd_evaluate(args) -> int:
    data = load_csv(args.data, require_response=True)
    params = _read_json(args.params, "params") if args.params else {}
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    if not kinds:
        raise UsageError("--models must list at least one model kind")
    models = []
    for kind in kinds:
        if kind == "gbm":
            hp = (Hyperparams.from_dict(params["gbm"])
                  if "gbm" in params else Hyperparams())
            grid = GridSpec(params["gbm_grid"]) if "gbm_grid" in params else None
            models.append(ModelSpec(name=kind, kind=kind, hp=hp, grid=grid))
        elif kind == "lasso":
            lambdas = params.get("lasso_lambdas")
            models.append(ModelSpec(name=kind, kind=kind,
                                    lambdas=None if lambdas is None else tuple(lambdas)))
        elif kind == "stepwise":
            models.append(ModelSpec(name=kind, kind=kind,
                                    direction=params.get("stepwise_direction", "both")))
        elif kind in ("ols", "mean"):
            models.append(ModelSpec(name=kind, kind=kind))
        else:
            raise UsageError(f"unknown model kind {kind!r}")

    report = monte_carlo_cv(data, models, n_splits=args.splits,
                            train_frac=args.train_frac, alpha=args.alpha,
                            seed=args.seed, n_jobs=args.jobs, loo_jobs=args.loo_jobs)
    report.save(args.out)
    if args.rows:
        report.write_rows_csv(args.rows)
    print(f"{args.splits} splits x {len(models)} models -> {args.out}")
    print(f"{'model':10s} {'mse':>12s} {'coverage':>9s} {'len(bps)':>9s} {'ok':>4s}")
    for name, agg in report.aggregates().items():
        mse = f"{agg['mse_mean']:.6e}" if agg.get("mse_mean") is not None else "-"
        cov = f"{agg['coverage_mean']:.4f}" if agg.get("coverage_mean") is not None else "-"
        ln = f"{agg['length_bps_mean']:.1f}" if agg.get("length_bps_mean") is not None else "-"
        print(f"{name:10s} {mse:>12s} {cov:>9s} {ln:>9s} {agg['n_ok']:>4d}")
    return EXIT_OK


# ---------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catbond",
                                description="Cat-bond spread pricing laboratory")
    p.add_argument("--version", action="version", version=f"catbond {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic bond CSV")
    sp.add_argument("--config")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--truth", choices=("linear", "nonlinear_interactive"), default=None)
    sp.add_argument("--noise-sd", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--meta", default=None)

    fp = sub.add_parser("fit", help="fit a model and save it as JSON")
    fp.add_argument("--config")
    fp.add_argument("--data", default=None)
    fp.add_argument("--model", choices=("ols", "lasso", "stepwise", "gbm"), default=None)
    fp.add_argument("--features", default=None, help="main or full (default: "
                    "full for linear models, main for gbm)")
    fp.add_argument("--params", default=None, help="JSON file of model parameters")
    fp.add_argument("--seed", type=int, default=None)
    fp.add_argument("--out", default=None)
    fp.add_argument("--report", default=None)

    pp = sub.add_parser("predict", help="predict spreads with intervals")
    pp.add_argument("--config")
    pp.add_argument("--model", default=None)
    pp.add_argument("--data", default=None)
    pp.add_argument("--method", choices=("none", "normal", "naive", "split",
                                         "jackknife", "jackknife_plus"), default=None)
    pp.add_argument("--alpha", type=float, default=None)
    pp.add_argument("--train", default=None)
    pp.add_argument("--split-ratio", type=float, default=None)
    pp.add_argument("--seed", type=int, default=None)
    pp.add_argument("--jobs", type=int, default=None)
    pp.add_argument("--out", default=None)

    ip = sub.add_parser("interpret", help="importance, ALE, conditional curves")
    ip.add_argument("--config")
    ip.add_argument("--model", default=None)
    ip.add_argument("--data", default=None)
    ip.add_argument("--out-dir", default=None)
    ip.add_argument("--importance", action="store_true", default=None)
    ip.add_argument("--ale", action="append", default=None, metavar="FEATURE")
    ip.add_argument("--ale2", nargs=2, default=None, metavar=("A", "B"))
    ip.add_argument("--conditional", default=None, metavar="FEATURE")
    ip.add_argument("--scenario", default=None, metavar="FEATURE")
    ip.add_argument("--bins", type=int, default=None)
    ip.add_argument("--bins2", type=int, default=None)
    ip.add_argument("--grid", type=int, default=None)

    ep = sub.add_parser("evaluate", help="Monte-Carlo CV model comparison")
    ep.add_argument("--config")
    ep.add_argument("--data", default=None)
    ep.add_argument("--models", default=None, help="comma list: mean,ols,lasso,stepwise,gbm")
    ep.add_argument("--splits", type=int, default=None)
    ep.add_argument("--train-frac", type=float, default=None)
    ep.add_argument("--alpha", type=float, default=None)
    ep.add_argument("--seed", type=int, default=None)
    ep.add_argument("--jobs", type=int, default=None)
    ep.add_argument("--loo-jobs", type=int, default=None)
    ep.add_argument("--params", default=None)
    ep.add_argument("--out", default=None)
    ep.add_argument("--rows", default=None)

    return p


_DEFAULTS = {
    "synth": {"n": 765, "seed": 0, "truth": "nonlinear_interactive",
              "noise_sd": 0.015, "out": "bonds.csv", "meta": None},
    "fit": {"data": None, "model": None, "features": None, "params": None,
            "seed": None, "out": "model.json", "report": None},
    "predict": {"model": None, "data": None, "method": "none", "alpha": 0.05,
                "train": None, "split_ratio": 0.5, "seed": 0, "jobs": 1,
                "out": "intervals.csv"},
    "interpret": {"model": None, "data": None, "out_dir": "interpret_out",
                  "importance": False, "ale": [], "ale2": None,
                  "conditional": None, "scenario": None,
                  "bins": 20, "bins2": 10, "grid": 50},
    "evaluate": {"data": None, "models": "stepwise,gbm", "splits": 10,
                 "train_frac": 0.8, "alpha": 0.05, "seed": 0, "jobs": 1,
                 "loo_jobs": 1, "params": None, "out": "cv_report.json",
                 "rows": None},
}

_REQUIRED = {
    "fit": ("data", "model"),
    "predict": ("model", "data"),
    "interpret": ("model", "data"),
    "evaluate": ("data",),
}

_FEATURE_DEFAULT_BY_MODEL = {"ols": "full", "lasso": "full",
                             "stepwise": "full", "gbm": "main"}


def _apply_config(args) -> None:
    config = {}
    if getattr(args, "config", None):
        config = _read_json(args.config, "config")
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    defaults = _DEFAULTS[args.command]
    known = set(defaults)
    for key in config:
        if key not in known:
            raise UsageError(f"unknown config key {key!r} for command "
                             f"{args.command!r}")
    for key, dval in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, dval))
    for key in _REQUIRED.get(args.command, ()):
        if getattr(args, key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
    if args.command == "fit" and args.features is None:
        args.features = _FEATURE_DEFAULT_BY_MODEL[args.model]


_COMMANDS = {
    "synth": _cmd_synth,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "interpret": _cmd_interpret,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE

    try:
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidHyperparams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (MissingColumn, ParseError, InvariantViolation, UnknownPredictor) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except CatbondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

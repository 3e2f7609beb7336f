"""Acceptance suite: eleven pinned criteria, one test per criterion.

Each test is self-contained, runs at fixed seeds and tolerances, and
prints one ``CRITERION k: ...`` line with the measured quantities.
Criteria 2, 4 and 5 are Monte-Carlo suites that re-fit thousands of
boosted ensembles; together they need roughly an hour on one core.
Everything else finishes in seconds.
"""

import time

import numpy as np
import pytest

from catbond.boost import Hyperparams, fit as gbm_fit
from catbond.conformal import (
    gbm_trainer,
    jackknife_artifacts,
    jackknife_plus_interval,
    sample_quantile,
)
from catbond.evaluation import ModelSpec, monte_carlo_cv
from catbond.interpret import (
    ale_first_order,
    ale_second_order,
    conditional_curve_by_scenario,
)
from catbond.linear import lasso_fit, ols_fit, ols_loo_residuals, stepwise_select
from catbond.schema import BPS_PER_UNIT, FeatureSpec, design_matrix
from catbond.synth import ScenarioConfig, generate

# Boosting configurations for the Monte-Carlo criteria, tuned once on
# pilot trials and then frozen.  The coverage suite (criterion 2) wants
# a mildly unstable base learner so Jackknife+ sits mid-band at the
# reduced B=100 budget; the ranking suite (criteria 4/5) wants the
# most accurate fixed configuration the runtime budget allows.
C2_HP = Hyperparams(n_rounds=100, learning_rate=0.12, max_depth=4,
                    subsample=0.6)
MC_HP = Hyperparams(n_rounds=150, learning_rate=0.10, max_depth=4,
                    subsample=0.7, colsample=0.8)


def _nl_dataset(n: int, seed: int):
    data = generate(ScenarioConfig(n=n, seed=seed, truth="nonlinear_interactive"))
    X, names = design_matrix(data, FeatureSpec.main_effects())
    return X, data.spread / BPS_PER_UNIT, names


# ------------------------------------------------------------ criterion 1


def brute_quantile(values, alpha):
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    k = int(np.ceil((n + 1) * (1.0 - alpha)))
    return float("inf") if k > n else float(v[k - 1])


def test_criterion_01_quantile_kernel_exact_on_1000_random_arrays():
    rng = np.random.default_rng(101)
    alphas = (0.01, 0.05, 0.1, 0.25, 0.5)
    cases = []
    for i in range(1000):
        size = int(rng.integers(1, 201))
        cases.append((rng.normal(size=size) * 10, alphas[i % len(alphas)]))
    t0 = time.monotonic()
    got = [sample_quantile(v, a) for v, a in cases]
    elapsed = time.monotonic() - t0
    expected = [brute_quantile(v, a) for v, a in cases]
    mismatches = sum(g != e for g, e in zip(got, expected))
    n_inf = sum(np.isinf(g) for g in got)
    assert mismatches == 0
    assert n_inf > 0, "no case exercised the +inf overflow branch"
    assert elapsed < 1.0, f"1000 quantiles took {elapsed:.3f}s"
    print(f"CRITERION 1: PASS (1000/1000 exact, {n_inf} +inf cases, "
          f"{elapsed * 1000:.0f} ms)")


# ------------------------------------------------------------ criterion 2


def test_criterion_02_jackknife_plus_coverage_over_200_trials():
    """Deterministic protocol; the frozen C2_HP run measures mean 0.9636,
    min 0.90, sd 0.0203 over the 200 trials."""
    covs = np.empty(200)
    for t in range(200):
        X, y, _ = _nl_dataset(500, 10_000 + t)
        art = jackknife_artifacts(gbm_trainer(C2_HP), X[:400], y[:400],
                                  seed=t, n_jobs=1)
        iv = jackknife_plus_interval(art, X[400:], 0.05)
        covs[t] = iv.covers(y[400:]).mean()
    assert covs.min() >= 0.90, f"worst trial coverage {covs.min():.2f}"
    assert 0.93 <= covs.mean() <= 0.97, f"mean coverage {covs.mean():.4f}"
    print(f"CRITERION 2: PASS (mean {covs.mean():.4f}, "
          f"min {covs.min():.2f}, max {covs.max():.2f} over 200 trials)")


# ------------------------------------------------------------ criterion 3


def exhaustive_stump(X, y):
    """Best single split of squared-loss gain with lambda=0, scanning
    every midpoint; ties resolved to the lowest feature index, then the
    lowest threshold."""
    n, p = X.shape
    G, C = y.sum(), float(n)
    best = (-np.inf, -1, np.nan, np.nan, np.nan)
    for j in range(p):
        xs = np.unique(X[:, j])
        for lo, hi in zip(xs[:-1], xs[1:]):
            thr = 0.5 * (lo + hi)
            mask = X[:, j] <= thr
            gl, cl = y[mask].sum(), float(mask.sum())
            gain = 0.5 * (gl**2 / cl + (G - gl)**2 / (C - cl) - G**2 / C)
            if gain > best[0] + 1e-15:
                best = (gain, j, thr, gl / cl, (G - gl) / (C - cl))
    return best


def test_criterion_03_boosting_monotone_mse_and_stump_oracle():
    worst = 0.0
    for s in range(20):
        rng = np.random.default_rng(300 + s)
        X = rng.normal(size=(120, 6))
        y = X[:, 0] ** 2 + np.sin(X[:, 1]) + 0.3 * rng.normal(size=120)
        hp = Hyperparams(n_rounds=60, learning_rate=0.3, max_depth=3,
                         subsample=1.0, colsample=1.0, seed=s)
        mse = gbm_fit(X, y, hp).training_mse
        worst = max(worst, float(np.max(np.diff(mse))))
    assert worst <= 1e-12, f"training MSE increased by {worst:.2e}"

    hp1 = Hyperparams(n_rounds=1, learning_rate=1.0, max_depth=1,
                      reg_lambda=0.0)
    for s in range(8):
        rng = np.random.default_rng(350 + s)
        n = int(rng.integers(5, 51))
        X = rng.normal(size=(n, 3))
        y = np.where(X[:, 1] > 0.2, 2.0, -1.0) + 0.1 * rng.normal(size=n)
        model = gbm_fit(X, y, hp1)
        _, j, thr, wl, wr = exhaustive_stump(X, y - y.mean())
        assert int(model.feature[0, 0]) == j
        assert float(model.threshold[0, 0]) == thr
        # leaf values agree up to summation association order (~1 ulp)
        left, right = int(model.left[0, 0]), int(model.right[0, 0])
        assert abs(float(model.weight[0, left]) - wl) <= 1e-12
        assert abs(float(model.weight[0, right]) - wr) <= 1e-12
    print(f"CRITERION 3: PASS (max MSE increase {worst:.1e} over 20 fits; "
          "8/8 stumps match the oracle exactly)")


# ------------------------------------------------- criteria 4 and 5


@pytest.fixture(scope="module")
def mc_report():
    data = generate(ScenarioConfig(n=765, seed=0, truth="nonlinear_interactive"))
    models = [
        ModelSpec(name="ols", kind="ols"),
        ModelSpec(name="stepwise", kind="stepwise"),
        ModelSpec(name="gbm", kind="gbm", hp=MC_HP),
    ]
    return monte_carlo_cv(data, models, n_splits=100, train_frac=0.8,
                          alpha=0.05, seed=2026, n_jobs=1)


def test_criterion_04_gbm_beats_stepwise_mse_by_10pct(mc_report):
    agg = mc_report.aggregates()
    assert agg["gbm"]["n_failed"] == 0 and agg["stepwise"]["n_failed"] == 0
    gbm, step = agg["gbm"]["mse_mean"], agg["stepwise"]["mse_mean"]
    assert gbm < 0.9 * step, f"gbm {gbm:.3e} vs stepwise {step:.3e}"
    print(f"CRITERION 4: PASS (gbm MSE {gbm:.3e} vs stepwise {step:.3e}, "
          f"ratio {gbm / step:.3f} over 100 splits)")


def test_criterion_05_jackknife_plus_shorter_than_ols_normal(mc_report):
    agg = mc_report.aggregates()
    assert agg["ols"]["n_failed"] == 0
    glen, olen = agg["gbm"]["length_bps_mean"], agg["ols"]["length_bps_mean"]
    gcov, ocov = agg["gbm"]["coverage_mean"], agg["ols"]["coverage_mean"]
    assert glen < olen, f"gbm {glen:.1f} bps vs ols {olen:.1f} bps"
    assert 0.93 <= gcov <= 0.97, f"gbm coverage {gcov:.4f}"
    assert 0.93 <= ocov <= 0.97, f"ols coverage {ocov:.4f}"
    print(f"CRITERION 5: PASS (length {glen:.1f} < {olen:.1f} bps; "
          f"coverage gbm {gcov:.4f}, ols {ocov:.4f})")


# ------------------------------------------------------------ criterion 6


def test_criterion_06_ols_matches_closed_form_to_1e8():
    rng = np.random.default_rng(600)
    X = rng.normal(size=(40, 4))
    y = 1.5 + X @ np.array([2.0, -1.0, 0.5, 0.0]) + 0.3 * rng.normal(size=40)
    model = ols_fit(X, y)
    A = np.column_stack([np.ones(40), X])
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    coef_err = float(np.max(np.abs(
        np.r_[model.intercept, model.coef] - beta) / np.abs(beta)))
    resid = y - A @ beta
    r2 = 1.0 - resid @ resid / ((y - y.mean()) @ (y - y.mean()))
    r2_err = abs(model.r2 - r2) / r2
    assert coef_err < 1e-8 and r2_err < 1e-8

    from scipy import stats
    Xn = rng.normal(size=(5, 4))
    An = np.column_stack([np.ones(5), Xn])
    s2 = resid @ resid / (40 - 5)
    half = (stats.t.ppf(0.975, 35)
            * np.sqrt(s2 * (1.0 + np.einsum(
                "ij,jk,ik->i", An, np.linalg.inv(A.T @ A), An))))
    from catbond.linear import ols_predict_interval
    iv = ols_predict_interval(model, Xn, 0.05)
    int_err = float(np.max(np.abs(iv.upper - (An @ beta + half)) / half))
    assert int_err < 1e-8

    h = np.einsum("ij,jk,ik->i", A, np.linalg.inv(A.T @ A), A)
    loo_err = float(np.max(np.abs(
        ols_loo_residuals(X, y) - resid / (1.0 - h))))
    assert loo_err < 1e-8
    print(f"CRITERION 6: PASS (coef rel err {coef_err:.1e}, interval rel "
          f"err {int_err:.1e}, LOO abs err {loo_err:.1e})")


# ------------------------------------------------------------ criterion 7


def test_criterion_07_lasso_limits_and_monotone_objective():
    rng = np.random.default_rng(700)
    X = rng.normal(size=(80, 5))
    y = 0.7 + X @ np.array([1.0, -2.0, 0.0, 0.5, 0.0]) + 0.2 * rng.normal(size=80)
    ols = ols_fit(X, y)
    at_zero = lasso_fit(X, y, 0.0)
    zero_err = float(np.max(np.abs(at_zero.coef - ols.coef)))
    assert zero_err < 1e-6

    xs = (X - X.mean(axis=0)) / X.std(axis=0)
    lam_max = float(np.max(np.abs(xs.T @ (y - y.mean())))) / len(y)
    dense = lasso_fit(X, y, lam_max * 1.0001)
    assert np.all(dense.coef == 0.0), "slopes not exactly zero at lam_max"

    trace = np.asarray(lasso_fit(X, y, 0.01).extra["objective_trace"])
    worst_rise = float(np.max(np.diff(trace))) if trace.size > 1 else 0.0
    assert worst_rise <= 1e-12 * trace[0]
    print(f"CRITERION 7: PASS (lam=0 vs OLS {zero_err:.1e}; lam>=lam_max "
          f"all-zero; objective rise {worst_rise:.1e})")


# ------------------------------------------------------------ criterion 8


class _Product:
    def predict(self, X):
        return X[:, 0] * X[:, 1]


def test_criterion_08_ale_recovers_slope_additivity_and_interaction():
    data = generate(ScenarioConfig(n=600, seed=8, truth="linear",
                                   noise_sd=0.0))
    X, names = design_matrix(data, FeatureSpec.main_effects())
    y = data.spread / BPS_PER_UNIT
    model = ols_fit(X, y, feature_names=names)
    j = names.index("EL")
    curve = ale_first_order(model, X, "EL", n_bins=20, feature_names=names)
    slope = ((curve.effect[-1] - curve.effect[0])
             / (curve.edges[-1] - curve.edges[0]))
    rel = abs(slope - model.coef[j]) / abs(model.coef[j])
    assert rel < 0.05, f"ALE slope off by {rel:.2%}"

    surf_add = ale_second_order(model, X, "EL", "SIZE", n_bins=8,
                                feature_names=names)
    max_add = float(np.max(np.abs(surf_add.effect)))
    assert max_add < 1e-6, f"additive ALE2 magnitude {max_add:.2e}"

    rng = np.random.default_rng(801)
    Z = rng.uniform(0.5, 3.0, size=(500, 2))
    surf = ale_second_order(_Product(), Z, 0, 1, n_bins=6)
    eff, cnt = surf.effect, surf.counts
    mixed = (eff[1:, 1:] - eff[1:, :-1] - eff[:-1, 1:] + eff[:-1, :-1])
    populated = cnt > 0
    assert populated.any()
    min_mixed = float(mixed[populated].min())
    assert min_mixed > 0.0, f"non-positive mixed difference {min_mixed:.2e}"
    print(f"CRITERION 8: PASS (slope rel err {rel:.2%}; additive ALE2 "
          f"{max_add:.1e}; min mixed diff {min_mixed:.2e})")


# ------------------------------------------------------------ criterion 9


def _leaf_paths(model, t):
    """Sets of split features along each root-to-leaf path of tree t."""
    out = []

    def walk(node, feats):
        j = int(model.feature[t, node])
        if j < 0:
            out.append(feats)
            return
        walk(int(model.left[t, node]), feats | {j})
        walk(int(model.right[t, node]), feats | {j})

    walk(0, frozenset())
    return out


def test_criterion_09_monotone_and_interaction_constraints():
    X, y, names = _nl_dataset(400, 9)
    hp = Hyperparams(n_rounds=60, learning_rate=0.1, max_depth=3,
                     subsample=1.0, monotone={"EL": 1}, seed=9)
    model = gbm_fit(X, y, hp, feature_names=names)
    j = names.index("EL")
    grid = np.linspace(X[:, j].min(), X[:, j].max(), 100)
    rng = np.random.default_rng(901)
    worst = np.inf
    for _ in range(20):
        prof = X[rng.integers(0, X.shape[0])].copy()
        sweep = np.tile(prof, (100, 1))
        sweep[:, j] = grid
        worst = min(worst, float(np.min(np.diff(model.predict(sweep)))))
    assert worst >= -1e-12, f"monotone violation {worst:.2e}"

    hp_int = Hyperparams(n_rounds=40, learning_rate=0.1, max_depth=3,
                         interactions=tuple((n,) for n in names), seed=9)
    single = gbm_fit(X, y, hp_int, feature_names=names)
    offenders = sum(
        len(feats) > 1
        for t in range(single.n_trees)
        for feats in _leaf_paths(single, t))
    assert offenders == 0
    print(f"CRITERION 9: PASS (min grid increment {worst:.1e} over 20 "
          f"profiles; 0 multi-feature paths in {single.n_trees} trees)")


# ----------------------------------------------------------- criterion 10


def test_criterion_10_byte_identical_outputs_across_runs(tmp_path):
    from catbond.cli import main

    def run(*argv):
        assert main([str(a) for a in argv]) == 0

    digests = {}
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        run("synth", "--n", 250, "--seed", 42, "--out", d / "bonds.csv")
        run("fit", "--data", d / "bonds.csv", "--model", "ols",
            "--features", "main", "--out", d / "ols.json")
        run("fit", "--data", d / "bonds.csv", "--model", "gbm", "--seed", 7,
            "--out", d / "gbm.json", "--params", _small_params(tmp_path))
        run("predict", "--model", d / "gbm.json", "--data", d / "bonds.csv",
            "--method", "jackknife_plus", "--train", d / "bonds.csv",
            "--jobs", 2 if tag == "b" else 1, "--out", d / "iv.csv")
        run("evaluate", "--data", d / "bonds.csv", "--models", "mean,ols",
            "--splits", 4, "--jobs", 2 if tag == "b" else 1,
            "--out", d / "cv.json")
        digests[tag] = {p.name: p.read_bytes()
                        for p in sorted(d.iterdir()) if p.name != "bonds.csv"}
        digests[tag]["bonds.csv"] = (d / "bonds.csv").read_bytes()
    same = [k for k in digests["a"] if digests["a"][k] == digests["b"][k]]
    assert sorted(same) == sorted(digests["a"]), (
        f"differing outputs: {sorted(set(digests['a']) - set(same))}")
    print(f"CRITERION 10: PASS ({len(same)} artifacts byte-identical, "
          "jobs 1 vs 2)")


def _small_params(d):
    p = d / "hp.json"
    if not p.exists():
        p.write_text('{"n_rounds": 20, "max_depth": 3, "learning_rate": 0.2}')
    return p


# ----------------------------------------------------------- criterion 11


def _gap_variation(curves):
    labels = sorted(curves)
    worst = 0.0
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            gap = curves[a].values - curves[b].values
            worst = max(worst, float(gap.max() - gap.min()))
    return worst


def test_criterion_11_scenario_families_parallel_iff_linear():
    X, y, names = _nl_dataset(500, 11)
    linear = ols_fit(X, y, feature_names=names)
    lin_curves = conditional_curve_by_scenario(linear, X, "EL", "SIZE",
                                               n_grid=40, feature_names=names)
    lin_var = _gap_variation(lin_curves)
    assert lin_var < 1e-9, f"linear family gap variation {lin_var:.2e}"

    hp = Hyperparams(n_rounds=80, learning_rate=0.1, max_depth=4,
                     subsample=1.0, seed=11)
    gbm = gbm_fit(X, y, hp, feature_names=names)
    gbm_curves = conditional_curve_by_scenario(gbm, X, "EL", "SIZE",
                                               n_grid=40, feature_names=names)
    gbm_var = _gap_variation(gbm_curves)
    assert gbm_var > 1e-8, f"gbm family gap variation only {gbm_var:.2e}"
    print(f"CRITERION 11: PASS (linear variation {lin_var:.1e}, "
          f"gbm variation {gbm_var:.1e})")

import math

import numpy as np
import pytest

from catbond import (
    Hyperparams,
    InvariantViolation,
    derive_seed,
    gbm_trainer,
    jackknife_artifacts,
    jackknife_interval,
    jackknife_plus_interval,
    naive_interval,
    ols_trainer,
    sample_quantile,
    split_conformal,
)
from catbond.conformal import mean_trainer


def brute_quantile(values, alpha):
    v = np.sort(np.asarray(values, dtype=float))
    k = math.ceil((v.size + 1) * (1 - alpha))
    return v[k - 1] if k <= v.size else math.inf


def test_sample_quantile_hand_cases():
    # n=4, alpha=.05: k = ceil(5*0.95) = 5 > 4 -> +inf
    assert sample_quantile(np.array([1.0, 2.0, 3.0, 4.0]), 0.05) == math.inf
    # n=19, alpha=.05: k = ceil(20*0.95) = 19 -> maximum
    v = np.arange(19.0)
    assert sample_quantile(v, 0.05) == 18.0
    # n=99, alpha=.05: k = ceil(100*0.95) = 95 -> 95th order statistic
    v = np.arange(99.0) + 1
    assert sample_quantile(v, 0.05) == 95.0
    # alpha=.5 on n=3: k = ceil(4*0.5) = 2 -> second smallest
    assert sample_quantile(np.array([5.0, -1.0, 2.0]), 0.5) == 2.0


def test_sample_quantile_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 120))
        v = rng.normal(size=n)
        alpha = float(rng.choice([0.01, 0.05, 0.1, 0.25, 0.5]))
        assert sample_quantile(v, alpha) == brute_quantile(v, alpha)


def test_sample_quantile_rejects_bad_alpha():
    with pytest.raises(InvariantViolation):
        sample_quantile(np.array([1.0]), 0.0)
    with pytest.raises(InvariantViolation):
        sample_quantile(np.array([1.0]), 1.0)


def _gaussian_problem(n=300, m=150, seed=0, sigma=0.3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n + m, 3))
    y = 2.0 + X[:, 0] - 0.5 * X[:, 1] + sigma * rng.normal(size=n + m)
    return X[:n], y[:n], X[n:], y[n:]


def test_naive_interval_symmetric_and_covering():
    Xtr, ytr, Xte, yte = _gaussian_problem()
    predict = ols_trainer()(Xtr, ytr, 0)
    iv = naive_interval(predict, Xtr, ytr, Xte, alpha=0.1)
    np.testing.assert_allclose(iv.upper - iv.point, iv.point - iv.lower, rtol=1e-12)
    cov = iv.covers(yte).mean()
    assert 0.80 <= cov <= 1.0


def test_split_conformal_structure_and_determinism():
    Xtr, ytr, Xte, yte = _gaussian_problem(seed=1)
    a = split_conformal(ols_trainer(), Xtr, ytr, Xte, alpha=0.1, seed=5)
    b = split_conformal(ols_trainer(), Xtr, ytr, Xte, alpha=0.1, seed=5)
    np.testing.assert_array_equal(a.lower, b.lower)
    c = split_conformal(ols_trainer(), Xtr, ytr, Xte, alpha=0.1, seed=6)
    assert not np.array_equal(a.lower, c.lower)
    assert 0.80 <= a.covers(yte).mean() <= 1.0
    with pytest.raises(InvariantViolation):
        split_conformal(ols_trainer(), Xtr, ytr, Xte, alpha=0.1, split_ratio=1.2)


def test_jackknife_artifacts_seed_plan():
    Xtr, ytr, _, _ = _gaussian_problem(n=40, m=1, seed=2)
    art = jackknife_artifacts(mean_trainer(), Xtr, ytr, seed=9)
    assert art.n == 40
    assert art.residuals.shape == (40,)
    # leave-one-out residual of the mean model, computed directly
    for i in (0, 17, 39):
        mu_i = (ytr.sum() - ytr[i]) / 39.0
        assert abs(abs(ytr[i] - mu_i) - art.residuals[i]) < 1e-12


def test_jackknife_parallel_assembly_identical():
    Xtr, ytr, _, _ = _gaussian_problem(n=60, m=1, seed=3)
    a = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=4, n_jobs=1)
    b = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=4, n_jobs=4)
    np.testing.assert_array_equal(a.residuals, b.residuals)
    Xte = np.zeros((3, 3))
    np.testing.assert_array_equal(a.loo_matrix(Xte), b.loo_matrix(Xte))


def test_jackknife_plus_matches_manual_quantiles():
    Xtr, ytr, Xte, _ = _gaussian_problem(n=50, m=7, seed=5)
    art = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=1)
    alpha = 0.1
    iv = jackknife_plus_interval(art, Xte, alpha)
    loo = art.loo_matrix(Xte)  # (n_train, n_test): row i holds f^(-i)(Xte)
    for t in range(7):
        up = brute_quantile(loo[:, t] + art.residuals, alpha)
        lo = -brute_quantile(-(loo[:, t] - art.residuals), alpha)
        assert iv.upper[t] == up
        assert iv.lower[t] == lo


def test_jackknife_vs_plus_on_stable_model():
    Xtr, ytr, Xte, yte = _gaussian_problem(n=200, m=100, seed=6)
    art = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=0)
    j = jackknife_interval(art, Xte, 0.1)
    jp = jackknife_plus_interval(art, Xte, 0.1)
    # OLS is stable: both intervals nearly coincide
    np.testing.assert_allclose(j.length, jp.length, rtol=0.05)
    assert 0.80 <= jp.covers(yte).mean() <= 1.0


def test_jackknife_plus_alpha_monotone():
    Xtr, ytr, Xte, _ = _gaussian_problem(n=80, m=40, seed=7)
    art = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=0)
    wide = jackknife_plus_interval(art, Xte, 0.05)
    narrow = jackknife_plus_interval(art, Xte, 0.5)
    assert np.all(narrow.length <= wide.length + 1e-12)


def test_jackknife_small_n_gives_infinite_bounds():
    Xtr, ytr, Xte, _ = _gaussian_problem(n=10, m=3, seed=8)
    art = jackknife_artifacts(ols_trainer(), Xtr, ytr, seed=0)
    iv = jackknife_plus_interval(art, Xte, 0.05)  # ceil(11*0.95)=11 > 10
    assert np.all(np.isinf(iv.upper)) and np.all(np.isinf(iv.lower))


def test_gbm_trainer_respects_seed_derivation():
    Xtr, ytr, Xte, _ = _gaussian_problem(n=60, m=5, seed=9)
    hp = Hyperparams(n_rounds=10, learning_rate=0.2, max_depth=2, subsample=0.7)
    t = gbm_trainer(hp)
    p1 = t(Xtr, ytr, derive_seed(3, 1))
    p2 = t(Xtr, ytr, derive_seed(3, 1))
    np.testing.assert_array_equal(p1(Xte), p2(Xte))
    p3 = t(Xtr, ytr, derive_seed(3, 2))
    assert not np.array_equal(p1(Xte), p3(Xte))

import numpy as np
import pytest

from catbond import BPS_PER_UNIT, FeatureSpec, ScenarioConfig, design_matrix, generate


@pytest.fixture(scope="session")
def nl_data():
    """Canonical nonlinear-interactive dataset at the paper's sample size."""
    return generate(ScenarioConfig(n=765, seed=0, truth="nonlinear_interactive"))


@pytest.fixture(scope="session")
def nl_design(nl_data):
    X, names = design_matrix(nl_data, FeatureSpec.main_effects())
    y = nl_data.spread / BPS_PER_UNIT
    return X, y, names


def make_regression(n=60, k=4, seed=0, sigma=0.1, coef=None):
    """Small dense regression problem with known coefficients."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    if coef is None:
        coef = rng.normal(size=k)
    y = 1.5 + X @ coef + sigma * rng.normal(size=n)
    return X, y, np.asarray(coef, dtype=float)

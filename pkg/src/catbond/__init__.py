"""Cat-bond spread pricing laboratory.

Synthetic bond-market generation with known ground truth, linear
baselines (OLS, lasso, stepwise AIC), exact-greedy gradient-boosted
trees with monotone and interaction constraints, conformal prediction
intervals (naive, split, jackknife, jackknife+), accumulated-local-
effects interpretation, and a Monte-Carlo cross-validation harness.
"""

__version__ = "0.1.0"

from .schema import (  # noqa: E402,F401
    BPS_PER_UNIT,
    DEFAULT_INTERACTIONS,
    PREDICTORS,
    RESPONSE,
    BondRecord,
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
from .synth import (  # noqa: E402,F401
    MIN_SPREAD_BPS,
    ScenarioConfig,
    generate,
    get_truth,
)
from .linear import (  # noqa: E402,F401
    IllConditioned,
    LinearModel,
    PredictionInterval,
    lasso_cv,
    lasso_fit,
    lasso_lambda_max,
    ols_fit,
    ols_loo_residuals,
    ols_predict_interval,
    stepwise_select,
)
from .boost import (  # noqa: E402,F401
    Ensemble,
    Hyperparams,
    InvalidHyperparams,
    fit,
    fit_tree,
)
from .conformal import (  # noqa: E402,F401
    LooArtifacts,
    gbm_trainer,
    jackknife_artifacts,
    jackknife_interval,
    jackknife_plus_interval,
    naive_interval,
    ols_trainer,
    sample_quantile,
    split_conformal,
)
from .interpret import (  # noqa: E402,F401
    AleCurve,
    AleSurface,
    ConditionalCurve,
    ale_first_order,
    ale_second_order,
    conditional_curve,
    conditional_curve_by_scenario,
    feature_importance,
    scenario_levels,
)
from .evaluation import (  # noqa: E402,F401
    CVReport,
    GridSpec,
    ModelSpec,
    grid_search,
    monte_carlo_cv,
)
from .rng import derive_seed, kfold_indices  # noqa: E402,F401

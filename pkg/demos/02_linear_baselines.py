"""Linear pricing baselines: OLS inference, LASSO paths, stepwise AIC.

Fits the full linear specification (territory x rate-index
interactions included) on a synthetic market, then lets two selectors
prune it.  On the linear truth the selectors should keep EL and drop
the eighteen decoys; on the interactive truth they keep a broader set
but cannot represent the interactions the truth actually uses.
"""

import numpy as np

from catbond.linear import lasso_cv, ols_fit, stepwise_select
from catbond.schema import BPS_PER_UNIT, FeatureSpec, design_matrix
from catbond.synth import ScenarioConfig, generate


def fit_and_report(truth: str, seed: int = 0):
    data = generate(ScenarioConfig(n=765, seed=seed, truth=truth))
    X, names = design_matrix(data, FeatureSpec.full())
    y = data.spread / BPS_PER_UNIT

    ols = ols_fit(X, y, feature_names=names)
    print(f"[{truth}] OLS on {len(names)} terms: "
          f"R2 {ols.r2:.3f}, adj R2 {ols.adj_r2:.3f}")
    strong = [(n, c, p) for n, c, p in
              zip(names, ols.coef, ols.p_values[1:]) if p < 0.01]
    print(f"  {len(strong)} terms significant at 1%:")
    for n, c, p in sorted(strong, key=lambda t: t[2])[:8]:
        print(f"    {n:12s} coef {c * BPS_PER_UNIT:9.2f} bps  p {p:.1e}")

    lasso = lasso_cv(X, y, seed=seed, feature_names=names)
    kept = [n for n, c in zip(names, lasso.coef) if c != 0.0]
    print(f"  LASSO (5-fold CV lambda {lasso.extra['lam']:.2e}): "
          f"keeps {len(kept)}/{len(names)}")

    step = stepwise_select(X, y, feature_names=names)
    print(f"  stepwise AIC ({len(step.extra['trace'])} moves): keeps "
          f"{len(step.extra['selected'])} -> AIC {step.extra['aic']:.1f}")
    print(f"    {', '.join(step.extra['selected'][:10])}"
          f"{' ...' if len(step.extra['selected']) > 10 else ''}\n")


def main():
    fit_and_report("linear")
    fit_and_report("nonlinear_interactive")
    print("note: on the linear truth the selectors keep EL plus at most")
    print("a couple of AIC-noise terms; on the interactive truth no")
    print("linear model can close the gap the trees exploit in demo 06.")


if __name__ == "__main__":
    main()

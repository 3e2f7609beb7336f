"""Gradient-boosted pricing with shape and interaction discipline.

Fits the exact-greedy boosted ensemble on the interactive truth, then
refits under (a) a +1 monotone constraint on EL, in line with the
economics (more expected loss never lowers the spread), and (b)
singleton interaction constraints that force a purely additive model.
A structural audit verifies that (b) really contains no two-feature
path, and the MSE comparison shows what the constraints cost.
"""

import numpy as np

from catbond.boost import Hyperparams, fit
from catbond.interpret import feature_importance
from catbond.schema import BPS_PER_UNIT, FeatureSpec, design_matrix
from catbond.synth import ScenarioConfig, generate, get_truth

HP = Hyperparams(n_rounds=300, learning_rate=0.05, max_depth=4,
                 subsample=0.8, seed=0)


def multi_feature_paths(model) -> int:
    """Count root-to-leaf paths that split on two distinct features."""
    total = 0
    for t in range(model.n_trees):
        stack = [(0, frozenset())]
        while stack:
            node, feats = stack.pop()
            j = int(model.feature[t, node])
            if j < 0:
                total += len(feats) > 1
                continue
            stack.append((int(model.left[t, node]), feats | {j}))
            stack.append((int(model.right[t, node]), feats | {j}))
    return total


def main():
    data = generate(ScenarioConfig(n=765, seed=0))
    X, names = design_matrix(data, FeatureSpec.main_effects())
    y = data.spread / BPS_PER_UNIT
    tr, te = np.arange(612), np.arange(612, 765)

    model = fit(X[tr], y[tr], HP, feature_names=names)
    mse = float(np.mean((model.predict(X[te]) - y[te]) ** 2))
    print(f"unconstrained: {model.n_trees} trees, "
          f"train MSE {model.training_mse[-1]:.2e} -> test MSE {mse:.2e}")
    print("  top gain importance:")
    for name, v in sorted(feature_importance(model).items(),
                          key=lambda kv: -kv[1])[:6]:
        print(f"    {name:10s} {v:.3f}")

    mono = fit(X[tr], y[tr], HP.replace(monotone={"EL": 1}),
               feature_names=names)
    mse_m = float(np.mean((mono.predict(X[te]) - y[te]) ** 2))
    j = names.index("EL")
    grid = np.tile(np.median(X[tr], axis=0), (100, 1))
    grid[:, j] = np.linspace(X[:, j].min(), X[:, j].max(), 100)
    worst = float(np.min(np.diff(mono.predict(grid))))
    print(f"monotone EL:   test MSE {mse_m:.2e}, "
          f"min grid increment {worst:.1e} (never negative)")

    addi = fit(X[tr], y[tr],
               HP.replace(interactions=tuple((n,) for n in names)),
               feature_names=names)
    mse_a = float(np.mean((addi.predict(X[te]) - y[te]) ** 2))
    print(f"additive only: test MSE {mse_a:.2e} "
          f"(unconstrained {mse:.2e}; the pricing noise floor of "
          f"{0.015 ** 2:.2e} swamps the gap at this sample size)")

    # Noise hides the interaction payoff, so score both fits against the
    # noiseless pricing function instead.
    truth = get_truth("nonlinear_interactive")(data)[te] / BPS_PER_UNIT
    t_u = float(np.mean((model.predict(X[te]) - truth) ** 2))
    t_a = float(np.mean((addi.predict(X[te]) - truth) ** 2))
    print(f"MSE vs the noiseless truth: unconstrained {t_u:.2e}, "
          f"additive {t_a:.2e} ({(t_a / t_u - 1) * 100:+.0f}%): the "
          "EL x SIZE / EL x ROLX terms are mild but real")
    print(f"paths splitting on >1 feature: unconstrained "
          f"{multi_feature_paths(model)}, additive "
          f"{multi_feature_paths(addi)} (constraint verified)")


if __name__ == "__main__":
    main()

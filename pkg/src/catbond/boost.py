"""Gradient-boosted regression trees with monotone and interaction
constraints.

The estimator is squared-error boosting over exact-greedy binary trees
(midpoint thresholds on every adjacent pair of distinct sorted values,
no histogramming), with the regularised-gain extensions: an L2 leaf
penalty ``reg_lambda``, a minimum child row count ``min_child_weight``
(hessians are 1 per row under squared error, so child hessian mass is
the row count), grow-to-depth-then-prune with threshold
``min_reduction``, per-round row and column subsampling, per-feature
monotone constraints, and interaction constraints as permitted feature
groups.

Interaction-constraint semantics: a feature may split a node only if it
shares at least one permitted group with every feature already used on
the path from the root.  Features not named in any group form implicit
singleton groups, so ``[["EL"]]`` (or listing every feature as a
singleton) confines each path to a single feature, and
``[["EL", "ROLX"]]`` means no path can mix EL with SIZE.

All randomness comes from an internal SplitMix64 stream derived from
``Hyperparams.seed`` (see :mod:`catbond._booster`), so a fit is a pure
function of (X, y, hyperparameters): repeated fits are byte-identical,
including across processes and thread counts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from ._booster import _fit_ensemble, _predict, fit_tree_kernel
from .schema import CatbondError, InvariantViolation, UnknownPredictor

#: hard cap so interaction masks fit one machine word
MAX_FEATURES = 64

_MAX_NODE_BUDGET = 50_000_000


class InvalidHyperparams(CatbondError):
    """A hyperparameter is outside its legal range."""


_ALIASES = {
    "nrounds": "n_rounds",
    "lambda": "reg_lambda",
    "gamma": "min_reduction",
    "eta": "learning_rate",
    "colsample_bytree": "colsample",
    "monotone_constraints": "monotone",
    "interaction_constraints": "interactions",
}


@dataclass(frozen=True)
class Hyperparams:
    """Boosting configuration.

    ``monotone`` maps feature name to +1 (non-decreasing) or -1;
    omitted features are unconstrained.  ``interactions`` is a list of
    permitted feature-name groups; ``None`` disables the constraint.
    """

    n_rounds: int = 800
    learning_rate: float = 0.01
    max_depth: int = 4
    min_reduction: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    reg_lambda: float = 1.0
    seed: int = 0
    monotone: dict[str, int] | None = None
    interactions: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        if not isinstance(self.n_rounds, int) or self.n_rounds < 1:
            raise InvalidHyperparams("n_rounds must be an integer >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidHyperparams("learning_rate must be in (0, 1]")
        if not isinstance(self.max_depth, int) or not 1 <= self.max_depth <= 12:
            raise InvalidHyperparams("max_depth must be an integer in [1, 12]")
        if not self.min_reduction >= 0.0:
            raise InvalidHyperparams("min_reduction must be >= 0")
        if not self.min_child_weight >= 0.0:
            raise InvalidHyperparams("min_child_weight must be >= 0")
        if not 0.0 < self.subsample <= 1.0:
            raise InvalidHyperparams("subsample must be in (0, 1]")
        if not 0.0 < self.colsample <= 1.0:
            raise InvalidHyperparams("colsample must be in (0, 1]")
        if not self.reg_lambda >= 0.0:
            raise InvalidHyperparams("reg_lambda must be >= 0")
        if self.n_rounds * (2 ** (self.max_depth + 1) - 1) > _MAX_NODE_BUDGET:
            raise InvalidHyperparams("n_rounds * 2^(max_depth+1) exceeds the node budget")
        if self.monotone is not None:
            for k, v in self.monotone.items():
                if v not in (-1, 0, 1):
                    raise InvalidHyperparams(f"monotone[{k!r}] must be -1, 0, or +1")
        if self.interactions is not None:
            object.__setattr__(
                self, "interactions",
                tuple(tuple(gr) for gr in self.interactions),
            )
            for gr in self.interactions:
                if len(gr) == 0:
                    raise InvalidHyperparams("interaction groups must be non-empty")

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        kw = {}
        valid = {f.name for f in dataclasses.fields(cls)}
        for k, v in d.items():
            key = _ALIASES.get(k, k)
            if key not in valid:
                raise InvalidHyperparams(f"unknown hyperparameter {k!r}")
            kw[key] = v
        if "interactions" in kw and kw["interactions"] is not None:
            kw["interactions"] = tuple(tuple(gr) for gr in kw["interactions"])
        for int_key in ("n_rounds", "max_depth", "seed"):
            if int_key in kw and kw[int_key] is not None:
                if float(kw[int_key]) != int(kw[int_key]):
                    raise InvalidHyperparams(f"{int_key} must be an integer")
                kw[int_key] = int(kw[int_key])
        for f_key in ("learning_rate", "min_reduction", "min_child_weight",
                      "subsample", "colsample", "reg_lambda"):
            if f_key in kw:
                kw[f_key] = float(kw[f_key])
        return cls(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["interactions"] is not None:
            d["interactions"] = [list(gr) for gr in d["interactions"]]
        return d

    def replace(self, **kw) -> "Hyperparams":
        return dataclasses.replace(self, **kw)


def _constraint_arrays(hp: Hyperparams, feature_names: list[str]):
    p = len(feature_names)
    index = {name: j for j, name in enumerate(feature_names)}
    mono = np.zeros(p, dtype=np.int8)
    if hp.monotone:
        for name, d in hp.monotone.items():
            if name not in index:
                raise UnknownPredictor(name)
            mono[index[name]] = d
    compat = np.empty(p, dtype=np.uint64)
    if hp.interactions is None:
        full = np.uint64(0)
        for j in range(p):
            full |= np.uint64(1) << np.uint64(j)
        compat[:] = full
    else:
        for j in range(p):
            compat[j] = np.uint64(1) << np.uint64(j)
        for gr in hp.interactions:
            bits = np.uint64(0)
            for name in gr:
                if name not in index:
                    raise UnknownPredictor(name)
                bits |= np.uint64(1) << np.uint64(index[name])
            for name in gr:
                compat[index[name]] |= bits
    return mono, compat


@dataclass
class Ensemble:
    """Fitted boosted-tree model.

    Node arrays are packed (n_trees, stride); ``feature[t, i] == -1``
    marks a leaf.  ``training_mse[b]`` is the full-sample training MSE
    after b rounds (index 0 is the base-score-only model).
    """

    hp: Hyperparams
    feature_names: list[str]
    base_score: float
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    gain: np.ndarray
    cover: np.ndarray
    training_mse: np.ndarray
    n_train: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise InvariantViolation(
                f"X has shape {X.shape}, model expects (*, {len(self.feature_names)})"
            )
        if not np.all(np.isfinite(X)):
            raise InvariantViolation("X must be finite")
        return _predict(X, self.feature, self.threshold, self.left, self.right,
                        self.weight, self.base_score, self.hp.learning_rate)

    # ------------------------------------------------------ serialization

    def _live_nodes(self, t: int) -> list[int]:
        """DFS preorder of reachable nodes in tree t."""
        out, stack = [], [0]
        while stack:
            node = stack.pop()
            out.append(node)
            if self.feature[t, node] >= 0:
                stack.append(int(self.right[t, node]))
                stack.append(int(self.left[t, node]))
        return out

    def to_dict(self) -> dict:
        trees = []
        for t in range(self.n_trees):
            nodes = self._live_nodes(t)
            remap = {old: new for new, old in enumerate(nodes)}
            is_leaf = [self.feature[t, i] < 0 for i in nodes]
            trees.append({
                "feature": [int(self.feature[t, i]) for i in nodes],
                "threshold": [0.0 if lf else float(self.threshold[t, i])
                              for i, lf in zip(nodes, is_leaf)],
                "left": [-1 if lf else remap[int(self.left[t, i])]
                         for i, lf in zip(nodes, is_leaf)],
                "right": [-1 if lf else remap[int(self.right[t, i])]
                          for i, lf in zip(nodes, is_leaf)],
                "weight": [float(self.weight[t, i]) if lf else 0.0
                           for i, lf in zip(nodes, is_leaf)],
                "gain": [float(self.gain[t, i]) for i in nodes],
                "cover": [float(self.cover[t, i]) for i in nodes],
            })
        return {
            "format": "catbond-gbm/1",
            "feature_names": list(self.feature_names),
            "base_score": float(self.base_score),
            "hyperparams": self.hp.to_dict(),
            "n_train": int(self.n_train),
            "training_mse": [float(v) for v in self.training_mse],
            "trees": trees,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get("format") != "catbond-gbm/1":
            raise InvariantViolation(f"not a gbm model file: format={d.get('format')!r}")
        hp = Hyperparams.from_dict(d["hyperparams"])
        trees = d["trees"]
        n_trees = len(trees)
        stride = max(len(t["feature"]) for t in trees)
        feature = np.full((n_trees, stride), -1, dtype=np.int32)
        threshold = np.zeros((n_trees, stride))
        left = np.full((n_trees, stride), -1, dtype=np.int32)
        right = np.full((n_trees, stride), -1, dtype=np.int32)
        weight = np.zeros((n_trees, stride))
        gain = np.zeros((n_trees, stride))
        cover = np.zeros((n_trees, stride))
        for t, tr in enumerate(trees):
            m = len(tr["feature"])
            feature[t, :m] = tr["feature"]
            threshold[t, :m] = tr["threshold"]
            left[t, :m] = tr["left"]
            right[t, :m] = tr["right"]
            weight[t, :m] = tr["weight"]
            gain[t, :m] = tr["gain"]
            cover[t, :m] = tr["cover"]
        return cls(
            hp=hp,
            feature_names=list(d["feature_names"]),
            base_score=float(d["base_score"]),
            feature=feature,
            threshold=threshold,
            left=left,
            right=right,
            weight=weight,
            gain=gain,
            cover=cover,
            training_mse=np.asarray(d.get("training_mse", []), dtype=float),
            n_train=int(d.get("n_train", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Ensemble":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit(X: np.ndarray, y: np.ndarray, hp: Hyperparams,
        feature_names: list[str] | None = None) -> Ensemble:
    """Fit a boosted ensemble.  Deterministic given (X, y, hp)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise InvariantViolation("X must be 2-dimensional")
    n, p = X.shape
    if n != y.shape[0]:
        raise InvariantViolation(f"X has {n} rows but y has {y.shape[0]}")
    if n < 1:
        raise InvariantViolation("need at least one row")
    if p < 1 or p > MAX_FEATURES:
        raise InvariantViolation(f"need 1..{MAX_FEATURES} features, got {p}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvariantViolation("X and y must be finite")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(p)]
    if len(feature_names) != p:
        raise InvariantViolation("feature_names length does not match X")

    mono, compat = _constraint_arrays(hp, list(feature_names))
    Xt = np.ascontiguousarray(X.T)
    sidx = np.empty((p, n), dtype=np.int32)
    for j in range(p):
        sidx[j] = np.argsort(Xt[j], kind="stable")

    stride = 2 ** (hp.max_depth + 1) - 1
    B = hp.n_rounds
    feature = np.empty((B, stride), dtype=np.int32)
    threshold = np.empty((B, stride))
    left = np.empty((B, stride), dtype=np.int32)
    right = np.empty((B, stride), dtype=np.int32)
    weight = np.empty((B, stride))
    gain = np.empty((B, stride))
    cover = np.empty((B, stride))
    mse_trace = np.empty(B + 1)

    base = _fit_ensemble(
        Xt, sidx, y, B, hp.learning_rate, hp.max_depth, hp.min_reduction,
        float(hp.min_child_weight), hp.subsample, hp.colsample,
        float(hp.reg_lambda), np.uint64(hp.seed & 0xFFFFFFFFFFFFFFFF),
        mono, bool(np.any(mono != 0)), compat,
        feature, threshold, left, right, weight, gain, cover, mse_trace,
    )
    return Ensemble(
        hp=hp,
        feature_names=list(feature_names),
        base_score=float(base),
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        weight=weight,
        gain=gain,
        cover=cover,
        training_mse=mse_trace,
        n_train=n,
    )


def fit_tree(X: np.ndarray, gradients: np.ndarray, hp: Hyperparams,
             feature_names: list[str] | None = None) -> dict:
    """Grow a single unshrunken tree from explicit row gradients.

    Follows the boosting sign convention g_i = f(x_i) - y_i (all
    hessians are 1 under squared error), so leaf weights are
    -sum(g)/(count + reg_lambda).  Subsampling and the learning rate do
    not apply; this is the building block, exposed for inspection and
    testing.  Returns the packed node arrays of the single tree.
    """
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(gradients, dtype=np.float64).ravel()
    n, p = X.shape
    if g.shape[0] != n:
        raise InvariantViolation("gradients length does not match X")
    if p > MAX_FEATURES:
        raise InvariantViolation(f"need at most {MAX_FEATURES} features")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(p)]
    mono, compat = _constraint_arrays(hp, list(feature_names))
    Xt = np.ascontiguousarray(X.T)
    sidx = np.empty((p, n), dtype=np.int32)
    for j in range(p):
        sidx[j] = np.argsort(Xt[j], kind="stable")
    member = np.ones(n, dtype=np.uint8)
    col_order = np.arange(p, dtype=np.int32)
    feat, thr, left, right, w, gainv, cover = fit_tree_kernel(
        Xt, sidx, g, member, col_order, hp.max_depth, hp.min_reduction,
        float(hp.min_child_weight), float(hp.reg_lambda), mono, compat,
    )
    return {"feature": feat, "threshold": thr, "left": left, "right": right,
            "weight": w, "gain": gainv, "cover": cover}

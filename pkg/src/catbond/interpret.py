"""Model interpretation: gain importance, accumulated local effects,
and conditional (ceteris-paribus) curves.

ALE follows Apley's construction.  First order: split the feature's
range into quantile bins, average the prediction difference obtained by
moving each in-bin sample to the bin edges, accumulate the bin means,
and centre so the count-weighted mean of the accumulated effect at bin
right edges is zero.  Second order: the same with cell-mean second
differences on a quantile grid, double accumulation, subtraction of the
accumulated row/column (first-order) increments, and count-weighted
double centering.  Empty cells borrow the nearest preceding non-empty
cell's second difference in row-major order (the nearest following one
for a leading run of empties).

Because marginal removal and centering only ever add row-constant and
column-constant surfaces, the mixed second differences of the final
second-order surface equal the raw cell second differences; tests lean
on that identity.

Any model is addressed through a prediction function ``(m, p) array ->
(m,) array``; objects with a ``predict`` method work as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boost import Ensemble
from .schema import InvariantViolation


def _as_predict(model):
    if callable(model) and not hasattr(model, "predict"):
        return model
    if hasattr(model, "predict"):
        return model.predict
    raise InvariantViolation("model must be callable or expose .predict")


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvariantViolation("X must be a non-empty 2-d array")
    return X


def _feature_index(j, feature_names: list[str] | None, p: int) -> int:
    if isinstance(j, str):
        if feature_names is None or j not in feature_names:
            raise InvariantViolation(f"unknown feature {j!r}")
        return feature_names.index(j)
    j = int(j)
    if not 0 <= j < p:
        raise InvariantViolation(f"feature index {j} out of range for p={p}")
    return j


# ----------------------------------------------------------- importance


def feature_importance(ensemble: Ensemble, normalize: bool = True) -> dict[str, float]:
    """Total split gain per feature.

    Returns ``{name: gain}`` over the ensemble's feature names, in
    canonical order.  With ``normalize`` the values sum to 1; if the
    ensemble never split (all trees are single leaves) every value is
    0.0 either way, which callers should treat as "no signal", not as a
    uniform ranking.
    """
    p = len(ensemble.feature_names)
    totals = np.zeros(p)
    split_mask = ensemble.feature >= 0
    for j in range(p):
        totals[j] = ensemble.gain[split_mask & (ensemble.feature == j)].sum()
    total = totals.sum()
    if normalize and total > 0:
        totals = totals / total
    return {name: float(v) for name, v in zip(ensemble.feature_names, totals)}


# ------------------------------------------------------------------ ALE


def _quantile_edges(x: np.ndarray, n_bins: int) -> np.ndarray:
    if n_bins < 1:
        raise InvariantViolation("n_bins must be >= 1")
    qs = np.linspace(0.0, 1.0, n_bins + 1)
    edges = np.unique(np.quantile(x, qs))
    if edges.size < 2:
        raise InvariantViolation("feature is constant; ALE is undefined")
    return edges


def _bin_index(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # bins are (e[k-1], e[k]]; the lowest value such that every sample lands
    # in 0..K-1
    return np.clip(np.searchsorted(edges, x, side="left") - 1, 0, edges.size - 2)


@dataclass
class AleCurve:
    """First-order ALE on bin edges.

    ``effect[k]`` is the centred accumulated effect at ``edges[k]``;
    ``counts[k]`` is the number of samples in bin k (``counts[0]`` pads
    the left edge with 0).
    """

    feature: str
    edges: np.ndarray
    effect: np.ndarray
    counts: np.ndarray

    def to_rows(self) -> list[tuple[float, float, int]]:
        return [(float(e), float(f), int(c))
                for e, f, c in zip(self.edges, self.effect, self.counts)]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("edge,effect,count\n")
            for e, f, c in self.to_rows():
                fh.write(f"{e!r},{f!r},{c}\n")


def ale_first_order(model, X: np.ndarray, feature, n_bins: int = 20,
                    feature_names: list[str] | None = None) -> AleCurve:
    """First-order accumulated local effect of one feature."""
    predict = _as_predict(model)
    X = _check_matrix(X)
    j = _feature_index(feature, feature_names, X.shape[1])
    x = X[:, j]
    edges = _quantile_edges(x, n_bins)
    K = edges.size - 1
    idx = _bin_index(x, edges)

    lo = X.copy()
    hi = X.copy()
    lo[:, j] = edges[idx]
    hi[:, j] = edges[idx + 1]
    diff = predict(hi) - predict(lo)

    counts = np.bincount(idx, minlength=K)
    sums = np.bincount(idx, weights=diff, minlength=K)
    delta = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)

    acc = np.concatenate([[0.0], np.cumsum(delta)])
    center = float(np.sum(counts * acc[1:]) / counts.sum())
    name = feature_names[j] if feature_names else (feature if isinstance(feature, str) else f"x{j}")
    return AleCurve(name, edges, acc - center,
                    np.concatenate([[0], counts]).astype(int))


def _fill_row_major(D: np.ndarray, filled: np.ndarray) -> np.ndarray:
    """Empty cells borrow the nearest preceding non-empty value in
    row-major order; a leading run borrows the first non-empty value."""
    D = D.copy()
    flat = D.ravel()
    ok = filled.ravel()
    if not ok.any():
        return np.zeros_like(D)
    first = int(np.flatnonzero(ok)[0])
    last = flat[first]
    for i in range(flat.size):
        if ok[i]:
            last = flat[i]
        else:
            flat[i] = last
    return D


@dataclass
class AleSurface:
    """Second-order ALE on a quantile grid.

    ``effect[k, l]`` lives at (x_edges[k], y_edges[l]); ``counts`` is
    the (K, L) cell occupancy.
    """

    features: tuple[str, str]
    x_edges: np.ndarray
    y_edges: np.ndarray
    effect: np.ndarray
    counts: np.ndarray

    def mixed_differences(self) -> np.ndarray:
        """(K, L) mixed second differences of the final surface; equal to
        the raw (filled) cell second differences by construction."""
        F = self.effect
        return F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x_edge,y_edge,effect,count\n")
            K1, L1 = self.effect.shape
            for k in range(K1):
                for l in range(L1):
                    c = int(self.counts[k - 1, l - 1]) if (k > 0 and l > 0) else 0
                    fh.write(f"{float(self.x_edges[k])!r},{float(self.y_edges[l])!r},"
                             f"{float(self.effect[k, l])!r},{c}\n")


def ale_second_order(model, X: np.ndarray, feature_a, feature_b,
                     n_bins: int = 10,
                     feature_names: list[str] | None = None) -> AleSurface:
    """Second-order (pure interaction) ALE surface for a feature pair."""
    predict = _as_predict(model)
    X = _check_matrix(X)
    p = X.shape[1]
    ja = _feature_index(feature_a, feature_names, p)
    jb = _feature_index(feature_b, feature_names, p)
    if ja == jb:
        raise InvariantViolation("second-order ALE needs two distinct features")

    xa, xb = X[:, ja], X[:, jb]
    ea = _quantile_edges(xa, n_bins)
    eb = _quantile_edges(xb, n_bins)
    K, L = ea.size - 1, eb.size - 1
    ia = _bin_index(xa, ea)
    ib = _bin_index(xb, eb)

    # second difference of predictions across the cell corners
    Q = X.copy()
    corners = []
    for da, db in ((1, 1), (0, 1), (1, 0), (0, 0)):
        Q[:, ja] = ea[ia + da]
        Q[:, jb] = eb[ib + db]
        corners.append(predict(Q).copy())
    d2 = corners[0] - corners[1] - corners[2] + corners[3]

    flat = ia * L + ib
    counts = np.bincount(flat, minlength=K * L).reshape(K, L)
    sums = np.bincount(flat, weights=d2, minlength=K * L).reshape(K, L)
    with np.errstate(invalid="ignore"):
        D = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    D = _fill_row_major(D, counts > 0)

    # double accumulation with a zero left/bottom border
    FJ = np.zeros((K + 1, L + 1))
    FJ[1:, 1:] = np.cumsum(np.cumsum(D, axis=0), axis=1)

    # remove accumulated first-order (row/column) increments
    row_tot = counts.sum(axis=1)
    col_tot = counts.sum(axis=0)
    row_inc = FJ[1:, :] - FJ[:-1, :]          # (K, L+1)
    row_mean = np.where(
        row_tot > 0,
        (counts * 0.5 * (row_inc[:, 1:] + row_inc[:, :-1])).sum(axis=1)
        / np.maximum(row_tot, 1),
        0.0,
    )
    col_inc = FJ[:, 1:] - FJ[:, :-1]          # (K+1, L)
    col_mean = np.where(
        col_tot > 0,
        (counts * 0.5 * (col_inc[1:, :] + col_inc[:-1, :])).sum(axis=0)
        / np.maximum(col_tot, 1),
        0.0,
    )
    F = FJ - np.concatenate([[0.0], np.cumsum(row_mean)])[:, None]
    F = F - np.concatenate([[0.0], np.cumsum(col_mean)])[None, :]

    # centre: count-weighted mean of cell-averaged surface is zero
    cell_avg = 0.25 * (F[1:, 1:] + F[:-1, 1:] + F[1:, :-1] + F[:-1, :-1])
    F = F - float((counts * cell_avg).sum() / counts.sum())

    def name_of(f, j):
        if feature_names:
            return feature_names[j]
        return f if isinstance(f, str) else f"x{j}"

    return AleSurface((name_of(feature_a, ja), name_of(feature_b, jb)),
                      ea, eb, F, counts)


# --------------------------------------------------- conditional curves


@dataclass
class ConditionalCurve:
    """Prediction sweep over one feature with the rest held at a profile.

    ``extrapolated[k]`` flags grid points outside the training range of
    the swept feature.
    """

    feature: str
    grid: np.ndarray
    values: np.ndarray
    profile: np.ndarray
    extrapolated: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("grid,value,extrapolated\n")
            for g, v, e in zip(self.grid, self.values, self.extrapolated):
                fh.write(f"{float(g)!r},{float(v)!r},{int(e)}\n")


def conditional_curve(model, X: np.ndarray, feature, grid: np.ndarray | None = None,
                      profile: np.ndarray | None = None, n_grid: int = 50,
                      feature_names: list[str] | None = None) -> ConditionalCurve:
    """Sweep one feature over ``grid`` holding the others at ``profile``
    (columnwise medians of X by default)."""
    predict = _as_predict(model)
    X = _check_matrix(X)
    j = _feature_index(feature, feature_names, X.shape[1])
    x = X[:, j]
    if grid is None:
        grid = np.linspace(x.min(), x.max(), n_grid)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if profile is None:
        profile = np.median(X, axis=0)
    profile = np.asarray(profile, dtype=float)
    if profile.shape != (X.shape[1],):
        raise InvariantViolation("profile must have one value per feature")

    Q = np.tile(profile, (grid.size, 1))
    Q[:, j] = grid
    name = feature_names[j] if feature_names else (feature if isinstance(feature, str) else f"x{j}")
    return ConditionalCurve(name, grid, predict(Q), profile,
                            (grid < x.min()) | (grid > x.max()))


def scenario_levels(x: np.ndarray) -> dict[str, float]:
    """Soft/normal/hard market anchors for a driver: bottom-decile mean,
    median, top-decile mean."""
    x = np.asarray(x, dtype=float).ravel()
    lo_cut, hi_cut = np.quantile(x, 0.1), np.quantile(x, 0.9)
    return {
        "soft": float(x[x <= lo_cut].mean()),
        "normal": float(np.median(x)),
        "hard": float(x[x >= hi_cut].mean()),
    }


def conditional_curve_by_scenario(model, X: np.ndarray, feature, scenario_feature,
                                  levels: dict[str, float] | None = None,
                                  grid: np.ndarray | None = None, n_grid: int = 50,
                                  feature_names: list[str] | None = None,
                                  ) -> dict[str, ConditionalCurve]:
    """Family of conditional curves, one per scenario level of a second
    feature (defaults: soft/normal/hard from its sample deciles)."""
    X = _check_matrix(X)
    p = X.shape[1]
    j = _feature_index(feature, feature_names, p)
    js = _feature_index(scenario_feature, feature_names, p)
    if j == js:
        raise InvariantViolation("swept and scenario features must differ")
    if levels is None:
        levels = scenario_levels(X[:, js])
    base = np.median(X, axis=0)
    out = {}
    for label, value in levels.items():
        prof = base.copy()
        prof[js] = value
        out[label] = conditional_curve(model, X, j, grid=grid, profile=prof,
                                       n_grid=n_grid, feature_names=feature_names)
    return out

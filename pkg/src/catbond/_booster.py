"""Numba kernels for exact-greedy gradient-boosted regression trees.

Squared-error boosting: per round b, with current prediction f, the
row gradients are g_i = f(x_i) - y_i and every hessian is 1, so node
statistics reduce to (sum of g, row count).  A tree is grown level by
level to ``max_depth``; every node takes its best admissible split
(midpoint thresholds between adjacent distinct sorted values) even if
the gain is below ``gamma``, and a bottom-up pass afterwards prunes
internal nodes whose both children are leaves and whose gain is
<= gamma.  Leaf weight is -G/(C + lambda), clamped to the node's
monotonicity bounds.

Split gain.  Without monotone constraints:

    gain = 0.5 * (GL^2/(CL+lam) + GR^2/(CR+lam) - G^2/(C+lam))

With monotone constraints anywhere, gains are computed from clamped
child weights via the leaf objective -(G*w + 0.5*(C+lam)*w^2), which
reduces to the formula above when no bound binds.  A split on a +1
feature is admissible only when the clamped left weight is <= the
clamped right weight (mirrored for -1); after a monotone split, the
children's weight bounds shrink to the midpoint of the two clamped
child weights, which keeps every deeper leaf on the correct side.

Interaction constraints are per-node 64-bit feature masks: a child's
mask is the parent's mask intersected with the compatibility mask of
the split feature.

Tie-breaking is structural: candidate columns are scanned in ascending
feature index and thresholds in ascending value, and a candidate
replaces the incumbent only on strictly larger gain, so the lowest
feature index and then the lowest threshold wins.

Randomness: one SplitMix64 stream per round, seeded as
mix(seed XOR (round+1)*PHI).  Row subsampling draws a partial
Fisher-Yates prefix, then column subsampling draws from the same
stream; full-rate sampling (rate >= 1) consumes no draws.  All of this
is integer arithmetic, so fits are bit-reproducible everywhere.

Node ids are breadth-first and contiguous per level, which lets the
level sweep skip finished rows with one comparison (position < level
start).  ``inv[c] = 1/(c+lam)`` is precomputed per fit so the hot loop
does no division.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_PHI = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)


@njit(cache=True, nogil=True, inline="always")
def _mix(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit(cache=True, nogil=True, inline="always")
def _next(s):
    s = s + _PHI
    return s, _mix(s)


@njit(cache=True, nogil=True)
def _grow_tree(Xt, sidx, g, member, n_sel, col_order,
               max_depth, gamma, mcw, lam, inv, mono, mono_any, compat,
               feat, thr, left, right, w, gainv, cover,
               position, tot_g, tot_c, lo, hi, mask,
               parent_obj, best_gain, best_feat, best_thr, best_lg, best_lc,
               run_g, run_c, prev_val):
    p, n = Xt.shape
    stride = feat.shape[0]
    for i in range(stride):
        feat[i] = -2
        left[i] = -1
        right[i] = -1
        w[i] = 0.0
        gainv[i] = 0.0
        cover[i] = 0.0

    G0 = 0.0
    C0 = 0
    for r in range(n):
        if member[r] == 1:
            position[r] = 0
            G0 += g[r]
            C0 += 1
        else:
            position[r] = -1
    tot_g[0] = G0
    tot_c[0] = C0
    lo[0] = -np.inf
    hi[0] = np.inf
    full = U64(0)
    for j in range(p):
        full |= U64(1) << U64(j)
    mask[0] = full

    lev_lo = 0
    lev_hi = 1
    next_free = 1
    for _level in range(max_depth):
        for idn in range(lev_lo, lev_hi):
            best_gain[idn] = -np.inf
            best_feat[idn] = -1
            if mono_any:
                wp = -tot_g[idn] * inv[tot_c[idn]]
                if wp < lo[idn]:
                    wp = lo[idn]
                elif wp > hi[idn]:
                    wp = hi[idn]
                parent_obj[idn] = -(tot_g[idn] * wp
                                    + 0.5 * (tot_c[idn] + lam) * wp * wp)
            else:
                parent_obj[idn] = 0.5 * tot_g[idn] * tot_g[idn] * inv[tot_c[idn]]

        any_cand = False
        for jj in range(n_sel):
            j = col_order[jj]
            dmono = mono[j]
            jbit = U64(1) << U64(j)
            for idn in range(lev_lo, lev_hi):
                run_g[idn] = 0.0
                run_c[idn] = 0
                prev_val[idn] = 0.0
            row = sidx[j]
            xj = Xt[j]
            for t in range(n):
                r = row[t]
                pos = position[r]
                if pos < lev_lo:
                    continue
                v = xj[r]
                cl = run_c[pos]
                if cl > 0 and v != prev_val[pos]:
                    if (mask[pos] & jbit) != U64(0):
                        cr = tot_c[pos] - cl
                        if cl >= mcw and cr >= mcw:
                            gl = run_g[pos]
                            gr = tot_g[pos] - gl
                            if mono_any:
                                wl = -gl * inv[cl]
                                if wl < lo[pos]:
                                    wl = lo[pos]
                                elif wl > hi[pos]:
                                    wl = hi[pos]
                                wr = -gr * inv[cr]
                                if wr < lo[pos]:
                                    wr = lo[pos]
                                elif wr > hi[pos]:
                                    wr = hi[pos]
                                ok = True
                                if dmono > 0 and wl > wr:
                                    ok = False
                                elif dmono < 0 and wl < wr:
                                    ok = False
                                if ok:
                                    gn = (-(gl * wl + 0.5 * (cl + lam) * wl * wl)
                                          - (gr * wr + 0.5 * (cr + lam) * wr * wr)
                                          - parent_obj[pos])
                                    if gn > best_gain[pos]:
                                        best_gain[pos] = gn
                                        best_feat[pos] = j
                                        best_thr[pos] = 0.5 * (prev_val[pos] + v)
                                        best_lg[pos] = gl
                                        best_lc[pos] = cl
                                        any_cand = True
                            else:
                                gn = (0.5 * (gl * gl * inv[cl] + gr * gr * inv[cr])
                                      - parent_obj[pos])
                                if gn > best_gain[pos]:
                                    best_gain[pos] = gn
                                    best_feat[pos] = j
                                    best_thr[pos] = 0.5 * (prev_val[pos] + v)
                                    best_lg[pos] = gl
                                    best_lc[pos] = cl
                                    any_cand = True
                run_g[pos] += g[r]
                run_c[pos] = cl + 1
                prev_val[pos] = v

        if not any_cand:
            break

        for idn in range(lev_lo, lev_hi):
            jf = best_feat[idn]
            if jf < 0:
                continue
            lid = next_free
            rid = next_free + 1
            next_free += 2
            feat[idn] = jf
            thr[idn] = best_thr[idn]
            left[idn] = lid
            right[idn] = rid
            gainv[idn] = best_gain[idn]
            tot_g[lid] = best_lg[idn]
            tot_c[lid] = best_lc[idn]
            tot_g[rid] = tot_g[idn] - best_lg[idn]
            tot_c[rid] = tot_c[idn] - best_lc[idn]
            cm = mask[idn] & compat[jf]
            mask[lid] = cm
            mask[rid] = cm
            lo[lid] = lo[idn]
            hi[lid] = hi[idn]
            lo[rid] = lo[idn]
            hi[rid] = hi[idn]
            d = mono[jf]
            if d != 0:
                wl = -tot_g[lid] * inv[tot_c[lid]]
                if wl < lo[idn]:
                    wl = lo[idn]
                elif wl > hi[idn]:
                    wl = hi[idn]
                wr = -tot_g[rid] * inv[tot_c[rid]]
                if wr < lo[idn]:
                    wr = lo[idn]
                elif wr > hi[idn]:
                    wr = hi[idn]
                mid = 0.5 * (wl + wr)
                if d > 0:
                    if mid < hi[lid]:
                        hi[lid] = mid
                    if mid > lo[rid]:
                        lo[rid] = mid
                else:
                    if mid > lo[lid]:
                        lo[lid] = mid
                    if mid < hi[rid]:
                        hi[rid] = mid

        for r in range(n):
            pos = position[r]
            if pos >= lev_lo and pos < lev_hi and feat[pos] >= 0:
                if Xt[feat[pos], r] < thr[pos]:
                    position[r] = left[pos]
                else:
                    position[r] = right[pos]

        lev_lo = lev_hi
        lev_hi = next_free

    for idn in range(next_free):
        if feat[idn] == -2:
            feat[idn] = -1
            wv = -tot_g[idn] * inv[tot_c[idn]]
            if wv < lo[idn]:
                wv = lo[idn]
            elif wv > hi[idn]:
                wv = hi[idn]
            w[idn] = wv
        cover[idn] = float(tot_c[idn])

    # bottom-up prune: children always have larger ids than parents
    for idn in range(next_free - 1, -1, -1):
        if feat[idn] >= 0:
            if feat[left[idn]] == -1 and feat[right[idn]] == -1 and gainv[idn] <= gamma:
                feat[idn] = -1
                wv = -tot_g[idn] * inv[tot_c[idn]]
                if wv < lo[idn]:
                    wv = lo[idn]
                elif wv > hi[idn]:
                    wv = hi[idn]
                w[idn] = wv
                gainv[idn] = 0.0

    return next_free


@njit(cache=True, nogil=True)
def _fit_ensemble(Xt, sidx, y, n_rounds, lr, max_depth, gamma, mcw,
                  subsample, colsample, lam, seed, mono, mono_any, compat,
                  feat_a, thr_a, left_a, right_a, w_a, gain_a, cover_a,
                  mse_trace):
    p, n = Xt.shape
    stride = feat_a.shape[1]

    base = np.mean(y)
    pred = np.full(n, base)
    g = np.empty(n)
    sse = 0.0
    for r in range(n):
        g[r] = pred[r] - y[r]
        sse += g[r] * g[r]
    mse_trace[0] = sse / n

    inv = np.empty(n + 1)
    inv[0] = 0.0
    for c in range(1, n + 1):
        inv[c] = 1.0 / (c + lam)

    m_rows = n if subsample >= 1.0 else max(1, int(subsample * n + 0.5))
    m_cols = p if colsample >= 1.0 else max(1, int(colsample * p + 0.5))

    order = np.empty(n, np.int32)
    col_order = np.empty(p, np.int32)
    member = np.empty(n, np.uint8)
    position = np.empty(n, np.int32)
    tot_g = np.empty(stride)
    tot_c = np.empty(stride, np.int64)
    lo = np.empty(stride)
    hi = np.empty(stride)
    mask = np.empty(stride, U64)
    parent_obj = np.empty(stride)
    best_gain = np.empty(stride)
    best_feat = np.empty(stride, np.int32)
    best_thr = np.empty(stride)
    best_lg = np.empty(stride)
    best_lc = np.empty(stride, np.int64)
    run_g = np.empty(stride)
    run_c = np.empty(stride, np.int64)
    prev_val = np.empty(stride)

    for b in range(n_rounds):
        s = _mix(seed ^ (U64(b + 1) * _PHI))

        if m_rows == n:
            for r in range(n):
                member[r] = 1
        else:
            for r in range(n):
                order[r] = r
                member[r] = 0
            for i in range(m_rows):
                s, rv = _next(s)
                jswap = i + int(rv % U64(n - i))
                tmp = order[i]
                order[i] = order[jswap]
                order[jswap] = tmp
            for i in range(m_rows):
                member[order[i]] = 1

        if m_cols == p:
            n_sel = p
            for j in range(p):
                col_order[j] = j
        else:
            n_sel = m_cols
            for j in range(p):
                col_order[j] = j
            for i in range(m_cols):
                s, rv = _next(s)
                jswap = i + int(rv % U64(p - i))
                tmp = col_order[i]
                col_order[i] = col_order[jswap]
                col_order[jswap] = tmp
            col_order[:m_cols] = np.sort(col_order[:m_cols])

        _grow_tree(Xt, sidx, g, member, n_sel, col_order,
                   max_depth, gamma, mcw, lam, inv, mono, mono_any, compat,
                   feat_a[b], thr_a[b], left_a[b], right_a[b],
                   w_a[b], gain_a[b], cover_a[b],
                   position, tot_g, tot_c, lo, hi, mask,
                   parent_obj, best_gain, best_feat, best_thr, best_lg, best_lc,
                   run_g, run_c, prev_val)

        feat = feat_a[b]
        thr = thr_a[b]
        left = left_a[b]
        right = right_a[b]
        w = w_a[b]
        sse = 0.0
        for r in range(n):
            node = 0
            while feat[node] >= 0:
                if Xt[feat[node], r] < thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            pred[r] += lr * w[node]
            g[r] = pred[r] - y[r]
            sse += g[r] * g[r]
        mse_trace[b + 1] = sse / n

    return base


@njit(cache=True, nogil=True)
def _predict(Xq, feat_a, thr_a, left_a, right_a, w_a, base, lr):
    m = Xq.shape[0]
    n_trees = feat_a.shape[0]
    out = np.empty(m)
    for i in range(m):
        acc = 0.0
        for b in range(n_trees):
            feat = feat_a[b]
            node = 0
            while feat[node] >= 0:
                if Xq[i, feat[node]] < thr_a[b, node]:
                    node = left_a[b, node]
                else:
                    node = right_a[b, node]
            acc += w_a[b, node]
        out[i] = base + lr * acc
    return out


def fit_tree_kernel(Xt, sidx, g, member, col_order, max_depth, gamma, mcw,
                    lam, mono, compat):
    """Grow one tree from explicit gradients (hessians are all 1).

    Thin wrapper used by :mod:`catbond.boost` and the test suite;
    allocates the scratch buffers and returns the packed node arrays.
    """
    p, n = Xt.shape
    stride = 2 ** (max_depth + 1) - 1
    feat = np.empty(stride, np.int32)
    thr = np.zeros(stride)
    left = np.empty(stride, np.int32)
    right = np.empty(stride, np.int32)
    w = np.zeros(stride)
    gainv = np.zeros(stride)
    cover = np.zeros(stride)
    inv = np.empty(n + 1)
    inv[0] = 0.0
    inv[1:] = 1.0 / (np.arange(1, n + 1) + lam)
    mono_any = bool(np.any(mono != 0))
    _grow_tree(Xt, sidx, np.asarray(g, dtype=np.float64), member,
               len(col_order), col_order,
               max_depth, gamma, mcw, lam, inv,
               mono, mono_any, compat,
               feat, thr, left, right, w, gainv, cover,
               np.empty(n, np.int32), np.empty(stride), np.empty(stride, np.int64),
               np.empty(stride), np.empty(stride), np.empty(stride, U64),
               np.empty(stride), np.empty(stride), np.empty(stride, np.int32),
               np.empty(stride), np.empty(stride), np.empty(stride, np.int64),
               np.empty(stride), np.empty(stride, np.int64), np.empty(stride))
    return feat, thr, left, right, w, gainv, cover

"""Numeric inner loops.

Every kernel here is plain Python over numpy arrays and is compiled with
numba unless ``TAILGAME_NUMBA=0``. Callers pass flat arrays only; the
object-level API lives in the other modules.
"""

import numpy as np

from ._accel import njit

_PIVOT_EPS = 1e-12


@njit
def solve_matrix_game(M):
    """Value and optimal mixed actions of the zero-sum game ``M``.

    The row player maximizes. Returns ``(value, row_strategy, col_strategy)``.
    Solved as ``max 1'y s.t. (M + c) y <= 1, y >= 0`` with Bland's rule; the
    row strategy is read off the final dual prices.
    """
    m, n = M.shape
    shift = 1.0 - M.min()
    T = np.zeros((m + 1, n + m + 1))
    for r in range(m):
        for c in range(n):
            T[r, c] = M[r, c] + shift
        T[r, n + r] = 1.0
        T[r, n + m] = 1.0
    for c in range(n):
        T[m, c] = -1.0
    basis = np.empty(m, dtype=np.int64)
    for r in range(m):
        basis[r] = n + r

    for _ in range(50 * (m + n) + 100):
        enter = -1
        for j in range(n + m):
            if T[m, j] < -_PIVOT_EPS:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best = np.inf
        for r in range(m):
            if T[r, enter] > _PIVOT_EPS:
                ratio = T[r, n + m] / T[r, enter]
                if leave < 0 or ratio < best - 1e-15:
                    leave = r
                    best = ratio
                elif ratio <= best + 1e-15 and basis[r] < basis[leave]:
                    leave = r
                    best = ratio
        piv = T[leave, enter]
        for j in range(n + m + 1):
            T[leave, j] /= piv
        for r in range(m + 1):
            if r != leave:
                f = T[r, enter]
                if f != 0.0:
                    for j in range(n + m + 1):
                        T[r, j] -= f * T[leave, j]
        basis[leave] = enter

    z = T[m, n + m]
    y = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            y[basis[r]] = T[r, n + m]
    x = np.zeros(m)
    for r in range(m):
        x[r] = max(T[m, n + r], 0.0)
    for c in range(n):
        if y[c] < 0.0:
            y[c] = 0.0
    x /= x.sum()
    y /= y.sum()
    return 1.0 / z - shift, x, y


@njit
def pre_operator(nxt, lvl, weight, X):
    """One application of the concurrent one-step value operator.

    State ``q`` gets the value of the matrix
    ``M[b, c] = weight[q, b, c] + X[lvl[q, b, c], nxt[q, b, c]]``.
    Returns values and both sides' optimal mixed actions per state.
    """
    S, R, C = nxt.shape
    vals = np.empty(S)
    xs = np.zeros((S, R))
    ys = np.zeros((S, C))
    M = np.empty((R, C))
    for q in range(S):
        for b in range(R):
            for c in range(C):
                M[b, c] = weight[q, b, c] + X[lvl[q, b, c], nxt[q, b, c]]
        v, x, y = solve_matrix_game(M)
        vals[q] = v
        xs[q, :] = x
        ys[q, :] = y
    return vals, xs, ys


@njit
def stopping_values(act_ptr, out_ptr, out_prob, out_next, stop, tol, max_iter):
    """Least fixpoint of ``v = max(stop, max_a sum_o p_o v[next_o])``.

    Covers maximal reachability (``stop`` = target indicator) and optimal
    stopping with terminal rewards. Jacobi sweeps starting from ``stop``.
    """
    S = stop.shape[0]
    v = stop.copy()
    new = stop.copy()
    residual = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        residual = 0.0
        for s in range(S):
            best = stop[s]
            for a in range(act_ptr[s], act_ptr[s + 1]):
                acc = 0.0
                for o in range(out_ptr[a], out_ptr[a + 1]):
                    acc += out_prob[o] * v[out_next[o]]
                if acc > best:
                    best = acc
            new[s] = best
            d = abs(best - v[s])
            if d > residual:
                residual = d
        v[:] = new
        if residual < tol:
            break
    return v, it, residual


@njit
def mean_payoff_rvi(act_ptr, out_ptr, out_prob, out_next, out_weight,
                    state_mask, act_mask, tau, tol, max_iter):
    """Relative value iteration for the optimal gain of a communicating part.

    Only states with ``state_mask`` and actions with ``act_mask`` take part;
    transitions are made aperiodic by self-loop weight ``tau``. Returns
    ``(gain_lo, gain_hi, iterations)``; the true gain lies in between.
    """
    S = state_mask.shape[0]
    h = np.zeros(S)
    new = np.zeros(S)
    ref = -1
    for s in range(S):
        if state_mask[s]:
            ref = s
            break
    lo = 0.0
    hi = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        lo = np.inf
        hi = -np.inf
        for s in range(S):
            if not state_mask[s]:
                continue
            best = -np.inf
            for a in range(act_ptr[s], act_ptr[s + 1]):
                if not act_mask[a]:
                    continue
                acc = 0.0
                for o in range(out_ptr[a], out_ptr[a + 1]):
                    acc += out_prob[o] * (out_weight[o] + (1.0 - tau) * h[out_next[o]])
                acc += tau * h[s]
                if acc > best:
                    best = acc
            new[s] = best
            diff = best - h[s]
            if diff < lo:
                lo = diff
            if diff > hi:
                hi = diff
        off = new[ref]
        for s in range(S):
            if state_mask[s]:
                h[s] = new[s] - off
        if hi - lo < tol:
            break
    return lo, hi, it


@njit
def action_values(payoffs, acts, strat):
    """Expected payoff of each pure action against the others' mixed actions.

    ``payoffs[i, k]`` is player i's payoff at flat profile ``k`` whose
    actions are ``acts[k]``; ``strat[j]`` is j's mixed action (zero padded).
    """
    P, K = payoffs.shape
    out = np.zeros(strat.shape)
    for k in range(K):
        for i in range(P):
            pr = 1.0
            for j in range(P):
                if j != i:
                    pr *= strat[j, acts[k, j]]
            if pr != 0.0:
                out[i, acts[k, i]] += pr * payoffs[i, k]
    return out


@njit
def nash_gap(payoffs, acts, strat):
    """Largest gain any single player gets from a unilateral deviation."""
    vals = action_values(payoffs, acts, strat)
    gap = 0.0
    for i in range(vals.shape[0]):
        cur = 0.0
        for a in range(vals.shape[1]):
            cur += vals[i, a] * strat[i, a]
        g = vals[i].max() - cur
        if g > gap:
            gap = g
    return gap


@njit
def regret_matching(payoffs, acts, sizes, iters, check_every, tol):
    """Regret matching; returns the profile with the smallest Nash gap seen.

    Candidates are the current iterate and the running average, examined
    every ``check_every`` iterations. Stops early once the gap is <= ``tol``.
    """
    P = sizes.shape[0]
    A = sizes.max()
    strat = np.zeros((P, A))
    for i in range(P):
        for a in range(sizes[i]):
            strat[i, a] = 1.0 / sizes[i]
    regret = np.zeros((P, A))
    avg = np.zeros((P, A))
    best = strat.copy()
    best_gap = nash_gap(payoffs, acts, strat)
    n_done = 0
    for t in range(1, iters + 1):
        n_done = t
        vals = action_values(payoffs, acts, strat)
        for i in range(P):
            cur = 0.0
            for a in range(sizes[i]):
                cur += vals[i, a] * strat[i, a]
            tot = 0.0
            for a in range(sizes[i]):
                regret[i, a] += vals[i, a] - cur
                if regret[i, a] > 0.0:
                    tot += regret[i, a]
            for a in range(sizes[i]):
                if tot > 0.0:
                    strat[i, a] = max(regret[i, a], 0.0) / tot
                else:
                    strat[i, a] = 1.0 / sizes[i]
        avg += strat
        if t % check_every == 0:
            g = nash_gap(payoffs, acts, strat)
            if g < best_gap:
                best_gap = g
                best = strat.copy()
            mean = avg / t
            g = nash_gap(payoffs, acts, mean)
            if g < best_gap:
                best_gap = g
                best = mean.copy()
            if best_gap <= tol:
                break
    return best, best_gap, n_done


@njit
def psi_minus(x):
    # x - min(x, 1 - x) / 2, written so that repeated halving reaches 0 exactly
    if x <= 0.5:
        return 0.5 * x
    return x - 0.5 * (1.0 - x)


@njit
def psi_plus(x):
    if x <= 0.5:
        return x + 0.5 * x
    return x + 0.5 * (1.0 - x)


@njit
def psi_ledger_mc(start, val, delta, p_row, q_col, uniforms, check_values):
    """Monte Carlo of the matching-pennies ledger with optional re-initiation.

    Along each sampled play the governing value ``s`` defines the stage
    function ``[[psi+(s), psi-(s)], [psi-(s), psi+(s)]]``; diagonal outcomes
    move ``d`` to ``psi+(s)``, others to ``psi-(s)``. When ``delta > 0`` and
    ``d < val - delta`` the ledger re-initiates at ``val - delta / 2``.
    Row plays T with probability ``p_row`` and column plays L with
    probability ``q_col``, drawn from ``uniforms[play, stage, 0:2]``.

    Returns per-play re-initiation counts, the sum and squared sum of the
    realized increments, the sum of conditional expected increments, the
    smallest observed ``val(d^h) - d(h)`` and the smallest re-initiation gap
    ``val(d^h) - d(h) - delta / 2`` (``inf`` if none). Matrix values are
    recomputed by LP when ``check_values`` is set.
    """
    n_plays, horizon, _ = uniforms.shape
    counts = np.zeros(n_plays, dtype=np.int64)
    inc_sum = 0.0
    inc_sq = 0.0
    cond_sum = 0.0
    min_m1 = np.inf
    min_gap = np.inf
    p_diag = p_row * q_col + (1.0 - p_row) * (1.0 - q_col)
    M = np.empty((2, 2))
    for k in range(n_plays):
        d = start
        s = start
        for t in range(horizon):
            hi = psi_plus(s)
            lo = psi_minus(s)
            if check_values:
                M[0, 0] = hi
                M[1, 1] = hi
                M[0, 1] = lo
                M[1, 0] = lo
                v, x, y = solve_matrix_game(M)
                if v - d < min_m1:
                    min_m1 = v - d
            cond_sum += p_diag * hi + (1.0 - p_diag) * lo - d
            row_t = uniforms[k, t, 0] < p_row
            col_l = uniforms[k, t, 1] < q_col
            nd = hi if row_t == col_l else lo
            inc = nd - d
            inc_sum += inc
            inc_sq += inc * inc
            d = nd
            s = nd
            if delta > 0.0 and d < val - delta:
                counts[k] += 1
                s = val - 0.5 * delta
                if check_values:
                    M[0, 0] = psi_plus(s)
                    M[1, 1] = M[0, 0]
                    M[0, 1] = psi_minus(s)
                    M[1, 0] = M[0, 1]
                    v, x, y = solve_matrix_game(M)
                    gap = v - d - 0.5 * delta
                    if gap < min_gap:
                        min_gap = gap
    return counts, inc_sum, inc_sq, cond_sum, min_m1, min_gap

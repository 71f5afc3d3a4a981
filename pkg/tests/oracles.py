"""Independent brute-force oracles shared by the unit and acceptance tests.

Nothing here calls into the package's solvers.
"""

import itertools

import numpy as np

GRID = np.array([0.0, 0.25, 0.5, 0.75, 1.0])


def random_two_state_process(rng, n_actions=2):
    """Transition tensor ``P[s, a, t]`` on a coarse probability grid, Büchi flags and weights."""
    P = np.zeros((2, n_actions, 2))
    for s in range(2):
        for a in range(n_actions):
            p = rng.choice(GRID)
            P[s, a] = [p, 1.0 - p]
    accept = rng.random((2, n_actions, 2)) < 0.4
    weight = np.round(rng.random((2, n_actions, 2)), 1)
    return P, accept, weight


def buchi_backward_induction(P, accept, horizon=200):
    """Probability of at least ``horizon`` accepting visits, each found within ``horizon`` steps."""
    R = np.ones(P.shape[0])
    for _ in range(horizon):
        Y = np.zeros(P.shape[0])
        for _ in range(horizon):
            cont = np.where(accept, R[None, None, :], Y[None, None, :])
            Y = (P * cont).sum(axis=2).max(axis=1)
        R = Y
    return R


def mean_payoff_backward_induction(P, weight, horizon=200):
    """Gain estimate ``(V_n - V_{n/2}) / (n/2)`` from the n-stage total reward.

    ``V_n = n g + h + o(1)`` for optimal total rewards, so differencing two
    horizons cancels the bias term ``h`` that makes ``V_n / n`` converge
    only like ``1/n``. Two states have period at most 2, and ``n/2`` is even.
    """
    V = np.zeros(P.shape[0])
    r = (P * weight).sum(axis=2)
    half = None
    for t in range(1, horizon + 1):
        V = (r + P @ V).max(axis=1)
        if t == horizon // 2:
            half = V.copy()
    return (V - half) / (horizon - horizon // 2)


def product_grid_minmax(payoff, sizes, k):
    """Minmax of player 0 (axis 0) against independent opponents restricted to the k-lattice.

    ``payoff`` has axes ``(own, opp_1, ..., opp_m)``; opponents have two
    actions each and mix with probabilities ``j / k``.
    """
    m = len(sizes) - 1
    grid = np.linspace(0.0, 1.0, k + 1)
    best = np.inf
    for qs in itertools.product(grid, repeat=m):
        t = payoff
        for q in reversed(qs):
            t = t @ np.array([q, 1.0 - q])
        best = min(best, float(t.max()))
    return best

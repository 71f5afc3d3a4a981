"""Compiled kernels against scipy and against their own pure-Python bodies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from tailgame import _accel, kernels


def lp_value(M):
    """Row player's maximin value by a direct LP (independent oracle)."""
    m, n = M.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((n, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return -res.fun


def test_matrix_game_matches_lp(rng):
    for _ in range(200):
        m, n = rng.integers(1, 6, size=2)
        M = rng.random((m, n))
        v, x, y = kernels.solve_matrix_game(M)
        assert v == pytest.approx(lp_value(M), abs=1e-9)
        assert x.sum() == pytest.approx(1.0) and y.sum() == pytest.approx(1.0)
        assert (x >= -1e-12).all() and (y >= -1e-12).all()
        # both strategies guarantee v
        assert (x @ M).min() >= v - 1e-9
        assert (M @ y).max() <= v + 1e-9


def test_matching_pennies_matrix():
    v, x, y = kernels.solve_matrix_game(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert v == pytest.approx(0.5)
    np.testing.assert_allclose(x, [0.5, 0.5])
    np.testing.assert_allclose(y, [0.5, 0.5])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(0, 1, allow_nan=False)))
def test_value_between_pure_bounds(M):
    v, _, _ = kernels.solve_matrix_game(np.ascontiguousarray(M))
    assert M.min(axis=1).max() - 1e-9 <= v <= M.max(axis=0).min() + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(0, 1, allow_nan=False)),
       st.floats(0.1, 3), st.floats(-1, 1))
def test_value_is_affine_equivariant(M, a, b):
    v, _, _ = kernels.solve_matrix_game(np.ascontiguousarray(M))
    w, _, _ = kernels.solve_matrix_game(np.ascontiguousarray(a * M + b))
    assert w == pytest.approx(a * v + b, abs=1e-8)


@pytest.mark.skipif(not _accel.USE_NUMBA, reason="compiled kernels disabled")
def test_compiled_and_python_agree(rng):
    for _ in range(50):
        M = rng.random((3, 4))
        a = kernels.solve_matrix_game(M)
        b = kernels.solve_matrix_game.py_func(M)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-12)
    u = np.random.default_rng(0).random((20, 30, 2))
    a = kernels.psi_ledger_mc(0.9, 1.0, 0.2, 0.5, 0.5, u, True)
    b = kernels.psi_ledger_mc.py_func(0.9, 1.0, 0.2, 0.5, 0.5, u, True)
    np.testing.assert_array_equal(a[0], b[0])
    for x, y in zip(a[1:], b[1:]):
        assert x == pytest.approx(y, abs=1e-12)


def test_psi_maps():
    assert kernels.psi_plus(0.5) == 0.75
    assert kernels.psi_minus(0.5) == 0.25
    for x in np.linspace(0, 1, 101):
        lo, hi = kernels.psi_minus(x), kernels.psi_plus(x)
        assert (lo + hi) / 2 == pytest.approx(x, abs=1e-15)
        assert 0 <= lo <= x <= hi <= 1


def test_psi_minus_reaches_zero_exactly():
    x = 0.9
    for _ in range(1200):
        x = kernels.psi_minus(x)
    assert x == 0.0


def test_stopping_values_simple_chain():
    # state 0: one action, to 1 w.p. .5 and to 2 w.p. .5; 1 is target, 2 is a sink
    act_ptr = np.array([0, 1, 2, 3])
    out_ptr = np.array([0, 2, 3, 4])
    prob = np.array([0.5, 0.5, 1.0, 1.0])
    nxt = np.array([1, 2, 1, 2])
    stop = np.array([0.0, 1.0, 0.0])
    v, it, res = kernels.stopping_values(act_ptr, out_ptr, prob, nxt, stop, 1e-12, 1000)
    np.testing.assert_allclose(v, [0.5, 1.0, 0.0])

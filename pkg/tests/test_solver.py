import numpy as np
import pytest

from tailgame import solver
from tailgame.core import MixedAction, make_game
from tailgame.objectives import first_action, limsup_mean

from oracles import (buchi_backward_induction, mean_payoff_backward_induction,
                     random_two_state_process)


def test_matching_pennies_values(pennies):
    cg = solver.build_concurrent_game(pennies, 0)
    assert cg.window == (1,)
    table = solver.solve_values(cg)
    assert table.converged
    assert table.values.min() >= 1 - 1e-3
    cg1 = solver.build_concurrent_game(pennies, 1)
    t1 = solver.solve_values(cg1)
    assert t1.values.max() <= 1e-3


def test_matching_pennies_punishment_is_uniform(pennies):
    cg = solver.build_concurrent_game(pennies, 1)
    pun = solver.punishment_profile(cg)
    assert pun.guarantee <= 1e-9
    (m,) = pun.strategy.mixed[cg.initial]
    np.testing.assert_allclose(m.as_array(), [0.5, 0.5], atol=1e-6)
    cg0 = solver.build_concurrent_game(pennies, 0)
    pun0 = solver.punishment_profile(cg0)
    assert pun0.guarantee == pytest.approx(1.0)


def test_stateless_mean_payoff_is_matrix_value():
    g = make_game({"n_players": 2, "actions": ["a", "b"], "defaults": "a", "eps": 0.1,
                   "objectives": ["always", "always"]})
    aut = limsup_mean({(0, 0): 1.0, (1, 1): 1.0, (0, 1): 0.0, (1, 0): 0.0}, players=(0, 1), sizes=(2, 2))
    cg = solver.build_concurrent_game(g, 0, aut)
    table = solver.solve_values(cg)
    assert table.kind == "limsup-mean"
    assert table.values[0] == pytest.approx(0.5, abs=1e-3)


def test_history_dependence_is_reported():
    g = make_game({"n_players": 1, "actions": ["0", "1"], "defaults": "0", "eps": 0.1,
                   "objectives": {"kind": "special", "name": "first-action"}})
    cg = solver.build_concurrent_game(g, 0, first_action())
    rep = solver.history_independence_check(cg)
    assert not rep.ok
    assert rep.spread == pytest.approx(1.0, abs=1e-3)


def test_parity_values_are_monotone_under_objective_weakening():
    # a co-Buchi objective is harder than the always-true one
    g = make_game({"n_players": 2, "actions": ["a", "b"], "defaults": "a", "eps": 0.1,
                   "objectives": [{"kind": "cobuchi", "players": [0, 1], "reject": [[0, "a,b"], [0, "b,a"]]},
                                  "always"]})
    cg = solver.build_concurrent_game(g, 0)
    v = solver.solve_values(cg).values[0]
    # the opponent can force a mismatch w.p. 1/2 each stage, so mismatches occur forever
    assert v <= 1e-3


def test_strategy_round_trip(pennies):
    cg = solver.build_concurrent_game(pennies, 1)
    strat = solver.punishment_profile(cg).strategy
    back = solver.StationaryStrategy.from_dict(strat.as_dict(), cg.window_sizes)
    assert back.window == strat.window
    for q in strat.mixed:
        np.testing.assert_allclose(back.column_distribution(q), strat.column_distribution(q), atol=1e-11)


def test_realize_correlated_product_is_exact():
    y = np.outer([0.25, 0.75], [0.5, 0.5]).ravel()
    mixed, how = solver.realize_correlated(y, (2, 2))
    assert how == "product"
    np.testing.assert_allclose(mixed[0].as_array(), [0.25, 0.75])
    # perfectly correlated coordination is not a product: marginals are used
    mixed, how = solver.realize_correlated(np.array([0.5, 0.0, 0.0, 0.5]), (2, 2))
    assert how == "product-of-marginals"
    np.testing.assert_allclose(mixed[1].as_array(), [0.5, 0.5])
    _, how = solver.realize_correlated(np.array([0.0, 0.0, 0.3, 0.7]), (2, 2))
    assert how == "exact"


def dp_from_tables(P, labels, kind):
    dp = solver.DecisionProcess(P.shape[0], kind)
    for s in range(P.shape[0]):
        for a in range(P.shape[1]):
            dp.add_action(s, [(P[s, a, t], t, labels[s, a, t]) for t in range(P.shape[2])], tag=a)
    return dp


def test_end_components_of_a_small_process():
    # 0 -> {0,1}, 1 -> 1 (self loop), 2 -> 0
    P = np.zeros((3, 1, 3))
    P[0, 0, [0, 1]] = 0.5
    P[1, 0, 1] = 1.0
    P[2, 0, 0] = 1.0
    dp = dp_from_tables(P, np.ones_like(P), "buchi")
    arr = dp.arrays()
    mecs = solver.maximal_end_components(arr, np.ones(arr.n_actions, dtype=bool))
    assert [states for states, _ in mecs] == [[1]]


@pytest.mark.parametrize("seed", range(10))
def test_decision_processes_against_backward_induction(seed):
    rng = np.random.default_rng(seed)
    P, accept, weight = random_two_state_process(rng)
    res = solver.solve_decision_process(dp_from_tables(P, np.where(accept, 2, 1), "buchi"))
    np.testing.assert_allclose(res.values, buchi_backward_induction(P, accept), atol=1e-2)
    res = solver.solve_decision_process(dp_from_tables(P, weight, "limsup-mean"))
    np.testing.assert_allclose(res.values, mean_payoff_backward_induction(P, weight), atol=1e-2)


def test_best_response_against_pure_punisher(pennies):
    cg = solver.build_concurrent_game(pennies, 0)
    strat = solver.StationaryStrategy(cg.window, cg.window_sizes,
                                      {q: (MixedAction.pure(0, 2),) for q in cg.states})
    # a predictable opponent is matched every stage
    assert solver.best_response(cg, strat).value == pytest.approx(1.0)

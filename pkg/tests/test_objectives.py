from fractions import Fraction
import itertools

import pytest

from tailgame.core import LassoPlay, make_game
from tailgame.objectives import (always, evaluate_lasso, even_finite_ones, first_action, limsup_mean,
                                 matching_pennies_io, objective_from_descriptor, tail_check, voorneveld_ev,
                                 voorneveld_stage_reward, zeta_capped, zeta_objective)


def lasso(prefix, cycle):
    return LassoPlay(tuple(prefix), tuple(cycle))


def test_matching_pennies_io():
    f = matching_pennies_io()
    assert evaluate_lasso(f, lasso([(0, 1)] * 5, [(0, 1), (1, 1)])) == 1.0
    assert evaluate_lasso(f, lasso([(0, 0)] * 5, [(0, 1), (1, 0)])) == 0.0
    g = matching_pennies_io(negate=True)
    for p in [lasso([], [(0, 0)]), lasso([(1, 1)], [(1, 0)])]:
        assert evaluate_lasso(f, p) + evaluate_lasso(g, p) == 1.0


def test_voorneveld_objective_with_zero_tail():
    # with the tail at 0 the statistic is 0, so playing 1 wins every stage
    f = voorneveld_ev(0, one_index=1, tail_is_one=False)
    assert evaluate_lasso(f, lasso([(0,)] * 3, [(1,)])) == 1.0
    assert evaluate_lasso(f, lasso([], [(1,), (0,)])) == 0.0


def test_voorneveld_stage_reward(voorneveld):
    a = tuple([1] * voorneveld.n_players)
    assert voorneveld_stage_reward(a, voorneveld) == [1] * voorneveld.n_players
    a = tuple([0] * voorneveld.n_players)
    assert voorneveld_stage_reward(a, voorneveld) == [0] * voorneveld.n_players


def test_limsup_mean_uses_periodic_part():
    f = limsup_mean({(1,): 1.0, (0,): 0.0})
    assert evaluate_lasso(f, lasso([(1,)] * 9, [(1,), (0,), (0,)])) == pytest.approx(1 / 3)


def test_zeta_capped_values():
    assert zeta_capped(lasso([], [(1,), (1,), (0,)])) == Fraction(2, 3)
    assert zeta_capped(lasso([(0,)], [(1,)])) == 0
    assert evaluate_lasso(zeta_objective(), lasso([], [(1,), (0,)])) == 0.5


def test_always_and_first_action():
    assert evaluate_lasso(always(), lasso([], [(0,)])) == 1.0
    f = first_action()
    assert evaluate_lasso(f, lasso([(1,)], [(0,)])) == 1.0
    assert evaluate_lasso(f, lasso([(0,)], [(1,)])) == 0.0


def test_tail_check_classifies():
    rep = tail_check(matching_pennies_io(), 3)
    assert rep.tail and rep.shift_invariant
    rep = tail_check(even_finite_ones(), 3)
    assert rep.tail and not rep.shift_invariant
    assert rep.shift_witness is not None
    rep = tail_check(first_action(), 2)
    assert not rep.tail
    (u, c), (v, c2) = rep.tail_witness
    f = first_action()
    assert len(u) == len(v) and c == c2
    assert f.value_from(f.initial, u, c) != f.value_from(f.initial, v, c)


def test_descriptor_buchi_with_transitions():
    g = make_game({
        "n_players": 2, "actions": [["x", "y"], ["x", "y"]], "defaults": "x", "eps": 0.1,
        "objectives": [
            {"kind": "buchi", "players": [0, 1], "states": 2,
             "transitions": [[0, "y,*", 1], [1, "x,*", 0]], "accept": [1]},
            {"kind": "cobuchi", "players": [0, 1], "reject": [[0, "*,y"]]},
        ],
    })
    f0, f1 = g.objectives
    assert evaluate_lasso(f0, lasso([], [(1, 0), (0, 0)])) == 1.0
    assert evaluate_lasso(f0, lasso([(1, 0)], [(0, 0)])) == 0.0
    assert evaluate_lasso(f1, lasso([(0, 1)], [(0, 0)])) == 1.0
    assert evaluate_lasso(f1, lasso([], [(0, 0), (0, 1)])) == 0.0


def test_descriptor_parity_and_weights():
    g = make_game({
        "n_players": 1, "actions": ["p", "q"], "defaults": "p", "eps": 0.1,
        "objectives": {"kind": "parity", "states": 2, "transitions": [[0, "q", 1], [1, "p", 0]],
                       "priorities": {"0": 1, "1": 2}},
    })
    f = g.objectives[0]
    assert evaluate_lasso(f, lasso([], [(1,), (0,)])) == 1.0
    assert evaluate_lasso(f, lasso([], [(0,)])) == 0.0
    g = make_game({
        "n_players": 1, "actions": ["p", "q"], "defaults": "p", "eps": 0.1,
        "objectives": {"kind": "limsup-mean", "weights": {"q": 0.5}},
    })
    assert evaluate_lasso(g.objectives[0], lasso([], [(1,), (0,)])) == 0.25


@pytest.mark.parametrize("desc, msg", [
    ({"kind": "nope"}, "unknown kind"),
    ({"kind": "buchi", "bogus": 1}, "unknown fields"),
    ({"kind": "buchi", "transitions": [[0, "p", 3]]}, "out of range"),
    ({"kind": "limsup-mean", "weights": {"p": 2}}, "weights"),
    ({"kind": "limsup-mean", "weights": {"p": 0.5}, "negate": True}, "negated"),
])
def test_descriptor_errors(desc, msg):
    from tailgame.core import GameSpecError
    with pytest.raises((GameSpecError, ValueError), match=msg):
        make_game({"n_players": 1, "actions": ["p", "q"], "defaults": "p", "eps": 0.1, "objectives": desc})


def test_negated_objective_complements_on_all_short_lassos():
    f = matching_pennies_io()
    g = matching_pennies_io(negate=True)
    letters = list(itertools.product(range(2), range(2)))
    for n in range(1, 4):
        for c in itertools.product(letters, repeat=n):
            p = lasso([], c)
            assert evaluate_lasso(f, p) + evaluate_lasso(g, p) == 1.0
